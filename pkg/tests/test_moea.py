import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iscc.config import MOEASettings
from iscc.moea import (
    EPS_DIV,
    Evaluator,
    Population,
    apply_operator,
    crowding_distance,
    de_rand_1,
    dominance_matrix,
    environmental_selection,
    init_population,
    nondominated_fronts,
    pareto_front,
    partition_sizes,
    population_state,
    restart,
    run_ga,
    run_imode,
    selection_order,
)
from iscc.problem import EvalResult, SphereBudgetProblem

S = MOEASettings()


class Fixed:
    """Problem stub returning preset objective vectors and violations by row index in gene 0."""

    dim = 4

    def __init__(self, objs, phi):
        self.objs, self.phi = np.asarray(objs, float), np.asarray(phi, float)

    def evaluate(self, genes):
        i = int(round(genes[0]))
        o = self.objs[i]
        return EvalResult(objectives=o, F=float(o.sum()), phi=float(self.phi[i]), feasible=self.phi[i] == 0)


def make_pop(objs, phi=None):
    objs = np.asarray(objs, float)
    phi = np.zeros(len(objs)) if phi is None else np.asarray(phi, float)
    genes = np.zeros((len(objs), 4))
    genes[:, 0] = np.arange(len(objs))
    return Evaluator(Fixed(objs, phi)).fill(Population(genes))


def brute_fronts(objs):
    n = len(objs)
    rank = np.full(n, -1)
    level = 0
    left = set(range(n))
    while left:
        cur = {i for i in left
               if not any(np.all(objs[j] <= objs[i]) and np.any(objs[j] < objs[i]) for j in left if j != i)}
        for i in cur:
            rank[i] = level
        left -= cur
        level += 1
    return rank


# population


def test_init_deterministic_and_in_box():
    a = init_population(30, 4, np.random.default_rng(1))
    b = init_population(30, 4, np.random.default_rng(1))
    assert np.array_equal(a.genes, b.genes)
    assert np.all((a.genes >= 0) & (a.genes <= 1))


def test_init_mean(rng):
    assert abs(init_population(10_000, 4, rng).genes.mean() - 0.5) < 0.02


def test_init_minimum_size(rng):
    with pytest.raises(ValueError):
        init_population(3, 4, rng)


# variation


@pytest.mark.parametrize("op", range(4))
def test_operators_stay_in_box(op, rng):
    pop = make_pop(rng.random((12, 4)))
    pop.genes = rng.random((12, 4))
    kids = apply_operator(pop, op, rng, S)
    assert kids.genes.shape == (12, 4)
    assert np.all((kids.genes >= 0) & (kids.genes <= 1))
    assert all(r is None for r in kids.results)


def test_unknown_operator(rng):
    pop = make_pop(rng.random((6, 4)))
    with pytest.raises(ValueError):
        apply_operator(pop, 4, rng, S)


def test_restart_zero_fraction_is_identity(rng):
    genes = rng.random((10, 4))
    s = MOEASettings(restart_fraction=0.0)
    assert np.array_equal(restart(genes, 10, rng, s), genes)


def test_restart_zero_fraction_copies_members(rng):
    pop = make_pop(rng.random((10, 4)))
    pop.genes = rng.random((10, 4))
    kids = apply_operator(pop, 3, rng, MOEASettings(restart_fraction=0.0))
    assert all(any(np.array_equal(k, g) for g in pop.genes) for k in kids.genes)


def test_restart_fraction_rate(rng):
    genes = rng.random((5000, 4))
    out = restart(genes, 5000, rng, S)
    assert np.mean(out != genes) == pytest.approx(0.2, abs=0.01)


def test_de_rand_zero_scale_full_crossover_returns_bases(rng):
    genes = rng.random((20, 4))
    s = MOEASettings(de_f_min=0.0, de_f_max=0.0, de_cr=1.0)
    kids = de_rand_1(genes, 20, rng, s)
    assert all(any(np.array_equal(k, g) for g in genes) for k in kids)


def test_de_best_uses_archive_head(rng):
    pop = make_pop(rng.random((10, 4)))
    pop.genes = rng.random((10, 4))
    archive = make_pop([[0, 0, 0, 0]])
    archive.genes = np.full((1, 4), 0.77)
    s = MOEASettings(de_f_min=0.0, de_f_max=0.0, de_cr=1.0)
    kids = apply_operator(pop, 1, rng, s, archive=archive)
    assert np.allclose(kids.genes, 0.77)


# selection


def test_violation_first_single_survivor():
    pop = make_pop([[5, 5, 5, 5], [1, 1, 1, 1], [0, 0, 0, 0]], phi=[0, 0.1, 3])
    out = environmental_selection(pop, 1)
    assert out.phi[0] == 0 and out.objectives[0, 0] == 5


def test_dominating_point_ranked_first():
    pop = make_pop([[2, 2, 2, 2], [1, 1, 1, 1]])
    assert selection_order(pop.objectives, pop.phi)[0] == 1


def test_six_point_hand_instance():
    objs = np.array([[1, 4], [4, 1], [2, 5], [4.5, 2], [5, 1.5], [6, 6]], float)
    objs = np.hstack([objs, np.zeros((6, 2))])
    fronts = nondominated_fronts(objs)
    assert [len(f) for f in fronts] == [2, 3, 1]
    rank = brute_fronts(objs)
    for level, f in enumerate(fronts):
        assert np.all(rank[f] == level)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 200), st.integers(0, 2**31))
def test_fronts_match_brute_force(n, seed):
    r = np.random.default_rng(seed)
    objs = r.integers(0, 6, (n, 4)).astype(float)  # ties exercised on purpose
    rank = brute_fronts(objs) if n <= 60 else None
    fronts = nondominated_fronts(objs)
    assert sorted(np.concatenate(fronts).tolist()) == list(range(n))
    if rank is not None:
        for level, f in enumerate(fronts):
            assert np.all(rank[f] == level)
    dom = dominance_matrix(objs)
    for level, f in enumerate(fronts[1:], start=1):
        assert np.all(dom[np.ix_(fronts[level - 1], f)].any(axis=0))


def test_crowding_boundaries_infinite():
    objs = np.array([[0, 3], [1, 2], [2, 1], [3, 0]], float)
    cd = crowding_distance(objs)
    assert np.isinf(cd[0]) and np.isinf(cd[3]) and np.all(np.isfinite(cd[1:3]))


def test_selection_size_and_stability(rng):
    objs = rng.random((30, 4))
    pop = make_pop(objs, phi=np.where(rng.random(30) < 0.3, rng.random(30), 0.0))
    out = environmental_selection(pop, 12)
    assert len(out) == 12
    assert np.array_equal(selection_order(pop.objectives, pop.phi), selection_order(pop.objectives, pop.phi))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 40), st.integers(1, 40))
def test_selection_never_prefers_infeasible(seed, n, k):
    r = np.random.default_rng(seed)
    k = min(k, n)
    phi = np.where(r.random(n) < 0.5, r.random(n), 0.0)
    pop = make_pop(r.random((n, 4)), phi)
    out = environmental_selection(pop, k)
    n_feas = int(np.sum(phi == 0))
    assert int(np.sum(out.phi == 0)) == min(n_feas, k)


# state and fronts


def test_population_state_hand_example():
    pop = make_pop([[1, 1, 1, 1], [3, 1, 1, 1]], phi=[0, 2])
    st_ = population_state(pop)
    assert st_.con == pytest.approx(5.0) and st_.fea == pytest.approx(1.0)
    assert st_.div == pytest.approx(0.5)


def test_population_state_all_feasible_and_identical():
    pop = make_pop([[1, 2, 3, 4]] * 3)
    st_ = population_state(pop)
    assert st_.fea == 0 and st_.div == pytest.approx(1 / EPS_DIV) and np.isfinite(st_.div)


def test_pareto_singleton_and_idempotent(rng):
    single = make_pop([[1, 2, 3, 4]])
    assert len(pareto_front(single)) == 1
    pop = make_pop(rng.random((50, 4)) ** 3)
    front = pareto_front(pop)
    again = pareto_front(make_pop([m.result.objectives for m in front]))
    assert len(again) == len(front)


def test_pareto_matches_brute_force(rng):
    objs = rng.random((50, 4))
    objs[:, 3] = 1 - objs[:, 0]  # make a real trade-off
    pop = make_pop(objs)
    got = sorted(int(round(m.genes[0])) for m in pareto_front(pop))
    want = [i for i in range(50)
            if not any(np.all(objs[j] <= objs[i]) and np.any(objs[j] < objs[i]) for j in range(50))]
    assert got == want


def test_pareto_excludes_infeasible():
    pop = make_pop([[1, 1, 1, 1], [0, 0, 0, 0]], phi=[0, 1])
    front = pareto_front(pop)
    assert len(front) == 1 and front[0].result.phi == 0


# evaluator archive


def test_archive_keeps_best_feasible():
    ev = Evaluator(Fixed(np.arange(10)[:, None] * np.ones((1, 4)), np.r_[1.0, np.zeros(9)]), archive_size=3)
    genes = np.zeros((10, 4))
    genes[:, 0] = np.arange(10)[::-1]
    ev(genes)
    assert ev.count == 10
    assert [r.F for r in ev.archive.results] == [4.0, 8.0, 12.0]
    assert ev.best_F == 4.0


# baselines


def test_ga_budget_zero_returns_initial_best():
    res = run_ga(SphereBudgetProblem(), 0, np.random.default_rng(0), MOEASettings(pop_size=20))
    assert res.evaluations == 20 and len(res.log) == 1
    assert res.best_F == res.log[0].best_F


def test_ga_budget_exact():
    for budget in (100, 1234, 5000):
        assert run_ga(SphereBudgetProblem(), budget, np.random.default_rng(1), S).evaluations == budget


def test_ga_deterministic():
    a = run_ga(SphereBudgetProblem(), 800, np.random.default_rng(3), S)
    b = run_ga(SphereBudgetProblem(), 800, np.random.default_rng(3), S)
    assert a.best_F == b.best_F and np.array_equal(a.best_genes, b.best_genes)


def test_ga_log_consistent():
    res = run_ga(SphereBudgetProblem(), 1000, np.random.default_rng(2), S)
    assert res.best_F == min(r.best_F for r in res.log)
    assert len(res.log) - 1 == max(r.generation for r in res.log)


@pytest.fixture(scope="module")
def sphere_runs():
    p = SphereBudgetProblem()
    ga = [run_ga(p, 5000, np.random.default_rng(s), S).best_F for s in range(10)]
    im = [run_imode(p, 5000, np.random.default_rng(s), S).best_F for s in range(10)]
    return p.optimum, ga, im


def test_ga_reaches_sphere_optimum(sphere_runs):
    opt, ga, _ = sphere_runs
    assert np.median(ga) <= 1.02 * opt


def test_imode_matches_or_beats_ga_on_sphere(sphere_runs):
    _, ga, im = sphere_runs
    assert np.median(im) <= np.median(ga)


def test_partition_sizes_sum():
    for shares in ([1, 1, 1], [0.1, 0.9, 0.5], [0.2, 0.2, 0.6]):
        for n in (8, 9, 100, 37):
            sizes = partition_sizes(np.asarray(shares, float), n)
            assert sizes.sum() == n and np.all(sizes >= 0)


def test_imode_linear_size_reduction():
    s = MOEASettings(pop_size=40, imode_n_min=8)
    res = run_imode(SphereBudgetProblem(), 4000, np.random.default_rng(0), s)
    sizes = [n for n, _ in res.extra["imode_trace"]]
    assert sizes[0] == 40 and len(res.population) == 8
    assert all(b <= a for a, b in zip(sizes, sizes[1:]))
    assert all(sum(parts) == n for n, parts in res.extra["imode_trace"])
    assert res.evaluations == 4000


def test_imode_deterministic():
    a = run_imode(SphereBudgetProblem(), 600, np.random.default_rng(5), S)
    b = run_imode(SphereBudgetProblem(), 600, np.random.default_rng(5), S)
    assert a.best_F == b.best_F
