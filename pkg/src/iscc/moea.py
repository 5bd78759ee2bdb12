"""Constrained multi-objective evolutionary machinery and the GA / IMODE baselines."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import MOEASettings
from .problem import EvalResult

OPERATORS = ("de_rand_1_bin", "de_best_1_bin", "sbx_pm", "restart")
EPS_DIV = 1e-12


# population containers


@dataclass
class Individual:
    genes: np.ndarray
    result: EvalResult | None = None


@dataclass
class Population:
    genes: np.ndarray
    results: list = field(default_factory=list)
    generation: int = 0

    def __post_init__(self):
        self.genes = np.atleast_2d(np.asarray(self.genes, dtype=float))
        if not self.results:
            self.results = [None] * len(self.genes)
        if len(self.results) != len(self.genes):
            raise ValueError("one result slot per member")

    def __len__(self) -> int:
        return len(self.genes)

    @property
    def evaluated(self) -> bool:
        return all(r is not None for r in self.results)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objectives for r in self.results], dtype=float)

    @property
    def phi(self) -> np.ndarray:
        return np.array([r.phi for r in self.results], dtype=float)

    @property
    def F(self) -> np.ndarray:
        return np.array([r.F for r in self.results], dtype=float)

    @property
    def members(self) -> list[Individual]:
        return [Individual(g, r) for g, r in zip(self.genes, self.results)]

    def take(self, idx) -> "Population":
        idx = np.asarray(idx, dtype=int)
        return Population(self.genes[idx].copy(), [self.results[i] for i in idx], self.generation)

    def __add__(self, other: "Population") -> "Population":
        return Population(np.vstack([self.genes, other.genes]), self.results + other.results, self.generation)


def init_population(n_pop: int, dim: int, rng: np.random.Generator) -> Population:
    if n_pop < 4:
        raise ValueError("population needs at least 4 members")
    return Population(rng.random((n_pop, dim)))


class Evaluator:
    """Counts evaluations against a budget and keeps the best feasible points seen.

    ``archive`` holds up to ``archive_size`` feasible points with the lowest
    scalar F, best first; its head is the run elite.
    """

    def __init__(self, problem, archive_size: int = 1):
        self.problem = problem
        self.count = 0
        self.archive_size = max(int(archive_size), 1)
        self.archive = Population(np.empty((0, problem.dim)))

    @property
    def best_result(self) -> EvalResult | None:
        return self.archive.results[0] if len(self.archive) else None

    @property
    def best_genes(self) -> np.ndarray | None:
        return self.archive.genes[0].copy() if len(self.archive) else None

    @property
    def best_F(self) -> float:
        return self.best_result.F if len(self.archive) else np.inf

    def __call__(self, genes: np.ndarray) -> list[EvalResult]:
        genes = np.atleast_2d(genes)
        out = [self.problem.evaluate(g) for g in genes]
        self.count += len(out)
        ok = [i for i, r in enumerate(out) if r.feasible]
        if ok:
            cand = self.archive + Population(genes[ok].copy(), [out[i] for i in ok])
            order = np.argsort(cand.F, kind="stable")[: self.archive_size]
            self.archive = cand.take(order)
        return out

    def fill(self, pop: Population) -> Population:
        pop.results = self(pop.genes)
        return pop


# ordering


def fitness_key(phi: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Indices sorted best first by (violation, scalar F), stable."""
    return np.lexsort((np.arange(len(F)), F, phi))


def better(res_a: EvalResult, res_b: EvalResult) -> bool:
    return (res_a.phi, res_a.F) < (res_b.phi, res_b.F)


def dominance_matrix(objs: np.ndarray) -> np.ndarray:
    """dom[i, j] is True when i Pareto-dominates j (minimisation)."""
    le = np.all(objs[:, None, :] <= objs[None, :, :], axis=-1)
    lt = np.any(objs[:, None, :] < objs[None, :, :], axis=-1)
    return le & lt


def nondominated_fronts(objs: np.ndarray) -> list[np.ndarray]:
    n = len(objs)
    if n == 0:
        return []
    dom = dominance_matrix(objs)
    count = dom.sum(axis=0)
    remaining = np.ones(n, dtype=bool)
    fronts = []
    while remaining.any():
        front = np.flatnonzero(remaining & (count == 0))
        fronts.append(front)
        remaining[front] = False
        count = count - dom[front].sum(axis=0)
    return fronts


def crowding_distance(objs: np.ndarray) -> np.ndarray:
    n, m = objs.shape
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for k in range(m):
        order = np.argsort(objs[:, k], kind="stable")
        col = objs[order, k]
        span = col[-1] - col[0]
        dist[order[0]] = dist[order[-1]] = np.inf
        if span > 0:
            dist[order[1:-1]] += (col[2:] - col[:-2]) / span
    return dist


def selection_order(objs: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Feasible members by (front, -crowding, index), then infeasible by (phi, index)."""
    feas = np.flatnonzero(phi == 0)
    order = []
    for front in nondominated_fronts(objs[feas]):
        idx = feas[front]
        cd = crowding_distance(objs[idx])
        order.extend(idx[np.lexsort((idx, -cd))])
    infeas = np.flatnonzero(phi > 0)
    order.extend(infeas[np.lexsort((infeas, phi[infeas]))])
    return np.asarray(order, dtype=int)


def environmental_selection(pop: Population, n_pop: int) -> Population:
    if len(pop) < n_pop:
        raise ValueError("selection input smaller than the target size")
    keep = selection_order(pop.objectives, pop.phi)[:n_pop]
    out = pop.take(keep)
    out.generation = pop.generation
    return out


def pareto_front(pop: Population) -> list[Individual]:
    phi = pop.phi
    feas = np.flatnonzero(phi == 0)
    if feas.size == 0:
        return []
    first = feas[nondominated_fronts(pop.objectives[feas])[0]]
    return [Individual(pop.genes[i], pop.results[i]) for i in first]


@dataclass(frozen=True)
class PopulationState:
    con: float
    fea: float
    div: float

    def as_array(self) -> np.ndarray:
        return np.array([self.con, self.fea, self.div])


def population_state(pop: Population) -> PopulationState:
    objs, phi = pop.objectives, pop.phi
    chi = len(pop)
    con = float(objs.sum() / chi)
    fea = float(phi.sum() / chi)
    div = float(1.0 / (np.sum(objs.max(axis=0) - objs.min(axis=0)) + EPS_DIV))
    return PopulationState(con, fea, div)


# variation


def _distinct(rng: np.random.Generator, n: int, k: int, exclude: int) -> np.ndarray:
    """k distinct indices from range(n), none equal to ``exclude``."""
    picks = rng.choice(n - 1, size=k, replace=False)
    return picks + (picks >= exclude)


def _binomial(rng, target: np.ndarray, mutant: np.ndarray, cr: float) -> np.ndarray:
    n, d = target.shape
    mask = rng.random((n, d)) < cr
    mask[np.arange(n), rng.integers(0, d, n)] = True
    return np.where(mask, mutant, target)


def _scale_factors(rng, n: int, s: MOEASettings) -> np.ndarray:
    return rng.uniform(s.de_f_min, s.de_f_max, (n, 1))


def de_rand_1(genes, n_off, rng, s: MOEASettings):
    n = len(genes)
    targets = np.arange(n_off) % n
    r = np.array([_distinct(rng, n, 3, t) for t in targets])
    f = _scale_factors(rng, n_off, s)
    mutant = genes[r[:, 0]] + f * (genes[r[:, 1]] - genes[r[:, 2]])
    return _binomial(rng, genes[targets], mutant, s.de_cr)


def de_best_1(genes, n_off, rng, s: MOEASettings, best: np.ndarray):
    n = len(genes)
    targets = np.arange(n_off) % n
    r = np.array([_distinct(rng, n, 2, t) for t in targets])
    f = _scale_factors(rng, n_off, s)
    mutant = best + f * (genes[r[:, 0]] - genes[r[:, 1]])
    return _binomial(rng, genes[targets], mutant, s.de_cr)


def sbx(p1: np.ndarray, p2: np.ndarray, rng, eta: float, prob: float):
    """Simulated binary crossover on [0, 1] boxes (bounded variant)."""
    n, d = p1.shape
    c1, c2 = p1.copy(), p2.copy()
    do = (rng.random((n, 1)) < prob) & (rng.random((n, d)) < 0.5) & (np.abs(p1 - p2) > 1e-14)
    lo, hi = np.minimum(p1, p2), np.maximum(p1, p2)
    gap = np.where(do, hi - lo, 1.0)
    u = rng.random((n, d))

    def spread(beta):
        alpha = 2.0 - beta ** (-(eta + 1))
        return np.where(u <= 1 / alpha, (u * alpha) ** (1 / (eta + 1)), (1 / (2 - u * alpha)) ** (1 / (eta + 1)))

    bq1 = spread(1 + 2 * lo / gap)
    bq2 = spread(1 + 2 * (1 - hi) / gap)
    y1 = 0.5 * (lo + hi - bq1 * (hi - lo))
    y2 = 0.5 * (lo + hi + bq2 * (hi - lo))
    swap = rng.random((n, d)) < 0.5
    y1, y2 = np.where(swap, y2, y1), np.where(swap, y1, y2)
    c1 = np.where(do, y1, c1)
    c2 = np.where(do, y2, c2)
    return np.clip(c1, 0, 1), np.clip(c2, 0, 1)


def polynomial_mutation(x: np.ndarray, rng, eta: float, rate: float | None = None) -> np.ndarray:
    n, d = x.shape
    rate = 1.0 / d if rate is None else rate
    hit = rng.random((n, d)) < rate
    u = rng.random((n, d))
    d1, d2 = x, 1 - x
    p = 1 / (eta + 1)
    left = (2 * u + (1 - 2 * u) * (1 - d1) ** (eta + 1)) ** p - 1
    right = 1 - (2 * (1 - u) + 2 * (u - 0.5) * (1 - d2) ** (eta + 1)) ** p
    delta = np.where(u < 0.5, left, right)
    return np.clip(np.where(hit, x + delta, x), 0, 1)


def sbx_pm(genes, n_off, rng, s: MOEASettings, parents: np.ndarray | None = None):
    """SBX on random (or supplied) parent pairs, then polynomial mutation."""
    n = len(genes)
    n_pairs = (n_off + 1) // 2
    if parents is None:
        parents = np.concatenate([rng.permutation(n) for _ in range(-(-2 * n_pairs // n))])[:2 * n_pairs]
    a, b = genes[parents[0::2]], genes[parents[1::2]]
    c1, c2 = sbx(a, b, rng, s.sbx_eta, s.sbx_prob)
    kids = np.empty((2 * n_pairs, genes.shape[1]))
    kids[0::2], kids[1::2] = c1, c2
    return polynomial_mutation(kids[:n_off], rng, s.pm_eta)


def restart(genes, n_off, rng, s: MOEASettings):
    base = genes[np.arange(n_off) % len(genes)]
    mask = rng.random(base.shape) < s.restart_fraction
    return np.where(mask, rng.random(base.shape), base)


def apply_operator(pop: Population, op_id: int, rng: np.random.Generator, s: MOEASettings,
                   n_off: int | None = None, archive: Population | None = None) -> Population:
    """Offspring genes for one operator.

    Every operator works on a mating pool drawn by binary tournament on
    (violation, F) over the population plus ``archive``, the best feasible
    points found so far in the run. Crowding can evict those points from
    the population itself. DE/best takes the archive head as base vector,
    else the population's best.
    """
    n_off = len(pop) if n_off is None else n_off
    if not 0 <= op_id < len(OPERATORS):
        raise ValueError(f"unknown operator id {op_id}; expected 0..{len(OPERATORS) - 1}")
    cands = pop if archive is None or not len(archive) else pop + archive
    pool = cands.genes[binary_tournament(cands, len(pop), rng)]
    if op_id == 0:
        kids = de_rand_1(pool, n_off, rng, s)
    elif op_id == 1:
        if archive is not None and len(archive):
            best = archive.genes[0]
        else:
            best = pop.genes[int(fitness_key(pop.phi, pop.F)[0])]
        kids = de_best_1(pool, n_off, rng, s, best)
    elif op_id == 2:
        kids = sbx_pm(pool, n_off, rng, s)
    else:
        kids = restart(pool, n_off, rng, s)
    return Population(np.clip(kids, 0.0, 1.0), generation=pop.generation + 1)


# run records


@dataclass(frozen=True)
class LogRow:
    generation: int
    con: float
    fea: float
    div: float
    best_F: float
    op: int | None = None
    reward: float | None = None
    loss: float | None = None


@dataclass
class RunResult:
    algo: str
    seed: int | None
    best_F: float
    best_genes: np.ndarray | None
    best_objectives: np.ndarray | None
    pareto_genes: np.ndarray
    pareto_objectives: np.ndarray
    log: list[LogRow]
    evaluations: int
    wall_clock: float
    population: Population | None = None
    extra: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return bool(np.isfinite(self.best_F))


def finish(algo: str, ev: Evaluator, pop: Population, log: list[LogRow], t0: float, seed=None,
           **extra) -> RunResult:
    front = pareto_front(pop)
    dim = pop.genes.shape[1]
    return RunResult(
        algo=algo, seed=seed, best_F=float(ev.best_F), best_genes=ev.best_genes,
        best_objectives=None if ev.best_result is None else ev.best_result.objectives.copy(),
        pareto_genes=np.array([m.genes for m in front]).reshape(-1, dim),
        pareto_objectives=np.array([m.result.objectives for m in front]).reshape(len(front), -1),
        log=log, evaluations=ev.count, wall_clock=time.perf_counter() - t0, population=pop, extra=extra,
    )


def log_row(gen: int, pop: Population, ev: Evaluator, **kw) -> LogRow:
    st = population_state(pop)
    return LogRow(gen, st.con, st.fea, st.div, float(ev.best_F), **kw)


# GA baseline


def binary_tournament(pop: Population, k: int, rng: np.random.Generator) -> np.ndarray:
    phi, F = pop.phi, pop.F
    a = rng.integers(0, len(pop), k)
    b = rng.integers(0, len(pop), k)
    a_wins = (phi[a] < phi[b]) | ((phi[a] == phi[b]) & (F[a] <= F[b]))
    return np.where(a_wins, a, b)


def run_ga(problem, budget: int, rng: np.random.Generator, s: MOEASettings | None = None, seed=None) -> RunResult:
    s = s or MOEASettings()
    t0 = time.perf_counter()
    ev = Evaluator(problem)
    pop = ev.fill(init_population(s.pop_size, problem.dim, rng))
    log = [log_row(0, pop, ev)]
    gen = 0
    while ev.count < budget:
        gen += 1
        n_off = min(s.pop_size - 1, budget - ev.count)
        parents = binary_tournament(pop, 2 * ((n_off + 1) // 2), rng)
        kids = Population(sbx_pm(pop.genes, n_off, rng, s, parents=parents), generation=gen)
        ev.fill(kids)
        ranked = fitness_key(pop.phi, pop.F)
        # one elite, the offspring, then survivors from the old population if the last batch was short
        nxt = pop.take(ranked[:1]) + kids + pop.take(ranked[1:s.pop_size - n_off])
        pop = nxt
        pop.generation = gen
        log.append(log_row(gen, pop, ev))
    return finish("ga", ev, pop, log, t0, seed)


# IMODE baseline (three DE strategies, adaptive sub-populations, linear size reduction)


def _imode_mutants(genes, order, archive, strategy, idx, rng, s: MOEASettings):
    n = len(genes)
    n_best = max(2, int(round(s.imode_pbest * n)))
    out = np.empty((len(idx), genes.shape[1]))
    f = _scale_factors(rng, len(idx), s)
    pool = genes if archive is None or len(archive) == 0 else np.vstack([genes, archive])
    for row, i in enumerate(idx):
        pbest = genes[order[rng.integers(0, n_best)]]
        r1, r2 = _distinct(rng, n, 2, i)
        x = genes[i]
        if strategy == 0:      # current-to-pbest/1 with archive
            r2 = rng.integers(0, len(pool))
            while r2 in (i, r1):
                r2 = rng.integers(0, len(pool))
            out[row] = x + f[row] * (pbest - x) + f[row] * (genes[r1] - pool[r2])
        elif strategy == 1:    # current-to-pbest/1 without archive
            out[row] = x + f[row] * (pbest - x) + f[row] * (genes[r1] - genes[r2])
        else:                  # rand-to-pbest/1
            out[row] = genes[r1] + f[row] * (pbest - genes[r2])
    return out


def partition_sizes(shares: np.ndarray, n: int) -> np.ndarray:
    """Largest-remainder split of n members by shares; always sums to n."""
    raw = shares / shares.sum() * n
    sizes = np.floor(raw).astype(int)
    for k in np.argsort(-(raw - sizes), kind="stable")[: n - sizes.sum()]:
        sizes[k] += 1
    return sizes


def run_imode(problem, budget: int, rng: np.random.Generator, s: MOEASettings | None = None, seed=None) -> RunResult:
    s = s or MOEASettings()
    t0 = time.perf_counter()
    ev = Evaluator(problem)
    n_init, n_min = s.pop_size, s.imode_n_min
    pop = ev.fill(init_population(n_init, problem.dim, rng))
    span = max(budget - ev.count, 1)
    start = ev.count
    shares = np.full(3, 1 / 3)
    archive = np.empty((0, problem.dim))
    log = [log_row(0, pop, ev)]
    trace = []
    gen = 0
    while ev.count < budget:
        gen += 1
        n = len(pop)
        sizes = partition_sizes(shares, n)
        trace.append((n, tuple(int(v) for v in sizes)))
        strat = np.repeat(np.arange(3), sizes)[rng.permutation(n)]
        order = fitness_key(pop.phi, pop.F)
        n_off = min(n, budget - ev.count)
        idx_all = np.arange(n_off)
        kids = np.empty((n_off, problem.dim))
        for k in range(3):
            idx = idx_all[strat[:n_off] == k]
            if idx.size:
                mut = _imode_mutants(pop.genes, order, archive, k, idx, rng, s)
                kids[idx] = _binomial(rng, pop.genes[idx], mut, s.de_cr)
        kids = np.clip(kids, 0.0, 1.0)
        res = ev(kids)
        wins = np.zeros(3)
        tries = np.zeros(3)
        genes = pop.genes.copy()
        results = list(pop.results)
        losers = []
        for i, r in enumerate(res):
            k = strat[i]
            tries[k] += 1
            if better(r, results[i]):
                wins[k] += 1
                losers.append(genes[i].copy())
                genes[i], results[i] = kids[i], r
        pop = Population(genes, results, gen)
        if losers:
            archive = np.vstack([archive, losers])
        rate = np.divide(wins, tries, out=np.zeros(3), where=tries > 0)
        shares = np.full(3, 1 / 3) if rate.sum() == 0 else np.clip(rate / rate.sum(), 0.1, 0.9)
        # linear population size reduction
        frac = min(1.0, (ev.count - start) / span)
        target = max(n_min, int(round(n_init + (n_min - n_init) * frac)))
        if target < len(pop):
            pop = pop.take(fitness_key(pop.phi, pop.F)[:target])
            pop.generation = gen
        cap = int(round(2.6 * len(pop)))
        if len(archive) > cap:
            archive = archive[rng.choice(len(archive), cap, replace=False)]
        log.append(log_row(gen, pop, ev))
    return finish("imode", ev, pop, log, t0, seed, imode_trace=trace)
