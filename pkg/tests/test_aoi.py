import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iscc.aoi import (
    InstabilityError,
    QueueRates,
    SingularRatesError,
    closed_form_aaoi,
    default_warmup,
    exact_aaoi,
    interarrival_moments,
    kappa_star,
    kappa_star_prime,
    rho,
    sample_valid_triples,
    simulate_tandem_aoi,
    upsilon_fixed_point,
    validate_against_des,
    varpi_terms,
)

R123 = QueueRates(1.0, 2.0, 3.0)
rates = st.floats(0.2, 5.0)


def stable_triples():
    return st.tuples(rates, rates, rates).map(lambda t: QueueRates(*t)).filter(
        lambda r: r.stable and abs(r.mu_trans - r.mu_bs) > 0.05)


def test_varpi_examples():
    w1, w2, w3 = varpi_terms(R123)
    assert w1 == pytest.approx(1.5, rel=1e-15)
    assert w2 == pytest.approx(0.4, rel=1e-15)
    assert w3 == pytest.approx(np.sqrt(28) / 2, rel=1e-15)
    assert w3 == pytest.approx(2.645751, abs=1e-6)


def test_varpi_singular():
    with pytest.raises(SingularRatesError):
        varpi_terms(QueueRates(1.0, 1.0, 3.0))


def test_upsilon_example():
    u = upsilon_fixed_point(R123)
    # computed value; it is the one consistent with varpi3 = sqrt(7)
    assert u == pytest.approx(0.118083, abs=1e-6)
    assert 3.0 * (1 - u) == pytest.approx(varpi_terms(R123)[2], abs=1e-9)


def test_upsilon_is_a_fixed_point():
    u = upsilon_fixed_point(R123)
    assert abs(u - kappa_star(3.0 * (1 - u), 1.0, 2.0)) < 1e-12


def test_upsilon_unstable():
    with pytest.raises(InstabilityError):
        upsilon_fixed_point(QueueRates(1.0, 2.0, 0.5))


@settings(max_examples=100, deadline=None)
@given(stable_triples())
def test_varpi3_equals_mu_uav_one_minus_upsilon(r):
    assert abs(varpi_terms(r)[2] - r.mu_uav * (1 - upsilon_fixed_point(r))) < 1e-9


@given(rates, rates)
def test_kappa_at_zero_is_one(mb, mt):
    assert kappa_star(0.0, mb, mt) == 1.0


@given(rates, rates, st.floats(0, 50), st.floats(1e-3, 10))
def test_kappa_strictly_decreasing(mb, mt, s, ds):
    assert kappa_star(s + ds, mb, mt) < kappa_star(s, mb, mt)


def test_kappa_matches_difference_form():
    mb, mt, s = 0.7, 1.9, 0.35
    diff_form = mt * mb / (mt - mb) * (1 / (mb + s) - 1 / (mt + s))
    assert kappa_star(s, mb, mt) == pytest.approx(diff_form, rel=1e-13)


def test_kappa_prime_finite_difference():
    h = 1e-6
    fd = (kappa_star(0.8 + h, 1.2, 0.6) - kappa_star(0.8 - h, 1.2, 0.6)) / (2 * h)
    assert kappa_star_prime(0.8, 1.2, 0.6) == pytest.approx(fd, rel=1e-7)


def test_interarrival_moments_example():
    eb, eb2, ebb = interarrival_moments(1.0, 2.0)
    assert (eb, eb2, ebb) == pytest.approx((1.5, 3.5, 2.25))


def test_interarrival_moments_against_samples(rng):
    b = rng.exponential(1 / 0.8, 1_000_000) + rng.exponential(1 / 2.5, 1_000_000)
    eb, eb2, ebb = interarrival_moments(0.8, 2.5)
    assert np.mean(b) == pytest.approx(eb, rel=0.01)
    assert np.mean(b * b) == pytest.approx(eb2, rel=0.01)
    assert np.mean(b[1:] * b[:-1]) == pytest.approx(ebb, rel=0.01)


@pytest.mark.parametrize("k", [0.5, 2.0, 10.0])
@pytest.mark.parametrize("f", [closed_form_aaoi, exact_aaoi])
def test_rate_scaling_law(f, k):
    assert f(R123.scaled(k)) == pytest.approx(f(R123) / k, rel=1e-9)


def test_closed_form_singular():
    with pytest.raises(SingularRatesError):
        closed_form_aaoi(QueueRates(2.0, 2.0, 3.0))


def test_closed_form_frozen_value():
    # the reference expression, evaluated verbatim at (1, 2, 3)
    assert closed_form_aaoi(R123) == pytest.approx(3.1353614508231122, rel=1e-12)


def test_exact_matches_simulation_at_123(rng):
    des = simulate_tandem_aoi(R123, 1_000_000, rng).aaoi
    assert abs(exact_aaoi(R123) - des) / des < 0.02


@pytest.mark.xfail(strict=True, reason="reference closed form is 3.2% above the simulation at (1,2,3); see notes")
def test_closed_form_matches_simulation_at_123(rng):
    des = simulate_tandem_aoi(R123, 1_000_000, rng).aaoi
    assert abs(closed_form_aaoi(R123) - des) / des < 0.02


def test_exact_decreasing_in_mu_uav():
    for mb, mt in [(1, 2), (2, 1), (0.5, 3), (4, 0.3)]:
        lam = mb * mt / (mb + mt)
        v = [exact_aaoi(QueueRates(mb, mt, m)) for m in np.linspace(lam * 1.05, 6, 60)]
        assert np.all(np.diff(v) < 0)


@pytest.mark.xfail(strict=True, reason="reference closed form is not monotone in mu_UAV at (1, 2, .); see notes")
def test_closed_form_decreasing_in_mu_uav():
    v = [closed_form_aaoi(QueueRates(1, 2, m)) for m in np.linspace(0.7, 6, 60)]
    assert np.all(np.diff(v) < 0)


def test_simulation_deterministic():
    a = simulate_tandem_aoi(R123, 5000, np.random.default_rng(7))
    b = simulate_tandem_aoi(R123, 5000, np.random.default_rng(7))
    assert np.array_equal(a.t_done, b.t_done) and a.aaoi == b.aaoi


def test_simulation_trace_invariants():
    tr = simulate_tandem_aoi(QueueRates(0.9, 1.7, 1.1), 20_000, np.random.default_rng(3))
    assert np.all(tr.b < tr.d) and np.all(tr.d < tr.t) and np.all(tr.t <= tr.t_done)
    assert np.allclose(tr.b[1:], tr.t[:-1])
    assert np.all(np.diff(tr.t_done) > 0)  # FCFS
    # relay completion respects service start max(arrival, previous completion)
    start = np.maximum(tr.t[1:], tr.t_done[:-1])
    assert np.all(tr.t_done[1:] > start)


def test_simulation_mean_interarrival(rng):
    tr = simulate_tandem_aoi(QueueRates(1.0, 2.0, 3.0), 1_000_000, rng)
    assert np.mean(np.diff(tr.b)) == pytest.approx(1.5, abs=0.01)


def test_lindley_against_loop():
    """Replay the simulator's draws through an explicit event loop."""
    r, n = QueueRates(1.0, 2.0, 1.4), 3000
    tr = simulate_tandem_aoi(r, n, np.random.default_rng(17))
    g = np.random.default_rng(17)
    o = g.exponential(1 / r.mu_bs, n)
    y = g.exponential(1 / r.mu_trans, n)
    se = g.exponential(1 / r.mu_uav, n)
    clock, free, area, last_gen, last_done = 0.0, 0.0, 0.0, None, None
    done = np.empty(n)
    for i in range(n):
        gen = clock
        arrive = gen + o[i] + y[i]
        clock = arrive
        free = max(arrive, free) + se[i]
        done[i] = free
    assert np.allclose(done, tr.t_done, rtol=1e-12)
    w = tr.warmup
    for i in range(w, n):
        last_gen, last_done = tr.b[i - 1], done[i - 1]
        area += 0.5 * ((done[i] - last_gen) ** 2 - (last_done - last_gen) ** 2)
    assert area / (done[-1] - done[w - 1]) == pytest.approx(tr.aaoi, rel=1e-9)


def test_simulation_stability_check(rng):
    simulate_tandem_aoi(QueueRates(1.0, 2.0, 1.4), 2000, rng)
    with pytest.raises(InstabilityError):
        simulate_tandem_aoi(QueueRates(1.0, 2.0, 0.5), 2000, rng)


def test_simulation_minimum_packets(rng):
    with pytest.raises(ValueError):
        simulate_tandem_aoi(R123, 999, rng)


def test_default_warmup():
    assert default_warmup(1_000_000) == 100_000
    assert default_warmup(5000) == 1000
    assert default_warmup(1000) == 500


def test_sampled_triples_satisfy_both_stability_notions(rng):
    for r in sample_valid_triples(50, rng):
        assert 0 < rho(r) < 1 and r.stable and abs(r.mu_trans - r.mu_bs) > 0.05
        assert all(0.2 <= x <= 5 for x in (r.mu_bs, r.mu_trans, r.mu_uav))


def test_simulation_scaling(rng):
    a = simulate_tandem_aoi(R123, 400_000, np.random.default_rng(1)).aaoi
    b = simulate_tandem_aoi(R123.scaled(2.0), 400_000, np.random.default_rng(2)).aaoi
    assert b == pytest.approx(a / 2, rel=0.02)


@pytest.mark.slow
def test_exact_form_against_simulation_on_random_triples():
    rng = np.random.default_rng(99)
    checks = validate_against_des(sample_valid_triples(10, rng), "exact", 1_000_000, rng)
    assert max(c.rel_err for c in checks) < 0.02
