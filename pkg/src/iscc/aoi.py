"""Average age of information for the compute -> transmit -> relay-compute pipeline.

Two analytic forms are provided:

* ``closed_form_aaoi`` evaluates the reference closed form term by term.
* ``exact_aaoi`` is re-derived from the same GI/M/1 building blocks. It
  differs from the reference one in the waiting-time term and is the one
  that agrees with the discrete-event oracle ``simulate_tandem_aoi``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SingularRatesError(ValueError):
    pass


class InstabilityError(ValueError):
    pass


@dataclass(frozen=True)
class QueueRates:
    mu_bs: float
    mu_trans: float
    mu_uav: float

    def __post_init__(self):
        if not (self.mu_bs > 0 and self.mu_trans > 0 and self.mu_uav > 0):
            raise ValueError(f"all rates must be positive, got {self}")

    @property
    def arrival_rate(self) -> float:
        return self.mu_bs * self.mu_trans / (self.mu_bs + self.mu_trans)

    @property
    def stable(self) -> bool:
        return self.arrival_rate < self.mu_uav

    @property
    def guard(self) -> float:
        return 1e-6 * max(self.mu_bs, self.mu_trans)

    def scaled(self, k: float) -> "QueueRates":
        return QueueRates(k * self.mu_bs, k * self.mu_trans, k * self.mu_uav)


def _check_singular(r: QueueRates):
    if abs(r.mu_trans - r.mu_bs) <= r.guard:
        raise SingularRatesError(f"mu_trans = mu_BS within {r.guard:.3g}")


def _check_stable(r: QueueRates):
    if not r.stable:
        raise InstabilityError(f"arrival rate {r.arrival_rate:.4g} >= mu_UAV {r.mu_uav:.4g}")


def kappa_star(s, mu_bs: float, mu_trans: float):
    """Laplace-Stieltjes transform of B = Exp(mu_bs) + Exp(mu_trans).

    Written in product form, which is finite at mu_bs = mu_trans.
    """
    return mu_bs * mu_trans / ((mu_bs + s) * (mu_trans + s))


def kappa_star_prime(s, mu_bs: float, mu_trans: float):
    return -mu_bs * mu_trans * (2 * s + mu_bs + mu_trans) / ((mu_bs + s) ** 2 * (mu_trans + s) ** 2)


def varpi_terms(r: QueueRates) -> tuple[float, float, float]:
    _check_singular(r)
    mb, mt, mu = r.mu_bs, r.mu_trans, r.mu_uav
    w1 = mu * mt / ((mt - mb) * (mb + mu))
    w2 = mb * mt / ((mt - mb) * (mt + mu))
    w3 = 0.5 * (mu - (mb + mt) + np.sqrt((mu - mt + mb) ** 2 + 4 * mt * mu))
    return float(w1), float(w2), float(w3)


def _varpi3(r: QueueRates) -> float:
    mb, mt, mu = r.mu_bs, r.mu_trans, r.mu_uav
    return float(0.5 * (mu - (mb + mt) + np.sqrt((mu - mt + mb) ** 2 + 4 * mt * mu)))


def upsilon_fixed_point(r: QueueRates, damping: float = 0.7, tol: float = 1e-12, max_iter: int = 10_000_000) -> float:
    """Smallest root of u = kappa*(mu_UAV (1 - u)) in (0, 1).

    Iterating from 0 climbs monotonically to that root because the map is
    increasing; u = 1 is always a spurious root.
    """
    _check_stable(r)
    mb, mt, mu = r.mu_bs, r.mu_trans, r.mu_uav
    u = 0.0
    for _ in range(max_iter):
        nxt = (1 - damping) * u + damping * kappa_star(mu * (1 - u), mb, mt)
        if abs(nxt - u) < tol * damping:
            u = nxt
            break
        u = nxt
    resid = abs(u - kappa_star(mu * (1 - u), mb, mt))
    if not (0 < u < 1) or resid > 1e-10:
        raise InstabilityError(f"fixed point did not converge inside (0,1): u={u}, residual={resid:.2e}")
    return float(u)


def interarrival_moments(mu_bs: float, mu_trans: float) -> tuple[float, float, float]:
    eb = 1 / mu_bs + 1 / mu_trans
    eb2 = 2 / mu_bs**2 + 2 / mu_trans**2 + 2 / (mu_bs * mu_trans)
    return eb, eb2, eb * eb


def closed_form_aaoi(r: QueueRates) -> float:
    """Reference closed form, evaluated verbatim (see module docstring)."""
    w1, w2, w3 = varpi_terms(r)
    mb, mt, mu = r.mu_bs, r.mu_trans, r.mu_uav
    inner = (1 / (mb * mu) + 1 / (mt * mu) + 2 / mb**2 + 2 / mt**2 + 3 / (mb * mt)
             + mb * mt / (mt - mb) * (1 / (w3 + mb) ** 2 - 1 / (w3 + mt) ** 2)
             * (1 / w3 - w1 / (w3 + mb) + w2 / (w3 + mt)))
    return float(1 / mu + (w1 - 1) / mb - (1 + w2) / mt + r.arrival_rate * inner)


def exact_aaoi(r: QueueRates) -> float:
    """AAoI = (E[B^2]/2 + E[B]^2 + E[T_i B_{i-1}]) / E[B].

    With omega = mu_UAV (1 - u) the stationary sojourn time is Exp(omega),
    so given B_{i-1} = x the waiting time of packet i has mean
    k/mu + (1/omega - k/(mu - omega)) exp(-omega x), k = kappa*(mu).
    Averaging against x gives the -kappa*'(omega) term.
    """
    _check_stable(r)
    mb, mt, mu = r.mu_bs, r.mu_trans, r.mu_uav
    omega = _varpi3(r)
    eb, eb2, ebb = interarrival_moments(mb, mt)
    k = kappa_star(mu, mb, mt)
    e_wait_b = (k / mu) * eb + (1 / omega - k / (mu - omega)) * (-kappa_star_prime(omega, mb, mt))
    e_sojourn_b = e_wait_b + eb / mu
    return float((0.5 * eb2 + ebb + e_sojourn_b) / eb)


AAOI_FORMULAS = {"exact": exact_aaoi, "theorem": closed_form_aaoi}


@dataclass(frozen=True)
class AoITrace:
    b: np.ndarray        # generation
    d: np.ndarray        # BS compute done
    t: np.ndarray        # arrival at the relay queue
    t_done: np.ndarray   # relay compute done (delivery)
    warmup: int
    aaoi: float

    @property
    def n(self) -> int:
        return self.b.size


def default_warmup(n: int) -> int:
    return max(n // 10, min(1000, n // 2))


def simulate_tandem_aoi(r: QueueRates, n_packets: int, rng: np.random.Generator,
                        warmup: int | None = None) -> AoITrace:
    """Zero-wait generation, FCFS exponential relay server, sawtooth-area AAoI."""
    if n_packets < 1000:
        raise ValueError("need at least 1000 packets")
    _check_stable(r)
    o = rng.exponential(1 / r.mu_bs, n_packets)
    y = rng.exponential(1 / r.mu_trans, n_packets)
    se = rng.exponential(1 / r.mu_uav, n_packets)
    t = np.cumsum(o + y)
    b = t - (o + y)
    d = b + o
    # Lindley recursion in closed form: t'_i = S_i + max_{k<=i} (t_k - S_{k-1})
    s = np.cumsum(se)
    s_prev = np.concatenate(([0.0], s[:-1]))
    t_done = s + np.maximum.accumulate(t - s_prev)
    w = default_warmup(n_packets) if warmup is None else warmup
    if not 1 <= w < n_packets - 1:
        raise ValueError("warmup must leave at least two packets")
    # between deliveries i-1 and i the age is (time - b_{i-1})
    lo, hi, gen = t_done[w - 1:-1], t_done[w:], b[w - 1:-1]
    area = 0.5 * np.sum((hi - gen) ** 2 - (lo - gen) ** 2)
    aaoi = area / (t_done[-1] - t_done[w - 1])
    return AoITrace(b=b, d=d, t=t, t_done=t_done, warmup=w, aaoi=float(aaoi))


def rho(r: QueueRates) -> float:
    """Load in the optimisation constraint; not the GI/M/1 utilisation."""
    return r.mu_trans * (r.mu_bs - r.mu_uav) / (r.mu_bs * r.mu_uav)


def sample_valid_triples(k: int, rng: np.random.Generator, lo: float = 0.2, hi: float = 5.0,
                         min_gap: float = 0.05) -> list[QueueRates]:
    """Log-uniform rate triples with 0 < rho < 1, a stable relay queue and |mu_trans - mu_BS| > min_gap."""
    out = []
    while len(out) < k:
        mb, mt, mu = np.exp(rng.uniform(np.log(lo), np.log(hi), 3))
        r = QueueRates(float(mb), float(mt), float(mu))
        if 0 < rho(r) < 1 and r.stable and abs(mt - mb) > min_gap:
            out.append(r)
    return out


@dataclass(frozen=True)
class AoICheck:
    rates: QueueRates
    analytic: float
    simulated: float

    @property
    def rel_err(self) -> float:
        return abs(self.analytic - self.simulated) / self.simulated


def validate_against_des(triples, formula: str, n_packets: int, rng: np.random.Generator) -> list[AoICheck]:
    f = AAOI_FORMULAS[formula]
    return [AoICheck(r, f(r), simulate_tandem_aoi(r, n_packets, rng).aaoi) for r in triples]
