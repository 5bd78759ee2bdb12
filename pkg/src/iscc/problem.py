"""The constrained four-objective ISCC problem over (P_com, P_sens, mu_BS, mu_UAV)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aoi import AAOI_FORMULAS, InstabilityError, QueueRates, SingularRatesError
from .config import SystemConfig
from .secrecy import ChannelStats, RateBreakdown, channel_stats
from .sensing import SensingModel

DIM = 4


@dataclass(frozen=True)
class DecisionVector:
    p_com: float
    p_sens: float
    mu_bs: float
    mu_uav: float
    p_sum: float
    clipped: bool = False

    @property
    def p_an(self) -> float:
        return self.p_sum - self.p_com - self.p_sens


@dataclass(frozen=True)
class EvalResult:
    objectives: np.ndarray
    F: float
    phi: float
    feasible: bool
    rates: RateBreakdown | None = None
    decision: DecisionVector | None = None
    aaoi: float | None = None


def _boxes(cfg: SystemConfig):
    b, p = cfg.bounds, cfg.power.p_sum
    lo = np.array([0.0, 0.0, b.mu_min, b.mu_min])
    hi = np.array([p, p, b.mu_max, b.mu_max])
    # the power intervals are open, so pull them inside by the margin
    pad = np.array([b.margin, b.margin, 0.0, 0.0]) * (hi - lo)
    return lo + pad, hi - pad


def decode(genes, cfg: SystemConfig) -> DecisionVector:
    g = np.asarray(genes, dtype=float)
    if g.shape != (DIM,):
        raise ValueError(f"expected {DIM} genes, got shape {g.shape}")
    gc = np.clip(g, 0.0, 1.0)
    lo, hi = _boxes(cfg)
    x = lo + gc * (hi - lo)
    return DecisionVector(*map(float, x), p_sum=cfg.power.p_sum, clipped=bool(np.any(gc != g)))


def encode(x: DecisionVector, cfg: SystemConfig) -> np.ndarray:
    lo, hi = _boxes(cfg)
    return (np.array([x.p_com, x.p_sens, x.mu_bs, x.mu_uav]) - lo) / (hi - lo)


def rho(mu_bs: float, mu_trans: float, mu_uav: float) -> float:
    return mu_trans * (mu_bs - mu_uav) / (mu_bs * mu_uav)


def violation(x: DecisionVector, cfg: SystemConfig, gamma_secure: float) -> float:
    p = cfg.power.p_sum
    r = rho(x.mu_bs, gamma_secure, x.mu_uav)
    terms = (
        -x.p_an,
        -x.p_com, x.p_com - p,
        -x.p_sens, x.p_sens - p,
        -r, r - 1.0,
        cfg.constraints.gamma_th - gamma_secure,
    )
    return float(sum(max(0.0, t) for t in terms))


def scalarize(objectives) -> float:
    return float(np.sum(objectives))


@dataclass(frozen=True)
class EvalContext:
    """Everything an evaluation needs beyond the decision: the shared channel ensemble."""

    cfg: SystemConfig
    stats: ChannelStats
    sensing: SensingModel

    @classmethod
    def build(cls, cfg: SystemConfig, rng: np.random.Generator, n_samples: int | None = None) -> "EvalContext":
        n = cfg.mc.samples if n_samples is None else n_samples
        return cls(cfg, channel_stats(cfg.link_spec(), n, rng), cfg.sensing_model())


def _aaoi(x: DecisionVector, mu_trans: float, cfg: SystemConfig) -> tuple[DecisionVector, float | None]:
    if mu_trans <= 0:
        return x, None
    guard = 1e-6 * max(x.mu_bs, mu_trans)
    if abs(mu_trans - x.mu_bs) <= guard:
        x = DecisionVector(x.p_com, x.p_sens, x.mu_bs + guard, x.mu_uav, x.p_sum, x.clipped)
    try:
        val = AAOI_FORMULAS[cfg.aoi.formula](QueueRates(x.mu_bs, mu_trans, x.mu_uav))
    except (InstabilityError, SingularRatesError):
        return x, None
    return x, (val if np.isfinite(val) else None)


def evaluate(x: DecisionVector, cfg: SystemConfig, ctx: EvalContext) -> EvalResult:
    w = cfg.weights
    f1 = ctx.sensing.error(x.p_sens)
    rates = cfg.rates_from_stats(ctx.stats, x.p_com, x.p_an)
    mu_trans = rates.gamma_secure
    x, aaoi = _aaoi(x, mu_trans, cfg)
    f3 = cfg.aoi.penalty if aaoi is None else w.aoi * aaoi
    obj = np.array([f1, -w.secrecy * mu_trans, f3, w.energy * x.mu_uav**3])
    phi = violation(x, cfg, mu_trans)
    return EvalResult(objectives=obj, F=scalarize(obj), phi=phi, feasible=phi == 0.0,
                      rates=rates, decision=x, aaoi=aaoi)


class ISCCProblem:
    """Gene-space view of the problem for the optimisers."""

    dim = DIM

    def __init__(self, cfg: SystemConfig, rng: np.random.Generator, n_samples: int | None = None):
        self.cfg = cfg
        self.ctx = EvalContext.build(cfg, rng, n_samples)

    def evaluate(self, genes) -> EvalResult:
        return evaluate(decode(genes, self.cfg), self.cfg, self.ctx)


class SphereBudgetProblem:
    """Synthetic check problem with a known optimum.

    f_k = (x_k - c)^2 subject to sum(x) <= b. With 4c > b the optimum sits
    on the budget plane at x_k = b/4, so F* = (4c - b)^2 / 4.
    """

    dim = DIM

    def __init__(self, c: float = 0.6, b: float = 1.6):
        self.c, self.b = c, b

    @property
    def optimum(self) -> float:
        return (DIM * self.c - self.b) ** 2 / DIM

    def evaluate(self, genes) -> EvalResult:
        x = np.clip(np.asarray(genes, dtype=float), 0.0, 1.0)
        obj = (x - self.c) ** 2
        phi = max(0.0, float(x.sum()) - self.b)
        return EvalResult(objectives=obj, F=scalarize(obj), phi=phi, feasible=phi == 0.0)
