"""Quick built-in property checks, runnable without the test suite."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import aoi, dqn
from .channel import PilotSpec, an_shaper, draw_channel, mmse_estimate, zf_precoder
from .config import default_config
from .sensing import beampattern, sensing_covariance, uniform_angles


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str

    def __post_init__(self):
        object.__setattr__(self, "ok", bool(self.ok))


def check_precoders(rng, draws: int = 20) -> Check:
    cfg = default_config()
    d = cfg.dims
    pilot = PilotSpec(cfg.pilot.t_uav, cfg.power.p_uav)
    worst_w = worst_v = 0.0
    for _ in range(draws):
        m = draw_channel(d.n_uav, d.n_bs, 1.0, rng)
        n = draw_channel(d.n_user, d.n_uav, 1.0, rng)
        h = n @ mmse_estimate(m, 1.0, pilot, rng)
        alpha = 0.7
        w = zf_precoder(h, alpha)
        v = an_shaper(h, d.n_uav)
        eye = alpha * np.eye(d.n_user)
        worst_w = max(worst_w, np.linalg.norm(h @ w - eye) / np.linalg.norm(eye))
        worst_v = max(worst_v, np.linalg.norm(h @ v) / np.linalg.norm(v))
    ok = worst_w < 1e-8 and worst_v < 1e-8
    return Check("precoder identities", ok, f"ZF err {worst_w:.1e}, AN leak {worst_v:.1e}")


def check_sensing() -> Check:
    angles = uniform_angles(181)
    flat = beampattern(sensing_covariance(1.3, 16, "isotropic"), angles)
    model = default_config().sensing_model()
    errs = [model.error(p) for p in np.linspace(0, 2, 21)]
    ok = np.max(np.abs(flat - 1.3)) < 1e-10 and all(b <= a for a, b in zip(errs, errs[1:]))
    return Check("sensing sanity", ok, f"isotropic dev {np.max(np.abs(flat - 1.3)):.1e}")


def check_aoi_identities(rng) -> Check:
    worst = 0.0
    for r in aoi.sample_valid_triples(20, rng):
        u = aoi.upsilon_fixed_point(r)
        worst = max(worst, abs(aoi.varpi_terms(r)[2] - r.mu_uav * (1 - u)))
    ok = worst < 1e-9 and aoi.kappa_star(0.0, 1.3, 0.4) == 1.0
    return Check("AoI identities", ok, f"max |varpi3 - mu(1-u)| {worst:.1e}")


def check_aoi_des(rng, n_packets: int = 200_000) -> Check:
    res = aoi.validate_against_des(aoi.sample_valid_triples(2, rng), "exact", n_packets, rng)
    worst = max(c.rel_err for c in res)
    return Check("exact AAoI vs simulation", worst < 0.03, f"max rel err {worst:.2%} at {n_packets} packets")


def check_gradients(rng) -> Check:
    net = dqn.QNetwork((3, 4, 4), rng)
    x = rng.standard_normal((6, 3))
    err = dqn.gradient_check(net, x, rng.integers(0, 4, 6), rng.standard_normal(6))
    return Check("backprop vs finite differences", err < 1e-4, f"max rel err {err:.1e}")


def check_tabular_td(rng) -> Check:
    mdp = dqn.ChainMDP(4)
    q_star = dqn.value_iteration(mdp, 0.9)
    q = dqn.tabular_q_learning(mdp, 20_000, 0.2, 0.9, rng)
    gap = float(np.max(np.abs(q.table - q_star)))
    return Check("tabular TD vs value iteration", gap < 0.05, f"sup-norm gap {gap:.1e}")


def run_all(seed: int = 0) -> list[tuple[Check, float]]:
    rng = np.random.default_rng(seed)
    checks = [lambda: check_precoders(rng), check_sensing, lambda: check_aoi_identities(rng),
              lambda: check_aoi_des(rng), lambda: check_gradients(rng), lambda: check_tabular_td(rng)]
    out = []
    for c in checks:
        t0 = time.perf_counter()
        out.append((c(), time.perf_counter() - t0))
    return out
