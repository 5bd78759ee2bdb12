"""Monte-Carlo user, eavesdropper and secrecy rates.

All expectations in the SINRs are power independent, so they are estimated
once per channel ensemble (``ChannelStats``) and any power split is then
evaluated in closed form.  The ensemble is the common-random-number stream
shared by every candidate an optimiser evaluates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from functools import cached_property

import numpy as np

from .channel import (
    InvalidParameterError,
    NoNullSpaceError,
    PilotSpec,
    SingularChannelError,
    draw_channel,
    gram_inverse,
    mmse_estimate,
)

CHUNK = 128


@dataclass(frozen=True)
class NoiseSpec:
    """Noise variances (not standard deviations)."""

    uav: float
    user: float
    eave: float
    z: float

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise InvalidParameterError(f"noise variance {f.name} must be positive")


@dataclass(frozen=True)
class LinkSpec:
    """What the channel ensemble depends on: array sizes, gains and pilots."""

    n_bs: int
    n_uav: int
    n_eave: int
    n_user: int
    gain_bs_uav: float = 1.0
    gain_uav_user: float = 1.0
    gain_bs_eave: float = 1.0
    gain_uav_eave: float = 1.0
    pilot_uav: PilotSpec = PilotSpec(15, 1.0)
    pilot_user: PilotSpec = PilotSpec(4, 1.0)

    def check(self):
        if self.n_user > min(self.n_uav, self.n_bs):
            raise SingularChannelError(f"ZF needs N_user <= min(N_UAV, N_BS), got {self.n_user}")
        if self.n_bs <= self.n_user:
            raise NoNullSpaceError("AN shaping needs N_BS > N_user")


@dataclass(frozen=True)
class RateBreakdown:
    gamma_user: float
    gamma_eave1: float
    gamma_eave2: float
    gamma_eave: float
    gamma_secure: float
    p_interf: tuple
    p_j: tuple
    prelog: float
    beta: float


def prelog_factor(t_c_uav: float, t_c_bs: float, t_uav: float, t_bs: float) -> float:
    num = min(t_c_uav - t_uav, t_c_bs - t_bs)
    if num <= 0:
        raise InvalidParameterError("coherence intervals must exceed the pilot durations")
    return num / (t_c_uav + t_c_bs)


def secrecy_from_parts(gamma_user, gamma_eave1, gamma_eave2):
    return np.maximum(0.0, gamma_user - 0.5 * (gamma_eave1 + gamma_eave2))


def _sq(x, axes):
    return np.sum(np.abs(x) ** 2, axis=axes)


@dataclass(frozen=True)
class ChannelStats:
    """Ensemble means entering every rate, one entry per user index.

    Naming: g = n_l M w_l is the effective user gain; u the inter-user
    leakage at user l; a the AN at user l; r = ||n_l||^2 for the forwarded
    relay noise; e_mw, e_mv the relay input energies for beta; q*, z* the
    eavesdropper counterparts on the direct and relayed hop, summed over
    all eavesdropper antennas.
    """

    mean_g: np.ndarray
    var_g: np.ndarray
    u: np.ndarray
    a: np.ndarray
    r: np.ndarray
    q_sig: np.ndarray
    q_iui: np.ndarray
    q_an: float
    z_sig: np.ndarray
    z_iui: np.ndarray
    z_an: float
    z_noise: float
    e_mw: float
    e_mv: float
    alpha: float
    n_samples: int

    def beta(self, p_uav: float, p_com: float, p_an: float, noise: NoiseSpec, n_uav: int) -> float:
        denom = p_com * self.e_mw + p_an * noise.z * self.e_mv + n_uav * noise.uav
        return math.sqrt(p_uav / denom)

    @cached_property
    def _users(self) -> tuple:
        return tuple(
            dict(g2=abs(complex(self.mean_g[l])) ** 2, var_g=float(self.var_g[l]), u=float(self.u[l]),
                 a=float(self.a[l]), r=float(self.r[l]), q_sig=float(self.q_sig[l]),
                 q_iui=float(self.q_iui[l]), z_sig=float(self.z_sig[l]), z_iui=float(self.z_iui[l]))
            for l in range(self.mean_g.size))

    def rates(self, p_com: float, p_an: float, noise: NoiseSpec, p_uav: float, n_uav: int, prelog: float,
              average_users: bool = False) -> RateBreakdown:
        """Closed-form rates for one power split (log base 2)."""
        p_an = max(p_an, 0.0)
        b2 = self.beta(p_uav, p_com, p_an, noise, n_uav) ** 2
        users = self._users if average_users else self._users[:1]
        parts = [self._user_rates(s, b2, p_com, p_an, noise, prelog) for s in users]
        if len(parts) == 1:
            g_user, g_e1, g_e2, interf, pj = parts[0]
        else:
            g_user, g_e1, g_e2 = (float(np.mean([p[i] for p in parts])) for i in range(3))
            interf, pj = (tuple(float(v) for v in np.mean([p[i] for p in parts], axis=0)) for i in (3, 4))
        return RateBreakdown(gamma_user=g_user, gamma_eave1=g_e1, gamma_eave2=g_e2,
                             gamma_eave=0.5 * (g_e1 + g_e2), gamma_secure=max(0.0, g_user - 0.5 * (g_e1 + g_e2)),
                             p_interf=interf, p_j=pj, prelog=prelog, beta=math.sqrt(b2))

    def _user_rates(self, s: dict, b2: float, p_com: float, p_an: float, noise: NoiseSpec, prelog: float):
        interf = (b2 * p_com * s["var_g"], b2 * p_com * s["u"], b2 * noise.z * p_an * s["a"], b2 * noise.uav * s["r"])
        sinr_u = b2 * p_com * s["g2"] / (sum(interf) + noise.user)
        sinr_e1 = p_com * s["q_sig"] / (p_com * s["q_iui"] + noise.z * p_an * self.q_an + noise.eave)
        pj = (b2 * p_com * s["z_iui"], b2 * noise.z * p_an * self.z_an, b2 * noise.uav * self.z_noise)
        sinr_e2 = b2 * p_com * s["z_sig"] / (sum(pj) + noise.eave)
        g_user = prelog * math.log2(1.0 + sinr_u)
        g_e1 = math.log2(1.0 + sinr_e1)
        g_e2 = math.log2(1.0 + sinr_e2)
        return g_user, g_e1, g_e2, interf, pj


def channel_stats(link: LinkSpec, n_samples: int, rng: np.random.Generator) -> ChannelStats:
    """Estimate every power-independent expectation from ``n_samples`` joint draws.

    W and V are accumulated unnormalised; alpha and the AN trace scale are
    ensemble means themselves, so they are applied once at the end. Each
    channel and each estimate draws from its own substream, so changing one
    array size leaves the other links' draws untouched.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    link.check()
    B, U, E, K = link.n_bs, link.n_uav, link.n_eave, link.n_user
    acc = {k: 0.0 for k in ("g", "g2", "u", "a", "r", "q_sig", "q_iui", "q_an", "z_sig", "z_iui",
                            "z_an", "z_noise", "e_mw", "e_mv", "tr_g", "tr_v")}
    r_m, r_n, r_q, r_z, r_mh, r_nh = rng.spawn(6)
    done = 0
    while done < n_samples:
        c = min(CHUNK, n_samples - done)
        m = draw_channel(U, B, link.gain_bs_uav, r_m, batch=c)
        n = draw_channel(K, U, link.gain_uav_user, r_n, batch=c)
        q = draw_channel(E, B, link.gain_bs_eave, r_q, batch=c)
        z = draw_channel(E, U, link.gain_uav_eave, r_z, batch=c)
        m_hat = mmse_estimate(m, link.gain_bs_uav, link.pilot_uav, r_mh)
        n_hat = mmse_estimate(n, link.gain_uav_user, link.pilot_user, r_nh)

        h = n_hat @ m_hat
        hh = np.conj(np.swapaxes(h, -1, -2))
        ginv = gram_inverse(h)
        w = hh @ ginv                                   # (c, B, K), alpha = 1
        v = np.eye(B)[:, :U] - hh @ (ginv @ h[..., :U])  # (c, B, U), unit trace scale

        mw, mv = m @ w, m @ v
        nmw = n @ mw                                    # (c, K, K): [l, j] = n_l M w_j
        g = np.einsum("skk->sk", nmw)
        acc["g"] = acc["g"] + g.sum(axis=0)
        acc["g2"] = acc["g2"] + _sq(g, ()).sum(axis=0)
        acc["u"] = acc["u"] + (_sq(nmw, -1) - _sq(g, ())).sum(axis=0)
        acc["a"] = acc["a"] + _sq(n @ mv, -1).sum(axis=0)
        acc["r"] = acc["r"] + _sq(n, -1).sum(axis=0)
        qw = _sq(q @ w, -2).sum(axis=0)                 # per user column, summed over eave rows
        acc["q_sig"] = acc["q_sig"] + qw
        acc["q_iui"] = acc["q_iui"] + (qw.sum() - qw)
        acc["q_an"] += _sq(q @ v, (-2, -1)).sum()
        zw = _sq(z @ mw, -2).sum(axis=0)
        acc["z_sig"] = acc["z_sig"] + zw
        acc["z_iui"] = acc["z_iui"] + (zw.sum() - zw)
        acc["z_an"] += _sq(z @ mv, (-2, -1)).sum()
        acc["z_noise"] += _sq(z, (-2, -1)).sum()
        acc["e_mw"] += _sq(mw, (-2, -1)).sum()
        acc["e_mv"] += _sq(mv, (-2, -1)).sum()
        acc["tr_g"] += np.real(np.trace(ginv, axis1=-2, axis2=-1)).sum()
        acc["tr_v"] += _sq(v, (-2, -1)).sum()
        done += c

    mean = {k: val / n_samples for k, val in acc.items()}
    a2 = 1.0 / mean["tr_g"]                              # alpha^2
    vs = 1.0 / mean["tr_v"]                              # AN trace normalisation
    mean_g = mean["g"] * np.sqrt(a2)
    var_g = np.maximum(mean["g2"] * a2 - np.abs(mean_g) ** 2, 0.0)
    return ChannelStats(
        mean_g=mean_g, var_g=var_g, u=mean["u"] * a2, a=mean["a"] * vs, r=mean["r"],
        q_sig=mean["q_sig"] * a2, q_iui=mean["q_iui"] * a2, q_an=float(mean["q_an"] * vs),
        z_sig=mean["z_sig"] * a2, z_iui=mean["z_iui"] * a2, z_an=float(mean["z_an"] * vs),
        z_noise=float(mean["z_noise"]), e_mw=float(mean["e_mw"] * a2), e_mv=float(mean["e_mv"] * vs),
        alpha=float(np.sqrt(a2)), n_samples=n_samples,
    )


def estimate_rates(cfg, n_samples: int, rng: np.random.Generator, p_com: float | None = None,
                   p_an: float | None = None) -> RateBreakdown:
    """Rates for a SystemConfig at one power split (default: P_sum split in thirds)."""
    third = cfg.power.p_sum / 3
    stats = channel_stats(cfg.link_spec(), n_samples, rng)
    return cfg.rates_from_stats(stats, third if p_com is None else p_com, third if p_an is None else p_an)
