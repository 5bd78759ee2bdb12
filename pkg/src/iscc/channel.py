"""Rayleigh channels, MMSE estimation, ZF precoding and AN shaping.

Every function accepts an optional leading batch axis so Monte-Carlo
ensembles can be processed with one einsum instead of a Python loop.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

COND_LIMIT = 1e12


class InvalidParameterError(ValueError):
    pass


class SingularChannelError(np.linalg.LinAlgError):
    pass


class NoNullSpaceError(ValueError):
    pass


@dataclass(frozen=True)
class PathLossSpec:
    dis: float
    dis_ref: float
    exponent: float

    def __post_init__(self):
        if self.dis <= 0 or self.dis_ref <= 0:
            raise InvalidParameterError(f"distances must be positive, got dis={self.dis}, dis_ref={self.dis_ref}")
        if self.exponent < 0:
            raise InvalidParameterError(f"path-loss exponent must be >= 0, got {self.exponent}")


@dataclass(frozen=True)
class PilotSpec:
    duration: float
    power: float

    @property
    def snr(self) -> float:
        return self.duration * self.power


def pathloss_gain(spec: PathLossSpec) -> float:
    """Large-scale gain (dis/dis_ref)^(-L_e)."""
    return float((spec.dis / spec.dis_ref) ** (-spec.exponent))


def _as_gain_column(gains, rows: int) -> np.ndarray:
    g = np.asarray(gains, dtype=float)
    if g.ndim == 0:
        g = np.full(rows, float(g))
    if g.shape != (rows,):
        raise ValueError(f"gain vector has shape {g.shape}, expected ({rows},)")
    if np.any(g < 0):
        raise InvalidParameterError("path-loss gains must be non-negative")
    return g[:, None]


def standard_complex_normal(shape, rng: np.random.Generator) -> np.ndarray:
    # unit-variance circularly-symmetric entries
    z = rng.standard_normal((*shape, 2))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)


def draw_channel(rows: int, cols: int, gains, rng: np.random.Generator, batch: int | None = None) -> np.ndarray:
    """C = F^{1/2} C~ with row-wise gains F = diag(gains)."""
    g = _as_gain_column(gains, rows)
    shape = (rows, cols) if batch is None else (batch, rows, cols)
    return np.sqrt(g) * standard_complex_normal(shape, rng)


def error_stats(gain: float, pilot: PilotSpec) -> float:
    """Per-entry variance of the MMSE estimate, eps^2 / (eps + 1/(T P))."""
    if pilot.snr <= 0:
        raise InvalidParameterError("pilot duration*power must be positive")
    return gain * gain / (gain + 1.0 / pilot.snr)


def mmse_estimate(c_true: np.ndarray, gains, pilot: PilotSpec, rng: np.random.Generator) -> np.ndarray:
    """F (F + I/(TP))^{-1} (C + A/sqrt(TP)) with fresh pilot noise A."""
    if pilot.snr <= 0:
        raise InvalidParameterError("pilot duration*power must be positive")
    rows = c_true.shape[-2]
    g = _as_gain_column(gains, rows)
    shrink = g / (g + 1.0 / pilot.snr)
    noise = standard_complex_normal(c_true.shape, rng)
    return shrink * (c_true + noise / np.sqrt(pilot.snr))


def gram_inverse(h: np.ndarray) -> np.ndarray:
    """(H H^H)^{-1}, rejecting ill-conditioned draws."""
    gram = h @ np.conj(np.swapaxes(h, -1, -2))
    cond = np.linalg.cond(gram)
    if np.any(~np.isfinite(cond)) or np.any(cond > COND_LIMIT):
        raise SingularChannelError(f"effective channel is rank deficient (cond={np.max(cond):.3g})")
    return np.linalg.inv(gram)


def zf_precoder(nm_hat: np.ndarray, alpha: float) -> np.ndarray:
    if nm_hat.shape[-2] > nm_hat.shape[-1]:
        raise SingularChannelError("ZF needs at least as many columns as rows")
    return alpha * np.conj(np.swapaxes(nm_hat, -1, -2)) @ gram_inverse(nm_hat)


def _inverse_gram_trace(nm_hat: np.ndarray) -> np.ndarray:
    return np.real(np.trace(gram_inverse(nm_hat), axis1=-2, axis2=-1))


def normalization_alpha(draws) -> float:
    """alpha = 1/sqrt(E Tr((H H^H)^{-1})), the mean taken over the supplied draws."""
    arr = np.asarray(draws)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.shape[0] < 1:
        raise ValueError("need at least one draw")
    return float(1.0 / np.sqrt(np.mean(_inverse_gram_trace(arr))))


def null_projector(nm_hat: np.ndarray) -> np.ndarray:
    """D = I - H^H (H H^H)^{-1} H, of size N_BS x N_BS."""
    n_user, n_bs = nm_hat.shape[-2:]
    if n_bs <= n_user:
        raise NoNullSpaceError(f"N_BS={n_bs} leaves no null space for {n_user} users")
    hh = np.conj(np.swapaxes(nm_hat, -1, -2))
    return np.eye(n_bs) - hh @ gram_inverse(nm_hat) @ nm_hat


def an_shaper(nm_hat: np.ndarray, n_uav: int, trace_scale: float | None = None) -> np.ndarray:
    """First n_uav columns of the null projector, normalised to unit trace.

    ``trace_scale`` is the expected Tr(V V^H) of the unnormalised shaper; by
    default it is taken from the draw itself, so Tr(V V^H) = 1 per draw.
    """
    v = null_projector(nm_hat)[..., :n_uav]
    if trace_scale is None:
        trace_scale = np.sum(np.abs(v) ** 2, axis=(-2, -1), keepdims=True)
    return v / np.sqrt(trace_scale)


def amplification_factor(p_uav: float, p_com: float, p_an: float, sigma_z2: float, sigma_uav2: float,
                         n_uav: int, e_mw: float, e_mv: float) -> float:
    """Relay gain beta for given E||M W||_F^2 and E||M V||_F^2."""
    if p_uav < 0 or sigma_uav2 <= 0:
        raise InvalidParameterError("need P_UAV >= 0 and sigma_UAV > 0")
    denom = p_com * e_mw + p_an * sigma_z2 * e_mv + n_uav * sigma_uav2
    return float(np.sqrt(p_uav / denom))
