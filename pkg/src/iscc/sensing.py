"""Transmit beampattern and matching error for a uniform linear array."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MODES = ("rank_one", "isotropic")
LAMBDA_MODES = ("fixed", "least_squares")


def steering_vector(theta, n: int, spacing: float = 0.5) -> np.ndarray:
    """a_k(theta) = exp(j 2 pi k spacing sin theta). Vectorised over theta (last axis = k)."""
    k = np.arange(n)
    phase = 2.0 * np.pi * spacing * np.multiply.outer(np.sin(theta), k)
    return np.exp(1j * phase)


@dataclass(frozen=True)
class AngleGrid:
    angles: np.ndarray
    desired: np.ndarray
    lam: float

    def __post_init__(self):
        if self.angles.size < 1:
            raise ValueError("grid needs at least one angle")
        if np.any(np.diff(self.angles) <= 0):
            raise ValueError("grid angles must be strictly increasing")

    @property
    def size(self) -> int:
        return self.angles.size


def uniform_angles(points: int = 181) -> np.ndarray:
    return np.linspace(-np.pi / 2, np.pi / 2, points)


def sensing_covariance(p_sens: float, n_bs: int, mode: str = "rank_one", theta0: float = 0.0,
                       spacing: float = 0.5) -> np.ndarray:
    if p_sens < 0:
        raise ValueError("sensing power must be non-negative")
    if mode == "isotropic":
        return (p_sens / n_bs) * np.eye(n_bs, dtype=complex)
    if mode == "rank_one":
        a = steering_vector(theta0, n_bs, spacing)
        return (p_sens / n_bs) * np.outer(a, np.conj(a))
    raise ValueError(f"unknown sensing mode {mode!r}; expected one of {MODES}")


def beampattern(r: np.ndarray, theta, spacing: float = 0.5) -> np.ndarray:
    a = steering_vector(theta, r.shape[0], spacing)
    return np.real(np.einsum("...i,ij,...j->...", np.conj(a), r, a))


def desired_pattern(angles, theta0: float, n_bs: int, spacing: float = 0.5) -> np.ndarray:
    a = steering_vector(angles, n_bs, spacing)
    a0 = steering_vector(theta0, n_bs, spacing)
    return np.abs(np.conj(a) @ a0) ** 2 / n_bs**2


def beampattern_error(r: np.ndarray, grid: AngleGrid, spacing: float = 0.5) -> float:
    b = beampattern(r, grid.angles, spacing)
    return float(np.mean(np.abs(grid.lam * grid.desired - b) ** 2))


def least_squares_lambda(desired: np.ndarray, pattern: np.ndarray) -> float:
    return float(np.sum(desired * pattern) / np.sum(desired**2))


@dataclass(frozen=True)
class SensingModel:
    """Precomputed grid for repeated RB_error evaluations at one array size."""

    n_bs: int
    p_sum: float
    theta0: float = 0.0
    points: int = 181
    spacing: float = 0.5
    mode: str = "rank_one"
    lambda_mode: str = "fixed"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown sensing mode {self.mode!r}")
        if self.lambda_mode not in LAMBDA_MODES:
            raise ValueError(f"unknown lambda mode {self.lambda_mode!r}")
        angles = uniform_angles(self.points)
        d = desired_pattern(angles, self.theta0, self.n_bs, self.spacing)
        # beampattern of the unit-power covariance; the pattern is linear in P_sens
        unit = beampattern(sensing_covariance(1.0, self.n_bs, self.mode, self.theta0, self.spacing),
                           angles, self.spacing)
        object.__setattr__(self, "_angles", angles)
        object.__setattr__(self, "_desired", d)
        object.__setattr__(self, "_unit", unit)
        # RB(p) = mean((lam d - p u)^2) expands into three grid sums
        object.__setattr__(self, "_dd", float(np.mean(d * d)))
        object.__setattr__(self, "_du", float(np.mean(d * unit)))
        object.__setattr__(self, "_uu", float(np.mean(unit * unit)))

    def grid(self, p_sens: float | None = None) -> AngleGrid:
        if self.lambda_mode == "fixed":
            lam = self.p_sum * self.n_bs
        else:
            lam = least_squares_lambda(self._desired, (p_sens or 0.0) * self._unit)
        return AngleGrid(self._angles, self._desired, lam)

    def error(self, p_sens: float) -> float:
        if self.lambda_mode == "fixed":
            lam = self.p_sum * self.n_bs
            return max(0.0, lam * lam * self._dd - 2 * lam * p_sens * self._du + p_sens * p_sens * self._uu)
        # least squares lambda = p du/dd leaves the residual p^2 (uu - du^2/dd)
        return max(0.0, p_sens * p_sens * (self._uu - self._du**2 / self._dd))
