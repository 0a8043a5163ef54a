"""Variance-preserving noise schedule with exact 0 -> 1 endpoints.

The noising rule is ``z_t = sqrt(1 - sigma_t^2) z + sigma_t eps``. Betas
follow the standard linear ramp; the signal coefficients are then
linearly rescaled so the terminal signal-to-noise ratio is exactly zero,
which makes ``t = 0`` return ``z`` and ``t = T`` return ``eps`` bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from draggen.errors import ConfigError, ShapeError


@dataclass(frozen=True)
class NoiseSchedule:
    sigmas: np.ndarray  # (T+1,), monotone, sigma_0 = 0, sigma_T = 1
    signal: np.ndarray  # sqrt(1 - sigma^2), signal_0 = 1, signal_T = 0

    def __post_init__(self):
        s = np.asarray(self.sigmas, dtype=np.float64)
        if s.ndim != 1 or s.size < 2:
            raise ConfigError("schedule needs at least two sigma values")
        if abs(s[0]) > 1e-6 or abs(s[-1] - 1.0) > 1e-6:
            raise ConfigError("sigma must run from 0 to 1")
        if np.any(np.diff(s) < 0):
            raise ConfigError("sigma must be non-decreasing")
        if np.any(s < 0) or np.any(s > 1):
            raise ConfigError("sigma values must stay in [0, 1]")

    @property
    def steps(self) -> int:
        """T, the terminal time index."""
        return len(self.sigmas) - 1

    @classmethod
    def variance_preserving(cls, steps: int = 1000, beta_start: float = 1e-4,
                            beta_end: float = 0.02) -> "NoiseSchedule":
        betas = np.linspace(beta_start, beta_end, steps)
        signal = np.sqrt(np.concatenate([[1.0], np.cumprod(1.0 - betas)]))
        # rescale so the terminal signal is exactly zero (keeps signal_0 = 1)
        terminal = signal[-1]
        signal = (signal - terminal) / (1.0 - terminal)
        sigmas = np.sqrt(np.clip(1.0 - signal**2, 0.0, 1.0))
        sigmas[0], sigmas[-1] = 0.0, 1.0
        signal[0], signal[-1] = 1.0, 0.0
        return cls(sigmas=sigmas, signal=signal)

    def to_json(self) -> dict:
        return {"sigmas": self.sigmas.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "NoiseSchedule":
        sigmas = np.asarray(obj["sigmas"], dtype=np.float64)
        return cls(sigmas=sigmas, signal=np.sqrt(np.clip(1.0 - sigmas**2, 0.0, 1.0)))


def add_noise(schedule: NoiseSchedule, z: np.ndarray, t, eps: np.ndarray) -> np.ndarray:
    """z_t = sqrt(1 - sigma_t^2) z + sigma_t eps (t may be scalar or batch)."""
    z = np.asarray(z)
    eps = np.asarray(eps)
    if z.shape != eps.shape:
        raise ShapeError(f"z {z.shape} and eps {eps.shape} differ")
    t_arr = np.asarray(t)
    if np.any(t_arr < 0) or np.any(t_arr > schedule.steps):
        raise ShapeError(f"t={t} outside 0..{schedule.steps}")
    if t_arr.ndim == 0:
        return schedule.signal[int(t_arr)] * z + schedule.sigmas[int(t_arr)] * eps
    shape = (-1,) + (1,) * (z.ndim - 1)
    sig = schedule.signal[t_arr].reshape(shape)
    noi = schedule.sigmas[t_arr].reshape(shape)
    return sig * z + noi * eps
