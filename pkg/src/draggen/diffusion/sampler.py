"""Deterministic 50-step sampler with classifier-free guidance.

Guidance combines conditional and unconditional noise predictions as
``eps = eps_uncond + w * (eps_cond - eps_uncond)`` at every step. At
weight 1 the unconditional pass is skipped so the output is bitwise
identical to conditional-only sampling. The terminal step carries no
signal (the schedule's terminal SNR is exactly zero), so the clean
estimate there is defined as zero.
"""

from __future__ import annotations

import numpy as np

from draggen.diffusion.checkpoint import Checkpoint
from draggen.drags import DragSet
from draggen.errors import ConfigError


def sampling_timesteps(total: int, steps: int) -> np.ndarray:
    """Descending timestep ladder from ``total`` to 0 with ~steps rungs."""
    ts = np.round(np.linspace(total, 0, steps + 1)).astype(int)
    return np.unique(ts)[::-1]


def sample(
    checkpoint: Checkpoint,
    y_image: np.ndarray,
    drags: DragSet | None,
    steps: int = 50,
    guidance: float = 5.0,
    seed: int = 0,
) -> np.ndarray:
    """Draw one image conditioned on ``(y_image, drags)``; deterministic per seed."""
    model = checkpoint.model
    codec = checkpoint.codec
    schedule = checkpoint.schedule
    config = model.config
    H, W = y_image.shape[:2]
    if (H, W) != (config.image_size, config.image_size):
        raise ConfigError(
            f"input is {H}x{W}, checkpoint expects {config.image_size}"
        )

    z_y = codec.encode(y_image)
    rng = np.random.default_rng([seed])
    z = rng.standard_normal(z_y.shape)

    ts = sampling_timesteps(schedule.steps, steps)
    for hi, lo in zip(ts[:-1], ts[1:]):
        eps_c = model.denoise(z, int(hi), y_image, z_y, drags)
        if guidance == 1.0:
            eps = eps_c
        else:
            eps_u = model.denoise(z, int(hi), y_image, z_y, None)
            eps = eps_u + guidance * (eps_c - eps_u)
        sig_hi = schedule.signal[hi]
        if sig_hi == 0.0:
            z0 = np.zeros_like(z)
        else:
            z0 = (z - schedule.sigmas[hi] * eps) / sig_hi
        z = schedule.signal[lo] * z0 + schedule.sigmas[lo] * eps
    return codec.decode_clipped(z)
