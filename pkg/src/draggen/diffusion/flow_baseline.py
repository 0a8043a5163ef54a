"""Blurred sparse-flow drag conditioning (prior-work ablation baseline).

A single 2-channel flow image holds the displacement of each drag at the
cell its source falls in; drags landing in the same cell overwrite by
slot order (the interference this baseline is meant to exhibit). The
image is blurred with a unit-sum Gaussian and later passed through small
learned conv stacks inside the backbone.
"""

from __future__ import annotations

import numpy as np

from draggen.drags import DragSet


def gaussian_kernel1d(sigma: float, radius: int | None = None) -> np.ndarray:
    if radius is None:
        radius = max(1, int(round(4.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _blur_axis(arr: np.ndarray, k: np.ndarray, axis: int) -> np.ndarray:
    """Same-size 1D convolution along ``axis`` with zero padding."""
    r = len(k) // 2
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (r, r)
    padded = np.pad(arr, pad)
    out = np.zeros_like(arr)
    n = arr.shape[axis]
    for i, kv in enumerate(k):
        sl = [slice(None)] * arr.ndim
        sl[axis] = slice(i, i + n)
        out += kv * padded[tuple(sl)]
    return out


def gaussian_blur2d(image: np.ndarray, sigma: float) -> np.ndarray:
    """Separable same-size Gaussian blur with zero padding, per channel."""
    k = gaussian_kernel1d(sigma)
    return _blur_axis(_blur_axis(image, k, 1), k, 2)


def baseline_flow_encoding(
    drags: DragSet,
    latent_size: tuple[int, int],
    image_size: tuple[int, int],
    sigma: float = 2.0,
) -> np.ndarray:
    """(2, h, w) blurred sparse flow; displacements in latent-cell units."""
    h, w = latent_size
    H, W = image_size
    flow = np.zeros((2, h, w), dtype=np.float64)
    for d in drags.drags:
        ch = min(max(int(np.floor(d.source[0] * h / H)), 0), h - 1)
        cw = min(max(int(np.floor(d.source[1] * w / W)), 0), w - 1)
        flow[0, ch, cw] = (d.termination[0] - d.source[0]) * h / H
        flow[1, ch, cw] = (d.termination[1] - d.source[1]) * w / W
    return gaussian_blur2d(flow, sigma)
