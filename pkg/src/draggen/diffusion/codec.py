"""Fixed latent codec: space-to-depth plus an orthonormal channel projection.

``space_to_depth`` is lossless and exactly invertible. The channel
projection to 4 latent channels uses a basis with orthonormal rows, so
``encode(decode(z)) == z`` for every latent (up to float rounding) while
``decode(encode(x))`` is the orthogonal projection of the image onto the
fitted subspace. The basis always contains the three constant-color
directions, so images that are constant within each codec cell (the
dominant case for flat-colored parts) reconstruct exactly; the remaining
directions are the top principal components of the fit set. Latents are
scaled per channel to unit variance on the fit set. The codec is fit
once and then frozen; it carries no gradients.
"""

from __future__ import annotations

import numpy as np

from draggen.errors import ResolutionError, ShapeError


def space_to_depth(image: np.ndarray, factor: int) -> np.ndarray:
    """(H, W, C) -> (C * factor^2, H/factor, W/factor), lossless."""
    h, w, c = image.shape
    if h % factor or w % factor:
        raise ResolutionError(f"{h}x{w} not divisible by factor {factor}")
    hl, wl = h // factor, w // factor
    x = image.reshape(hl, factor, wl, factor, c)
    return x.transpose(1, 3, 4, 0, 2).reshape(factor * factor * c, hl, wl)


def depth_to_space(stack: np.ndarray, factor: int, channels: int = 3) -> np.ndarray:
    """Exact inverse of :func:`space_to_depth`."""
    d, hl, wl = stack.shape
    if d != factor * factor * channels:
        raise ShapeError(f"depth {d} != {factor}^2 * {channels}")
    x = stack.reshape(factor, factor, channels, hl, wl)
    return x.transpose(3, 0, 4, 1, 2).reshape(hl * factor, wl * factor, channels)


class LatentCodec:
    def __init__(self, basis: np.ndarray, scale: np.ndarray, factor: int = 8,
                 channels: int = 3):
        self.basis = np.asarray(basis, dtype=np.float64)  # (latent_c, factor^2 * c)
        self.scale = np.asarray(scale, dtype=np.float64)  # (latent_c,)
        self.factor = int(factor)
        self.channels = int(channels)

    @property
    def latent_channels(self) -> int:
        return self.basis.shape[0]

    @classmethod
    def fit(cls, images, factor: int = 8, latent_channels: int = 4,
            max_cells: int = 100_000, seed: int = 0) -> "LatentCodec":
        """Least-squares fit of the projection basis on sample images."""
        rng = np.random.default_rng(seed)
        cells = []
        for img in images:
            stack = space_to_depth(np.asarray(img, dtype=np.float64), factor)
            cells.append(stack.reshape(stack.shape[0], -1).T)
        x = np.concatenate(cells, axis=0)
        if x.shape[0] > max_cells:
            x = x[rng.choice(x.shape[0], size=max_cells, replace=False)]

        d = factor * factor * 3
        # constant-color directions; stack order is (fy, fx, color), so a
        # flat color occupies every third entry (orthonormal by construction)
        const = np.zeros((3, d))
        for ch in range(3):
            const[ch, ch::3] = 1.0
        const /= np.linalg.norm(const, axis=1, keepdims=True)

        # principal directions of the residual
        resid = x - (x @ const.T) @ const
        n_extra = latent_channels - 3
        if n_extra > 0:
            _, _, vt = np.linalg.svd(resid - resid.mean(axis=0), full_matrices=False)
            extra = vt[:n_extra]
            # re-orthonormalize against the constant block
            extra = extra - (extra @ const.T) @ const
            extra /= np.linalg.norm(extra, axis=1, keepdims=True)
            basis = np.concatenate([const, extra], axis=0)
        else:
            basis = const[:latent_channels]

        proj = x @ basis.T
        std = proj.std(axis=0)
        scale = 1.0 / np.maximum(std, 1e-6)
        return cls(basis=basis, scale=scale, factor=factor)

    def encode(self, image: np.ndarray) -> np.ndarray:
        """(H, W, 3) image -> (latent_c, H/f, W/f) latent."""
        stack = space_to_depth(np.asarray(image, dtype=np.float64), self.factor)
        d, hl, wl = stack.shape
        z = self.basis @ stack.reshape(d, -1)
        z *= self.scale[:, None]
        return z.reshape(self.latent_channels, hl, wl)

    def decode(self, z: np.ndarray) -> np.ndarray:
        """(latent_c, h, w) latent -> (H, W, 3) image (clipped to [0, 1])."""
        c, hl, wl = z.shape
        if c != self.latent_channels:
            raise ShapeError(f"latent has {c} channels, codec expects {self.latent_channels}")
        flat = (np.asarray(z, dtype=np.float64) / self.scale[:, None, None]).reshape(c, -1)
        stack = (self.basis.T @ flat).reshape(-1, hl, wl)
        return depth_to_space(stack, self.factor)

    def decode_clipped(self, z: np.ndarray) -> np.ndarray:
        return np.clip(self.decode(z), 0.0, 1.0)

    def encode_batch(self, images: np.ndarray) -> np.ndarray:
        return np.stack([self.encode(img) for img in images])
