"""2D similarity camera mapping world (x, y) to image (row, col)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from draggen.errors import InvalidCameraError


@dataclass(frozen=True)
class Camera2D:
    """Similarity view: rotate about ``center``, scale to pixels, center in image.

    ``scale`` is pixels per world unit. Rows grow downward, so world +y
    maps to decreasing row.
    """

    scale: float
    rotation: float  # radians, view rotation about the look-at center
    center: tuple[float, float]  # world point mapped to the image center
    resolution: tuple[int, int]  # (H, W)

    def __post_init__(self):
        if not np.isfinite(self.scale) or self.scale <= 0.0:
            raise InvalidCameraError(f"camera scale must be positive, got {self.scale}")

    def world_to_pixel(self, points: np.ndarray) -> np.ndarray:
        """(n, 2) world points -> (n, 2) continuous (row, col) coordinates."""
        p = np.atleast_2d(np.asarray(points, dtype=np.float64)) - np.asarray(self.center)
        c, s = np.cos(-self.rotation), np.sin(-self.rotation)
        x = (c * p[:, 0] - s * p[:, 1]) * self.scale
        y = (s * p[:, 0] + c * p[:, 1]) * self.scale
        H, W = self.resolution
        out = np.stack([H / 2.0 - y, W / 2.0 + x], axis=1)
        return out if np.asarray(points).ndim == 2 else out[0]

    def pixel_to_world(self, pixels: np.ndarray) -> np.ndarray:
        """(n, 2) continuous (row, col) -> (n, 2) world points."""
        q = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
        H, W = self.resolution
        x = (q[:, 1] - W / 2.0) / self.scale
        y = (H / 2.0 - q[:, 0]) / self.scale
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        out = np.stack(
            [c * x - s * y + self.center[0], s * x + c * y + self.center[1]], axis=1
        )
        return out if np.asarray(pixels).ndim == 2 else out[0]

    def to_json(self) -> dict:
        return {
            "scale": self.scale,
            "rotation": self.rotation,
            "center": list(self.center),
            "resolution": list(self.resolution),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Camera2D":
        return cls(
            scale=float(obj["scale"]),
            rotation=float(obj["rotation"]),
            center=tuple(obj["center"]),
            resolution=tuple(int(v) for v in obj["resolution"]),
        )


def sample_camera(
    rng: np.random.Generator,
    object_center: tuple[float, float],
    object_extent: float,
    resolution: tuple[int, int],
) -> Camera2D:
    """Random view: scale in [0.8, 1.2] x base, rotation within +/-15 deg,
    small translation jitter that keeps the object in frame."""
    H, W = resolution
    base = 0.8 * min(H, W) / max(object_extent, 1e-6)
    scale = base * rng.uniform(0.8, 1.2)
    rotation = np.deg2rad(rng.uniform(-15.0, 15.0))
    margin = 0.05 * object_extent
    center = (
        object_center[0] + rng.uniform(-margin, margin),
        object_center[1] + rng.uniform(-margin, margin),
    )
    return Camera2D(scale=scale, rotation=rotation, center=center, resolution=(H, W))
