"""Drags and their multi-resolution conditioning encoding.

A drag is an ordered pair of continuous pixel coordinates ``(source,
termination)`` in (row, col) convention with the origin at the top-left.
The source must lie inside the image; the termination may not.

Each drag slot occupies four channels of the encoding: two for the source
point and two for the termination point. A point is encoded on an
``(h, w)`` grid as a tensor of all negative ones except at the cell the
point falls in, which holds the fractional offset of the point within
that cell. Points that map outside the grid are clamped per axis to the
nearest cell inside; their offset values are taken relative to the clamped
cell and may therefore fall outside ``[0, 1]``. Unused slots are all-zero,
which keeps "no drag" distinguishable from a drag sitting exactly on a
cell corner (offset ``(0, 0)`` against a ``-1`` background).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from draggen.errors import CapacityError, InvalidInputError

DEFAULT_CAPACITY = 5


@dataclass(frozen=True)
class Drag:
    """One drag: continuous (row, col) source and termination coordinates."""

    source: tuple[float, float]
    termination: tuple[float, float]

    def __post_init__(self):
        for name, p in (("source", self.source), ("termination", self.termination)):
            if len(p) != 2 or not all(math.isfinite(float(c)) for c in p):
                raise InvalidInputError(f"drag {name} must be two finite numbers, got {p!r}")
        object.__setattr__(self, "source", (float(self.source[0]), float(self.source[1])))
        object.__setattr__(
            self, "termination", (float(self.termination[0]), float(self.termination[1]))
        )

    def to_json(self) -> dict:
        return {"source": list(self.source), "termination": list(self.termination)}

    @classmethod
    def from_json(cls, obj: dict) -> "Drag":
        return cls(tuple(obj["source"]), tuple(obj["termination"]))


@dataclass(frozen=True)
class DragSet:
    """Ordered drags with a fixed slot capacity N (slot index = channel block)."""

    drags: tuple[Drag, ...] = ()
    capacity: int = DEFAULT_CAPACITY

    def __post_init__(self):
        object.__setattr__(self, "drags", tuple(self.drags))
        if self.capacity < 1:
            raise InvalidInputError(f"capacity must be >= 1, got {self.capacity}")
        if len(self.drags) > self.capacity:
            raise CapacityError(
                f"{len(self.drags)} drags exceed capacity N={self.capacity}"
            )

    def __len__(self) -> int:
        return len(self.drags)

    def to_json(self) -> dict:
        return {"capacity": self.capacity, "drags": [d.to_json() for d in self.drags]}

    @classmethod
    def from_json(cls, obj: dict) -> "DragSet":
        return cls(
            tuple(Drag.from_json(d) for d in obj.get("drags", [])),
            capacity=int(obj.get("capacity", DEFAULT_CAPACITY)),
        )


def validate_source_inside(drag: Drag, image_size: tuple[int, int]) -> None:
    """Raise if the drag source lies outside the image domain."""
    h, w = image_size
    uh, uw = drag.source
    if not (0.0 <= uh < h and 0.0 <= uw < w):
        raise InvalidInputError(
            f"drag source {drag.source} outside {h}x{w} image (termination may be outside)"
        )


def encode_point(
    p: tuple[float, float],
    image_size: tuple[int, int],
    latent_size: tuple[int, int],
) -> np.ndarray:
    """Encode one continuous pixel coordinate on an (h, w) grid.

    Returns a (2, h, w) float64 array: -1 everywhere except the cell the
    point maps to, which holds the (row, col) fractional offsets.
    """
    H, W = int(image_size[0]), int(image_size[1])
    h, w = int(latent_size[0]), int(latent_size[1])
    if min(H, W, h, w) < 1:
        raise InvalidInputError(f"sizes must be >= 1, got image {image_size}, latent {latent_size}")
    ph, pw = float(p[0]), float(p[1])
    if not (math.isfinite(ph) and math.isfinite(pw)):
        raise InvalidInputError(f"non-finite coordinate {p!r}")

    gh = ph * h / H
    gw = pw * w / W
    ch = min(max(int(math.floor(gh)), 0), h - 1)
    cw = min(max(int(math.floor(gw)), 0), w - 1)

    grid = np.full((2, h, w), -1.0, dtype=np.float64)
    grid[0, ch, cw] = gh - ch
    grid[1, ch, cw] = gw - cw
    return grid


def encode_drags(
    drags: DragSet,
    latent_size: tuple[int, int],
    image_size: tuple[int, int],
) -> np.ndarray:
    """Encode a drag set as a (4N, h, w) conditioning tensor.

    Slot k fills channels [4k, 4k+4): source point then termination point,
    two channels each. Slots beyond ``len(drags)`` stay all-zero padding.
    """
    n = drags.capacity
    h, w = int(latent_size[0]), int(latent_size[1])
    if min(h, w) < 1:
        raise InvalidInputError(f"latent size must be >= 1x1, got {latent_size}")
    out = np.zeros((4 * n, h, w), dtype=np.float64)
    for k, d in enumerate(drags.drags):
        out[4 * k : 4 * k + 2] = encode_point(d.source, image_size, latent_size)
        out[4 * k + 2 : 4 * k + 4] = encode_point(d.termination, image_size, latent_size)
    return out


def encoding_pyramid(
    drags: DragSet,
    resolutions: list[tuple[int, int]],
    image_size: tuple[int, int],
) -> list[np.ndarray]:
    """Encode the same drag set at every listed (h, w) resolution."""
    if not resolutions:
        raise InvalidInputError("resolution list must be non-empty")
    return [encode_drags(drags, res, image_size) for res in resolutions]
