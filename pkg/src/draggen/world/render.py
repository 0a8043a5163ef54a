"""Painter's-order rasterizer for articulated trees.

Parts render back-to-front in tree order (parents first), so children
such as handles paint over the part they are mounted on. Per-part
visibility masks fall out of the part-index map, which makes them
disjoint by construction and their union the foreground.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from draggen.errors import InvalidInputError
from draggen.kernels import fill_quads
from draggen.world.camera import Camera2D
from draggen.world.kinematics import pose_parts

BACKGROUND_RGB = (0.92, 0.92, 0.92)


@dataclass
class RenderedFrame:
    image: np.ndarray  # (H, W, 3) float64 in [0, 1]
    index_map: np.ndarray  # (H, W) int32, -1 = background
    camera: Camera2D
    colors: np.ndarray  # (P, 3) part colors actually used (pre-brightness)
    brightness: float

    def mask(self, part_index: int) -> np.ndarray:
        return self.index_map == part_index

    @property
    def foreground(self) -> np.ndarray:
        return self.index_map >= 0


def coverage_masks(tree, state: dict, camera: Camera2D) -> np.ndarray:
    """(P, H, W) full-coverage (occlusion-ignoring) mask per part.

    Unlike the index map, these can overlap where parts overlap; a
    stationary part's coverage is identical across frames of a
    fixed-camera animation even when moving parts slide over it.
    """
    H, W = camera.resolution
    quads = part_quads_pixel(tree, state, camera)
    masks = np.empty((len(tree.parts), H, W), dtype=bool)
    for i in range(len(tree.parts)):
        masks[i] = fill_quads(quads[i : i + 1], np.array([0]), H, W) == 0
    return masks


def part_quads_pixel(tree, state: dict, camera: Camera2D) -> np.ndarray:
    """(P, 4, 2) pixel-space corner quads in tree (draw) order."""
    poses = pose_parts(tree, state)
    quads = np.empty((len(tree.parts), 4, 2))
    for i, part in enumerate(tree.parts):
        world = poses[part.id].apply(part.corners())
        quads[i] = camera.world_to_pixel(world)
    return quads


def render(
    tree,
    state: dict,
    colors: np.ndarray,
    camera: Camera2D,
    brightness: float = 1.0,
    background: tuple = BACKGROUND_RGB,
) -> RenderedFrame:
    """Rasterize the tree at ``state`` through ``camera``.

    ``colors`` holds one RGB row per part, aligned with tree order.
    Brightness scales part colors and the background alike (global
    lighting jitter) before clipping to [0, 1].
    """
    H, W = camera.resolution
    if H < 16 or W < 16:
        raise InvalidInputError(f"resolution must be at least 16x16, got {H}x{W}")
    colors = np.asarray(colors, dtype=np.float64)
    if colors.shape != (len(tree.parts), 3):
        raise InvalidInputError(
            f"need {len(tree.parts)} part colors, got shape {colors.shape}"
        )
    quads = part_quads_pixel(tree, state, camera)
    index_map = fill_quads(quads, np.arange(len(tree.parts)), H, W)

    palette = np.concatenate([[background], colors], axis=0)  # row 0 = background
    image = palette[index_map + 1] * brightness
    np.clip(image, 0.0, 1.0, out=image)
    return RenderedFrame(
        image=image, index_map=index_map, camera=camera, colors=colors,
        brightness=brightness,
    )
