"""Ground-truth drag extraction from articulated motion.

For a moving part, a subpart of its subtree is drawn uniformly, then a
visible surface point of that subpart is drawn with probability
proportional to its screen-space displacement between the two states.
The drag runs from the point's projection in the start state to its
projection in the end state.
"""

from __future__ import annotations

import numpy as np

from draggen.drags import Drag
from draggen.errors import OcclusionError
from draggen.world.camera import Camera2D
from draggen.world.kinematics import pose_parts

RESAMPLE_ATTEMPTS = 8


def sample_part_drag(
    tree,
    part_id: str,
    state_start: dict,
    state_end: dict,
    camera: Camera2D,
    index_map_start: np.ndarray,
    rng: np.random.Generator,
    attempts: int = RESAMPLE_ATTEMPTS,
):
    """Sample one drag for ``part_id``.

    Visibility means the subpart owns the pixel in the start frame's
    index map. Returns (drag, subpart_id, local_point) so callers can
    track the same physical point through other frames.
    """
    poses_start = pose_parts(tree, state_start)
    poses_end = pose_parts(tree, state_end)
    subtree = tree.subtree_ids(part_id)

    for _ in range(attempts):
        sub = subtree[int(rng.integers(len(subtree)))]
        sub_idx = tree.part_index(sub)
        pix = np.argwhere(index_map_start == sub_idx)
        if pix.shape[0] == 0:
            continue
        centers = pix + 0.5
        world = camera.pixel_to_world(centers)
        local = poses_start[sub].inverse().apply(world)
        end_pix = camera.world_to_pixel(poses_end[sub].apply(local))
        disp = np.linalg.norm(end_pix - centers, axis=1)
        total = float(disp.sum())
        if total <= 0.0:
            continue
        i = int(rng.choice(disp.shape[0], p=disp / total))
        drag = Drag(tuple(centers[i]), tuple(end_pix[i]))
        return drag, sub, tuple(local[i])
    raise OcclusionError(
        f"no visible moving surface point for part {part_id!r} "
        f"after {attempts} attempts"
    )


def point_trajectory(
    tree, states: list[dict], subpart_id: str, local_point, camera: Camera2D
) -> np.ndarray:
    """(F, 2) pixel positions of a part-local point across all frames."""
    p = np.asarray(local_point, dtype=np.float64)
    out = np.empty((len(states), 2))
    for n, state in enumerate(states):
        poses = pose_parts(tree, state)
        out[n] = camera.world_to_pixel(poses[subpart_id].apply(p))
    return out
