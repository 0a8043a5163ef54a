"""Rigid 2D transforms and forward kinematics.

World coordinates are (x, y) with x to the right and y up. All part
motion is rigid (rotation + translation), so transforms store an
orthonormal 2x2 rotation block and a translation vector.
"""

from __future__ import annotations

import numpy as np


class Transform2D:
    """Rigid transform p -> R p + t."""

    __slots__ = ("r", "t")

    def __init__(self, r: np.ndarray | None = None, t=(0.0, 0.0)):
        self.r = np.eye(2) if r is None else np.asarray(r, dtype=np.float64)
        self.t = np.asarray(t, dtype=np.float64)

    @classmethod
    def identity(cls) -> "Transform2D":
        return cls()

    @classmethod
    def translation(cls, t) -> "Transform2D":
        return cls(np.eye(2), t)

    @classmethod
    def rotation(cls, angle: float, pivot=(0.0, 0.0)) -> "Transform2D":
        """Rotation by ``angle`` radians about ``pivot``."""
        c, s = np.cos(angle), np.sin(angle)
        r = np.array([[c, -s], [s, c]])
        pivot = np.asarray(pivot, dtype=np.float64)
        return cls(r, pivot - r @ pivot)

    def compose(self, other: "Transform2D") -> "Transform2D":
        """self o other (apply ``other`` first)."""
        return Transform2D(self.r @ other.r, self.r @ other.t + self.t)

    def inverse(self) -> "Transform2D":
        rt = self.r.T
        return Transform2D(rt, -rt @ self.t)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (n, 2) array of points (also accepts a single (2,))."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.r.T + self.t

    def rotation_angle(self) -> float:
        return float(np.arctan2(self.r[1, 0], self.r[0, 0]))

    def __repr__(self):
        return f"Transform2D(r={self.r.tolist()}, t={self.t.tolist()})"


def joint_motion(joint, openness: float) -> Transform2D:
    """Local transform of a joint at articulation state ``openness``."""
    if joint.kind == "fixed":
        return Transform2D.identity()
    if joint.kind == "revolute":
        angle = joint.closed_angle + openness * (joint.open_angle - joint.closed_angle)
        return Transform2D.rotation(angle, pivot=joint.pivot)
    if joint.kind == "prismatic":
        return Transform2D.translation(openness * joint.travel * np.asarray(joint.axis))
    raise ValueError(f"unknown joint kind {joint.kind!r}")


def pose_parts(tree, state: dict) -> dict:
    """World transform per part id for an articulation state.

    Each part's transform is parent o rest-offset o joint(openness); fixed
    joints contribute identity, so at all-zero state with zero closed
    angles every part sits at its rest pose.
    """
    poses: dict[str, Transform2D] = {}
    for part in tree.parts:
        openness = float(state.get(part.id, 0.0))
        local = Transform2D.translation(part.offset).compose(
            joint_motion(part.joint, openness)
        )
        if part.parent is None:
            poses[part.id] = local
        else:
            poses[part.id] = poses[part.parent].compose(local)
    return poses
