"""Procedural articulated-object generators.

Eight furniture-like archetypes assembled from rectangles in a roughly
unit world box. Dimensions are jittered per asset, so every draw yields
a distinct instance of the same kinematic archetype. Views are mixed
(side view for drawers and drop-down doors, top view for swing doors);
only the in-plane kinematics matter.
"""

from __future__ import annotations

import numpy as np

from draggen.errors import ConfigError
from draggen.world.animation import articulation_at, AnimationSpec
from draggen.world.kinematics import pose_parts
from draggen.world.parts import Joint, KinematicTree, Part

# fixed canonical palette, shaded per part index within a label
_LABEL_RGB = {
    "body": (0.42, 0.36, 0.30),
    "drawer": (0.63, 0.53, 0.40),
    "door": (0.55, 0.44, 0.33),
    "lid": (0.58, 0.48, 0.36),
    "handle": (0.22, 0.22, 0.26),
}


def canonical_palette(tree: KinematicTree) -> np.ndarray:
    colors = np.empty((len(tree.parts), 3))
    seen: dict[str, int] = {}
    for i, p in enumerate(tree.parts):
        k = seen.get(p.label, 0)
        seen[p.label] = k + 1
        shade = 1.0 - 0.08 * k
        colors[i] = np.asarray(_LABEL_RGB[p.label]) * shade
    return np.clip(colors, 0.0, 1.0)


def random_palette(tree: KinematicTree, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.05, 0.95, size=(len(tree.parts), 3))


def _u(rng, lo, hi):
    return float(rng.uniform(lo, hi))


def _handle(pid: str, parent: str, px: float, py: float, w: float, h: float) -> Part:
    return Part(id=pid, size=(w, h), offset=(px, py), joint=Joint.fixed(),
                parent=parent, label="handle")


def _cabinet_drawers(rng) -> KinematicTree:
    bw, bh = _u(rng, 0.44, 0.56), _u(rng, 0.56, 0.70)
    n = int(rng.integers(2, 4))
    parts = [Part("body", (bw, bh), ((1 - bw) / 2, (1 - bh) / 2),
                  Joint.fixed(), None, "body")]
    slot = bh / n
    dw, dh = bw * 0.84, slot * _u(rng, 0.70, 0.82)
    travel = bw * _u(rng, 0.45, 0.60)
    for i in range(n):
        pid = f"drawer{i}"
        parts.append(Part(pid, (dw, dh), ((bw - dw) / 2, slot * i + (slot - dh) / 2),
                          Joint.prismatic((1.0, 0.0), travel), "body", "drawer"))
        parts.append(_handle(f"handle{i}", pid, dw * 0.80, dh * 0.36,
                             dw * 0.14, dh * 0.28))
    return KinematicTree(parts)


def _cabinet_doors(rng) -> KinematicTree:
    bw, bh = _u(rng, 0.46, 0.56), _u(rng, 0.24, 0.32)
    dw, dh = bw * 0.46, _u(rng, 0.05, 0.07)
    swing = np.deg2rad(_u(rng, 80, 110))
    parts = [
        Part("body", (bw, bh), ((1 - bw) / 2, 0.5 - bh / 3),
             Joint.fixed(), None, "body"),
        Part("door_left", (dw, dh), (bw * 0.01, -dh),
             Joint.revolute((0.0, dh), 0.0, -swing), "body", "door"),
        Part("door_right", (dw, dh), (bw * 0.99 - dw, -dh),
             Joint.revolute((dw, dh), 0.0, swing), "body", "door"),
    ]
    parts.append(_handle("handle_left", "door_left", dw * 0.78, dh * 0.2,
                         dw * 0.12, dh * 0.6))
    parts.append(_handle("handle_right", "door_right", dw * 0.10, dh * 0.2,
                         dw * 0.12, dh * 0.6))
    return KinematicTree(parts)


def _box_lid(rng) -> KinematicTree:
    bw, bh = _u(rng, 0.50, 0.60), _u(rng, 0.24, 0.34)
    lw, lh = bw * 1.04, _u(rng, 0.06, 0.09)
    parts = [
        Part("body", (bw, bh), ((1 - bw) / 2, 0.30), Joint.fixed(), None, "body"),
        Part("lid", (lw, lh), (-(lw - bw) / 2, bh),
             Joint.revolute((0.0, 0.0), 0.0, np.deg2rad(_u(rng, 100, 135))),
             "body", "lid"),
    ]
    return KinematicTree(parts)


def _oven(rng) -> KinematicTree:
    bw, bh = _u(rng, 0.42, 0.52), _u(rng, 0.42, 0.52)
    dw, dh = _u(rng, 0.05, 0.07), bh * 0.82
    parts = [
        Part("body", (bw, bh), ((1 - bw) / 2, (1 - bh) / 2),
             Joint.fixed(), None, "body"),
        Part("door", (dw, dh), (bw, bh * 0.06),
             Joint.revolute((0.0, 0.0), 0.0, -np.deg2rad(_u(rng, 85, 100))),
             "body", "door"),
    ]
    parts.append(_handle("door_handle", "door", dw * 0.2, dh * 0.86,
                         dw * 0.6, dh * 0.10))
    return KinematicTree(parts)


def _fridge(rng) -> KinematicTree:
    bw, bh = _u(rng, 0.40, 0.50), _u(rng, 0.26, 0.34)
    gap = bw * 0.02
    dbig = bw * _u(rng, 0.55, 0.62)
    dsml = bw - dbig - 3 * gap
    dh = _u(rng, 0.05, 0.07)
    swing = np.deg2rad(_u(rng, 85, 110))
    parts = [
        Part("body", (bw, bh), ((1 - bw) / 2, 0.5 - bh / 3),
             Joint.fixed(), None, "body"),
        Part("door_main", (dbig, dh), (gap, -dh),
             Joint.revolute((0.0, dh), 0.0, -swing), "body", "door"),
        Part("door_small", (dsml, dh), (bw - gap - dsml, -dh),
             Joint.revolute((dsml, dh), 0.0, swing), "body", "door"),
    ]
    return KinematicTree(parts)


def _toolbox(rng) -> KinematicTree:
    bw, bh = _u(rng, 0.48, 0.58), _u(rng, 0.20, 0.28)
    lw, lh = bw * 1.02, _u(rng, 0.05, 0.08)
    dw, dh = bw * 0.80, bh * 0.40
    parts = [
        Part("body", (bw, bh), ((1 - bw) / 2, 0.34), Joint.fixed(), None, "body"),
        Part("lid", (lw, lh), (-(lw - bw) / 2, bh),
             Joint.revolute((0.0, 0.0), 0.0, np.deg2rad(_u(rng, 95, 125))),
             "body", "lid"),
        Part("tray", (dw, dh), ((bw - dw) / 2, bh * 0.12),
             Joint.prismatic((1.0, 0.0), bw * _u(rng, 0.40, 0.55)), "body", "drawer"),
    ]
    parts.append(_handle("tray_handle", "tray", dw * 0.82, dh * 0.30,
                         dw * 0.12, dh * 0.40))
    return KinematicTree(parts)


def _nightstand(rng) -> KinematicTree:
    bw, bh = _u(rng, 0.36, 0.46), _u(rng, 0.40, 0.50)
    dw, dh = bw * 0.84, bh * 0.30
    doorw, doorh = _u(rng, 0.05, 0.07), bh * 0.52
    parts = [
        Part("body", (bw, bh), ((1 - bw) / 2, (1 - bh) / 2),
             Joint.fixed(), None, "body"),
        Part("drawer", (dw, dh), ((bw - dw) / 2, bh * 0.62),
             Joint.prismatic((1.0, 0.0), bw * _u(rng, 0.45, 0.60)), "body", "drawer"),
        Part("door", (doorw, doorh), (bw, bh * 0.04),
             Joint.revolute((0.0, 0.0), 0.0, -np.deg2rad(_u(rng, 80, 100))),
             "body", "door"),
    ]
    parts.append(_handle("drawer_handle", "drawer", dw * 0.80, dh * 0.30,
                         dw * 0.14, dh * 0.36))
    return KinematicTree(parts)


def _dishwasher(rng) -> KinematicTree:
    bw, bh = _u(rng, 0.44, 0.54), _u(rng, 0.40, 0.48)
    tw, th = bw * 0.76, bh * 0.22
    dw, dh = _u(rng, 0.05, 0.07), bh * 0.86
    parts = [
        Part("body", (bw, bh), ((1 - bw) / 2, (1 - bh) / 2),
             Joint.fixed(), None, "body"),
        Part("rack", (tw, th), ((bw - tw) / 2, bh * 0.55),
             Joint.prismatic((1.0, 0.0), bw * _u(rng, 0.40, 0.55)), "body", "drawer"),
        Part("door", (dw, dh), (bw, bh * 0.04),
             Joint.revolute((0.0, 0.0), 0.0, -np.deg2rad(_u(rng, 85, 100))),
             "body", "door"),
    ]
    parts.append(_handle("door_handle", "door", dw * 0.2, dh * 0.88,
                         dw * 0.6, dh * 0.08))
    return KinematicTree(parts)


ARCHETYPES = {
    "cabinet_drawers": _cabinet_drawers,
    "cabinet_doors": _cabinet_doors,
    "box_lid": _box_lid,
    "oven": _oven,
    "fridge": _fridge,
    "toolbox": _toolbox,
    "nightstand": _nightstand,
    "dishwasher": _dishwasher,
}


def make_tree(archetype: str, rng: np.random.Generator) -> KinematicTree:
    if archetype not in ARCHETYPES:
        raise ConfigError(
            f"unknown archetype {archetype!r}; available: {sorted(ARCHETYPES)}"
        )
    return ARCHETYPES[archetype](rng)


def tree_extent(tree: KinematicTree) -> tuple[tuple[float, float], float]:
    """Center and max extent of the tree over closed and fully-open states.

    Used to fit cameras so articulations stay (mostly) in frame.
    """
    movable = [p.id for p in tree.movable_parts()]
    frames = []
    for openness in (0.0, 0.5, 1.0):
        state = {pid: openness for pid in movable}
        poses = pose_parts(tree, state)
        for part in tree.parts:
            frames.append(poses[part.id].apply(part.corners()))
    pts = np.concatenate(frames, axis=0)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    center = tuple((lo + hi) / 2.0)
    return center, float(np.max(hi - lo))


def states_of(spec: AnimationSpec) -> list[dict]:
    """Articulation state at every frame of an animation."""
    return [articulation_at(spec, n) for n in range(spec.frame_count)]
