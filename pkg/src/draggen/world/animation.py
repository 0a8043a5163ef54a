"""Articulation schedules for animations.

An animation has N+1 frames (default 36). A random non-empty subset of
the movable parts moves; the rest hold still. Two animation types are
drawn with equal probability:

  type 1: moving parts sweep 0 -> 1 linearly, stationary parts sit fully
          closed.
  type 2: moving part i sweeps linearly from a start a_i ~ U(0, 1/4) to
          an end b_i ~ U(3/4, 1); stationary part i holds a random
          c_i ~ U(0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from draggen.errors import InvalidTreeError

DEFAULT_FRAME_COUNT = 36


@dataclass(frozen=True)
class AnimationSpec:
    anim_type: int  # 1 or 2
    moving: tuple[str, ...]  # part ids in s
    start: dict = field(default_factory=dict)  # a_i for i in s (type 2)
    end: dict = field(default_factory=dict)  # b_i for i in s (type 2)
    stationary: dict = field(default_factory=dict)  # c_i for movable i not in s (type 2)
    frame_count: int = DEFAULT_FRAME_COUNT

    @property
    def last_frame(self) -> int:
        """N, the index of the final frame."""
        return self.frame_count - 1

    def to_json(self) -> dict:
        return {
            "anim_type": self.anim_type,
            "moving": list(self.moving),
            "start": dict(self.start),
            "end": dict(self.end),
            "stationary": dict(self.stationary),
            "frame_count": self.frame_count,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AnimationSpec":
        return cls(
            anim_type=int(obj["anim_type"]),
            moving=tuple(obj["moving"]),
            start=dict(obj["start"]),
            end=dict(obj["end"]),
            stationary=dict(obj["stationary"]),
            frame_count=int(obj["frame_count"]),
        )


def sample_animation(tree, rng: np.random.Generator,
                     frame_count: int = DEFAULT_FRAME_COUNT) -> AnimationSpec:
    """Draw an animation spec for ``tree``.

    The moving subset is uniform over non-empty subsets of the movable
    parts (an animation must move something).
    """
    movable = [p.id for p in tree.movable_parts()]
    if not movable:
        raise InvalidTreeError("tree has no movable part to animate")
    m = len(movable)
    subset_bits = int(rng.integers(1, 2**m))  # uniform over non-empty subsets
    moving = tuple(pid for k, pid in enumerate(movable) if subset_bits >> k & 1)
    anim_type = 1 if rng.random() < 0.5 else 2

    start, end, stationary = {}, {}, {}
    if anim_type == 1:
        for pid in movable:
            if pid not in moving:
                stationary[pid] = 0.0  # fully closed while others sweep
    else:
        for pid in movable:
            if pid in moving:
                start[pid] = float(rng.uniform(0.0, 0.25))
                end[pid] = float(rng.uniform(0.75, 1.0))
            else:
                stationary[pid] = float(rng.uniform(0.0, 1.0))
    return AnimationSpec(
        anim_type=anim_type,
        moving=moving,
        start=start,
        end=end,
        stationary=stationary,
        frame_count=frame_count,
    )


def articulation_at(spec: AnimationSpec, n: int) -> dict:
    """Closed-form articulation state {part id: openness} at frame n.

    Only parts mentioned by the spec appear; absent parts (fixed joints)
    are treated as openness 0 by the kinematics.
    """
    N = spec.last_frame
    if not 0 <= n <= N:
        raise IndexError(f"frame {n} outside 0..{N}")
    state: dict[str, float] = dict(spec.stationary)
    if spec.anim_type == 1:
        for pid in spec.moving:
            state[pid] = n / N
    else:
        for pid in spec.moving:
            state[pid] = ((N - n) * spec.start[pid] + n * spec.end[pid]) / N
    return state
