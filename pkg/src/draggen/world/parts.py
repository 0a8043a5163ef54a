"""Parts, joints, and kinematic trees for the procedural articulated world."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from draggen.errors import InvalidTreeError

MOVABLE_LABELS = ("handle", "drawer", "lid", "door")
LABELS = MOVABLE_LABELS + ("body",)


@dataclass(frozen=True)
class Joint:
    """Joint connecting a part to its parent.

    revolute: rotates about ``pivot`` (part-local coords) from
    ``closed_angle`` (openness 0) to ``open_angle`` (openness 1).
    prismatic: translates ``openness * travel`` along unit ``axis``.
    """

    kind: str  # fixed | revolute | prismatic
    pivot: tuple[float, float] = (0.0, 0.0)
    closed_angle: float = 0.0
    open_angle: float = 0.0
    axis: tuple[float, float] = (1.0, 0.0)
    travel: float = 0.0

    @classmethod
    def fixed(cls) -> "Joint":
        return cls("fixed")

    @classmethod
    def revolute(cls, pivot, closed_angle: float, open_angle: float) -> "Joint":
        return cls("revolute", pivot=tuple(pivot), closed_angle=float(closed_angle),
                   open_angle=float(open_angle))

    @classmethod
    def prismatic(cls, axis, travel: float) -> "Joint":
        a = np.asarray(axis, dtype=np.float64)
        norm = float(np.linalg.norm(a))
        if norm == 0.0:
            raise InvalidTreeError("prismatic axis must be nonzero")
        a = a / norm
        return cls("prismatic", axis=(float(a[0]), float(a[1])), travel=float(travel))

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "revolute":
            out.update(pivot=list(self.pivot), closed_angle=self.closed_angle,
                       open_angle=self.open_angle)
        elif self.kind == "prismatic":
            out.update(axis=list(self.axis), travel=self.travel)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Joint":
        kind = obj["kind"]
        if kind == "fixed":
            return cls.fixed()
        if kind == "revolute":
            return cls.revolute(obj["pivot"], obj["closed_angle"], obj["open_angle"])
        if kind == "prismatic":
            return cls.prismatic(obj["axis"], obj["travel"])
        raise InvalidTreeError(f"unknown joint kind {kind!r}")


@dataclass(frozen=True)
class Part:
    """Axis-aligned rectangle in its local frame, spanning [0,w] x [0,h].

    ``offset`` places the local origin in the parent frame (rest pose).
    """

    id: str
    size: tuple[float, float]
    offset: tuple[float, float]
    joint: Joint
    parent: str | None
    label: str

    def corners(self) -> np.ndarray:
        w, h = self.size
        return np.array([[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]])

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "size": list(self.size),
            "offset": list(self.offset),
            "joint": self.joint.to_json(),
            "parent": self.parent,
            "label": self.label,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Part":
        return cls(
            id=obj["id"],
            size=tuple(obj["size"]),
            offset=tuple(obj["offset"]),
            joint=Joint.from_json(obj["joint"]),
            parent=obj["parent"],
            label=obj["label"],
        )


@dataclass
class KinematicTree:
    """Parts in a parent-before-child order; exactly one root."""

    parts: list[Part]
    children: dict[str, list[str]] = field(init=False)

    def __post_init__(self):
        self.children = {p.id: [] for p in self.parts}
        self.validate()

    def validate(self) -> None:
        ids = [p.id for p in self.parts]
        if len(set(ids)) != len(ids):
            raise InvalidTreeError("duplicate part ids")
        seen = set()
        roots = 0
        self.children = {p.id: [] for p in self.parts}
        for p in self.parts:
            if p.parent is None:
                roots += 1
            else:
                if p.parent not in seen:
                    raise InvalidTreeError(
                        f"part {p.id!r} listed before its parent {p.parent!r}"
                    )
                self.children[p.parent].append(p.id)
            seen.add(p.id)
            if p.label not in LABELS:
                raise InvalidTreeError(f"part {p.id!r} has unknown label {p.label!r}")
            if p.joint.kind == "revolute" and p.joint.open_angle == p.joint.closed_angle:
                raise InvalidTreeError(f"revolute part {p.id!r} has zero articulation range")
            if p.joint.kind == "prismatic" and p.joint.travel <= 0.0:
                raise InvalidTreeError(f"prismatic part {p.id!r} needs travel > 0")
        if roots != 1:
            raise InvalidTreeError(f"tree must have exactly one root, found {roots}")
        if not any(
            p.joint.kind != "fixed" and p.label in MOVABLE_LABELS for p in self.parts
        ):
            raise InvalidTreeError(
                "tree needs at least one articulated part labeled "
                + "/".join(MOVABLE_LABELS)
            )

    @property
    def root(self) -> Part:
        return next(p for p in self.parts if p.parent is None)

    def part(self, part_id: str) -> Part:
        for p in self.parts:
            if p.id == part_id:
                return p
        raise KeyError(part_id)

    def part_index(self, part_id: str) -> int:
        for i, p in enumerate(self.parts):
            if p.id == part_id:
                return i
        raise KeyError(part_id)

    def movable_parts(self) -> list[Part]:
        return [p for p in self.parts if p.joint.kind != "fixed"]

    def subtree_ids(self, part_id: str) -> list[str]:
        """part_id plus all descendants, in tree order."""
        out = [part_id]
        stack = list(self.children[part_id])
        collected = set(stack)
        while stack:
            cur = stack.pop()
            stack.extend(self.children[cur])
            collected.update(self.children[cur])
        for p in self.parts:
            if p.id in collected:
                out.append(p.id)
        return out

    def to_json(self) -> dict:
        return {"parts": [p.to_json() for p in self.parts]}

    @classmethod
    def from_json(cls, obj: dict) -> "KinematicTree":
        return cls([Part.from_json(p) for p in obj["parts"]])
