"""Dataset generation, loading, and consistency validation.

Layout under the output root:

    manifest.json                    dataset-level index + config hash
    anim_0000/
        metadata.json                tree, schedule, camera, drags, motion truth
        frame_00.png ...             canonical-palette renders
        random_00.png ...            random-palette renders (same geometry)
        mask_00.png ...              part-index maps (value = index + 1)

Training pairs are two frames of one animation in either order; drags for
a pair come from the stored per-part point trajectories.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from draggen import imageio
from draggen.drags import Drag, DragSet
from draggen.errors import ConfigError, OcclusionError
from draggen.hashing import config_hash
from draggen.world.animation import AnimationSpec, articulation_at, sample_animation
from draggen.world.archetypes import (
    ARCHETYPES,
    canonical_palette,
    make_tree,
    random_palette,
    states_of,
    tree_extent,
)
from draggen.world.camera import Camera2D, sample_camera
from draggen.world.dragsample import point_trajectory, sample_part_drag
from draggen.world.kinematics import Transform2D, pose_parts
from draggen.world.parts import KinematicTree
from draggen.world.render import coverage_masks, render

MANIFEST_VERSION = 1
_ANIMATION_RETRIES = 20


@dataclass
class DatasetConfig:
    archetypes: list = field(default_factory=lambda: list(ARCHETYPES))
    assets_per_archetype: int = 1
    animations_per_asset: int = 8
    frame_count: int = 36
    resolution: int = 64
    drag_capacity: int = 5
    ood_archetypes: list = field(default_factory=lambda: ["nightstand", "dishwasher"])
    id_holdout_per_asset: int = 1

    def __post_init__(self):
        unknown = [a for a in self.archetypes if a not in ARCHETYPES]
        if unknown:
            raise ConfigError(f"unknown archetypes {unknown}")
        if not set(self.ood_archetypes) <= set(self.archetypes):
            raise ConfigError("ood_archetypes must be a subset of archetypes")
        if self.frame_count < 2:
            raise ConfigError("animations need at least 2 frames")

    def to_json(self) -> dict:
        return {
            "archetypes": list(self.archetypes),
            "assets_per_archetype": self.assets_per_archetype,
            "animations_per_asset": self.animations_per_asset,
            "frame_count": self.frame_count,
            "resolution": self.resolution,
            "drag_capacity": self.drag_capacity,
            "ood_archetypes": list(self.ood_archetypes),
            "id_holdout_per_asset": self.id_holdout_per_asset,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DatasetConfig":
        return cls(**obj)


def _classify_rigid_motion(delta) -> dict:
    """Joint parameters of a world-frame rigid motion (rotation or translation)."""
    angle = delta.rotation_angle()
    if abs(angle) > 1e-9:
        pivot = np.linalg.solve(np.eye(2) - delta.r, delta.t)
        return {"type": "revolute", "pivot": pivot.tolist(), "angle": float(angle)}
    dist = float(np.linalg.norm(delta.t))
    axis = (delta.t / dist).tolist() if dist > 0 else [1.0, 0.0]
    return {"type": "prismatic", "axis": axis, "distance": dist}


def _generate_animation(tree, config: DatasetConfig, rng: np.random.Generator):
    """Sample (spec, camera, brightness, palette, drags) with occlusion retry."""
    center, extent = tree_extent(tree)
    res = (config.resolution, config.resolution)
    last_err = None
    for _ in range(_ANIMATION_RETRIES):
        spec = sample_animation(tree, rng, frame_count=config.frame_count)
        camera = sample_camera(rng, center, extent, res)
        brightness = float(rng.uniform(0.9, 1.1))
        states = states_of(spec)
        index_map0 = render(
            tree, states[0], canonical_palette(tree), camera, brightness
        ).index_map

        moving = list(spec.moving)
        if len(moving) > config.drag_capacity:
            pick = rng.choice(len(moving), size=config.drag_capacity, replace=False)
            moving = [moving[i] for i in sorted(pick)]
        try:
            dragged = []
            for pid in moving:
                drag, subpart, local = sample_part_drag(
                    tree, pid, states[0], states[-1], camera, index_map0, rng
                )
                traj = point_trajectory(tree, states, subpart, local, camera)
                dragged.append(
                    {
                        "part": pid,
                        "subpart": subpart,
                        "local_point": list(local),
                        "trajectory": traj.tolist(),
                        "drag": drag.to_json(),
                    }
                )
            return spec, camera, brightness, states, dragged
        except OcclusionError as err:
            last_err = err  # regenerate the whole animation
    raise OcclusionError(f"could not place drags after {_ANIMATION_RETRIES} animations: {last_err}")


def generate_dataset(config: DatasetConfig, seed: int, out_dir) -> dict:
    """Write a full dataset; returns the manifest dict."""
    out_dir = str(out_dir)
    os.makedirs(out_dir, exist_ok=True)

    animations = []
    anim_index = 0
    for arch_i, arch in enumerate(config.archetypes):
        for asset_j in range(config.assets_per_archetype):
            tree = make_tree(arch, np.random.default_rng([seed, 11, arch_i, asset_j]))
            palette = canonical_palette(tree)
            for k in range(config.animations_per_asset):
                rng = np.random.default_rng([seed, 23, anim_index])
                spec, camera, brightness, states, dragged = _generate_animation(
                    tree, config, rng
                )
                rnd_palette = random_palette(tree, rng)

                anim_id = f"anim_{anim_index:04d}"
                anim_dir = os.path.join(out_dir, anim_id)
                os.makedirs(anim_dir, exist_ok=True)
                for n, state in enumerate(states):
                    reg = render(tree, state, palette, camera, brightness)
                    rnd = render(tree, state, rnd_palette, camera, brightness)
                    imageio.save_png(os.path.join(anim_dir, f"frame_{n:02d}.png"), reg.image)
                    imageio.save_png(os.path.join(anim_dir, f"random_{n:02d}.png"), rnd.image)
                    imageio.save_index_png(
                        os.path.join(anim_dir, f"mask_{n:02d}.png"), reg.index_map
                    )

                poses0 = pose_parts(tree, states[0])
                posesN = pose_parts(tree, states[-1])
                motion_truth = {
                    pid: _classify_rigid_motion(
                        posesN[pid].compose(poses0[pid].inverse())
                    )
                    for pid in spec.moving
                }
                if arch in config.ood_archetypes:
                    split = "ood_test"
                elif k >= config.animations_per_asset - config.id_holdout_per_asset:
                    split = "id_test"
                else:
                    split = "train"

                metadata = {
                    "id": anim_id,
                    "archetype": arch,
                    "asset": asset_j,
                    "split": split,
                    "tree": tree.to_json(),
                    "animation": spec.to_json(),
                    "camera": camera.to_json(),
                    "brightness": brightness,
                    "palette": palette.tolist(),
                    "random_palette": rnd_palette.tolist(),
                    "states": [
                        {pid: state.get(pid, 0.0) for pid in (p.id for p in tree.parts)}
                        for state in states
                    ],
                    "dragged_parts": dragged,
                    "motion_truth": motion_truth,
                }
                with open(os.path.join(anim_dir, "metadata.json"), "w") as f:
                    json.dump(metadata, f, sort_keys=True, indent=2)

                animations.append(
                    {
                        "id": anim_id,
                        "archetype": arch,
                        "asset": asset_j,
                        "split": split,
                        "frames": config.frame_count,
                        "parts": len(tree.parts),
                    }
                )
                anim_index += 1

    manifest = {
        "version": MANIFEST_VERSION,
        "seed": seed,
        "config": config.to_json(),
        "config_hash": config_hash(config.to_json()),
        "animations": animations,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
    return manifest


class ArticulatedDataset:
    """Read access to a generated dataset directory."""

    def __init__(self, root):
        self.root = str(root)
        with open(os.path.join(self.root, "manifest.json")) as f:
            self.manifest = json.load(f)
        self.config = DatasetConfig.from_json(self.manifest["config"])
        self._meta_cache: dict[str, dict] = {}
        self._tree_cache: dict[str, KinematicTree] = {}

    def animations(self, split: str | None = None) -> list[dict]:
        anims = self.manifest["animations"]
        if split is None:
            return list(anims)
        return [a for a in anims if a["split"] == split]

    def metadata(self, anim_id: str) -> dict:
        if anim_id not in self._meta_cache:
            with open(os.path.join(self.root, anim_id, "metadata.json")) as f:
                self._meta_cache[anim_id] = json.load(f)
        return self._meta_cache[anim_id]

    def tree(self, anim_id: str) -> KinematicTree:
        if anim_id not in self._tree_cache:
            self._tree_cache[anim_id] = KinematicTree.from_json(
                self.metadata(anim_id)["tree"]
            )
        return self._tree_cache[anim_id]

    def camera(self, anim_id: str) -> Camera2D:
        return Camera2D.from_json(self.metadata(anim_id)["camera"])

    def frame(self, anim_id: str, n: int, texture: str = "regular") -> np.ndarray:
        prefix = "frame" if texture == "regular" else "random"
        return imageio.load_png(
            os.path.join(self.root, anim_id, f"{prefix}_{n:02d}.png")
        )

    def index_map(self, anim_id: str, n: int) -> np.ndarray:
        return imageio.load_index_png(
            os.path.join(self.root, anim_id, f"mask_{n:02d}.png")
        )

    def foreground(self, anim_id: str, n: int) -> np.ndarray:
        return self.index_map(anim_id, n) >= 0

    def moving_mask(self, anim_id: str, n: int) -> np.ndarray:
        """Visible pixels of the moving parts (their subtrees included)."""
        meta = self.metadata(anim_id)
        tree = self.tree(anim_id)
        moving_idx = set()
        for pid in meta["animation"]["moving"]:
            for sub in tree.subtree_ids(pid):
                moving_idx.add(tree.part_index(sub))
        imap = self.index_map(anim_id, n)
        return np.isin(imap, sorted(moving_idx))

    def drag_set(self, anim_id: str, n1: int, n2: int,
                 capacity: int | None = None) -> DragSet:
        """Drags from frame n1 to frame n2 built from stored trajectories."""
        meta = self.metadata(anim_id)
        cap = capacity or self.config.drag_capacity
        drags = tuple(
            Drag(tuple(d["trajectory"][n1]), tuple(d["trajectory"][n2]))
            for d in meta["dragged_parts"]
        )
        return DragSet(drags, capacity=cap)

    def sample_pair(self, anim_id: str, rng: np.random.Generator,
                    capacity: int | None = None):
        """Random ordered frame pair with all drag sources inside the image."""
        meta = self.metadata(anim_id)
        frames = meta["animation"]["frame_count"]
        H = W = self.config.resolution
        for _ in range(16):
            n1, n2 = rng.choice(frames, size=2, replace=False)
            n1, n2 = int(n1), int(n2)
            ok = all(
                0.0 <= d["trajectory"][n1][0] < H and 0.0 <= d["trajectory"][n1][1] < W
                for d in meta["dragged_parts"]
            )
            if ok:
                return n1, n2, self.drag_set(anim_id, n1, n2, capacity)
        return 0, frames - 1, self.drag_set(anim_id, 0, frames - 1, capacity)


def validate_dataset(root) -> list[str]:
    """Run the dataset consistency oracles; returns a list of failures."""
    errors: list[str] = []
    try:
        ds = ArticulatedDataset(root)
    except Exception as exc:
        return [f"manifest: unreadable ({exc})"]

    res = ds.config.resolution
    for anim in ds.manifest["animations"]:
        aid = anim["id"]
        try:
            meta = ds.metadata(aid)
            tree = ds.tree(aid)
            camera = ds.camera(aid)
            spec = AnimationSpec.from_json(meta["animation"])

            # closed-form schedule vs stored states
            for n, stored in enumerate(meta["states"]):
                state = articulation_at(spec, n)
                for pid, value in stored.items():
                    want = state.get(pid, 0.0)
                    if abs(value - want) > 1e-12:
                        errors.append(f"{aid}: schedule mismatch part {pid} frame {n}")
                        break

            # stationary parts keep their full-coverage footprint
            moving_subtrees = set()
            for pid in spec.moving:
                moving_subtrees.update(tree.subtree_ids(pid))
            cov0 = coverage_masks(tree, articulation_at(spec, 0), camera)
            covN = coverage_masks(tree, articulation_at(spec, spec.last_frame), camera)
            for i, part in enumerate(tree.parts):
                if part.id in moving_subtrees:
                    continue
                if not np.array_equal(cov0[i], covN[i]):
                    errors.append(f"{aid}: stationary part {part.id} moved")

            # drag trajectories reproject through the kinematics
            states = [articulation_at(spec, n) for n in range(spec.frame_count)]
            for d in meta["dragged_parts"]:
                traj = np.asarray(d["trajectory"])
                want = point_trajectory(tree, states, d["subpart"],
                                        d["local_point"], camera)
                if np.max(np.linalg.norm(traj - want, axis=1)) > 0.5:
                    errors.append(f"{aid}: trajectory of {d['part']} off by > 0.5 px")
                src = d["drag"]["source"]
                if not (0.0 <= src[0] < res and 0.0 <= src[1] < res):
                    errors.append(f"{aid}: drag source outside image for {d['part']}")

                # applying the stored motion truth to the source preimage
                # must land on the drag termination
                truth = meta["motion_truth"][d["part"]]
                src_world = camera.pixel_to_world(np.asarray(src))
                if truth["type"] == "revolute":
                    delta = Transform2D.rotation(truth["angle"], truth["pivot"])
                else:
                    delta = Transform2D.translation(
                        np.asarray(truth["axis"]) * truth["distance"]
                    )
                end_px = camera.world_to_pixel(delta.apply(src_world))
                if np.linalg.norm(end_px - np.asarray(d["drag"]["termination"])) > 0.5:
                    errors.append(f"{aid}: motion truth reprojection off for {d['part']}")

            # all expected files present
            for n in range(spec.frame_count):
                for name in (f"frame_{n:02d}.png", f"random_{n:02d}.png",
                             f"mask_{n:02d}.png"):
                    if not os.path.exists(os.path.join(ds.root, aid, name)):
                        errors.append(f"{aid}: missing {name}")
        except Exception as exc:
            errors.append(f"{aid}: {exc}")
    return errors
