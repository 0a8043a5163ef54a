"""Dataset export: counts, determinism, validation oracles, pair sampling."""

import json
import os

import numpy as np
import pytest

from draggen.hashing import file_hash
from draggen.world.dataset import (
    ArticulatedDataset,
    DatasetConfig,
    generate_dataset,
    validate_dataset,
)

SMALL = DatasetConfig(
    archetypes=["cabinet_drawers", "oven", "box_lid", "fridge"],
    assets_per_archetype=1,
    animations_per_asset=2,
    frame_count=12,
    resolution=64,
    ood_archetypes=["fridge"],
)


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    generate_dataset(SMALL, seed=7, out_dir=out)
    return out


def test_manifest_counts(dataset_dir):
    ds = ArticulatedDataset(dataset_dir)
    assert len(ds.animations()) == 4 * 2
    for anim in ds.animations():
        assert anim["frames"] == 12
        files = os.listdir(os.path.join(dataset_dir, anim["id"]))
        assert sum(f.startswith("frame_") for f in files) == 12
        assert sum(f.startswith("random_") for f in files) == 12
        assert sum(f.startswith("mask_") for f in files) == 12


def test_splits_assigned(dataset_dir):
    ds = ArticulatedDataset(dataset_dir)
    assert {a["split"] for a in ds.animations()} == {"train", "id_test", "ood_test"}
    assert all(a["archetype"] == "fridge" for a in ds.animations("ood_test"))


def test_validation_oracles_pass(dataset_dir):
    assert validate_dataset(dataset_dir) == []


def test_validation_flags_corruption(dataset_dir, tmp_path):
    import shutil

    broken = tmp_path / "broken"
    shutil.copytree(dataset_dir, broken)
    meta_path = broken / "anim_0000" / "metadata.json"
    meta = json.loads(meta_path.read_text())
    meta["dragged_parts"][0]["trajectory"][3][0] += 5.0
    meta_path.write_text(json.dumps(meta))
    errors = validate_dataset(broken)
    assert any("trajectory" in e for e in errors)


def test_random_palette_constant_within_animation_varies_across(dataset_dir):
    ds = ArticulatedDataset(dataset_dir)
    a0, a1 = ds.animations()[0]["id"], ds.animations()[1]["id"]
    p0 = np.asarray(ds.metadata(a0)["random_palette"])
    p1 = np.asarray(ds.metadata(a1)["random_palette"])
    assert not np.array_equal(p0, p1)
    # rendered random frames use one palette throughout the animation
    imap = ds.index_map(a0, 0)
    img = ds.frame(a0, 0, texture="random")
    part = ds.metadata(a0)["tree"]["parts"][0]["id"]
    idx = 0
    pix = img[imap == idx]
    assert pix.std(axis=0).max() < 1e-6  # monochromatic per part


def test_byte_identical_regeneration(dataset_dir, tmp_path):
    again = tmp_path / "again"
    generate_dataset(SMALL, seed=7, out_dir=again)
    assert file_hash(os.path.join(dataset_dir, "manifest.json")) == file_hash(
        again / "manifest.json"
    )
    for anim in ArticulatedDataset(dataset_dir).animations():
        for name in ("frame_00.png", "random_05.png", "mask_11.png", "metadata.json"):
            assert file_hash(os.path.join(dataset_dir, anim["id"], name)) == file_hash(
                again / anim["id"] / name
            ), f"{anim['id']}/{name} differs"


def test_drag_sources_inside_image(dataset_dir):
    ds = ArticulatedDataset(dataset_dir)
    res = ds.config.resolution
    for anim in ds.animations():
        for d in ds.metadata(anim["id"])["dragged_parts"]:
            src = d["drag"]["source"]
            assert 0 <= src[0] < res and 0 <= src[1] < res


def test_pair_sampling_sources_inside(dataset_dir):
    ds = ArticulatedDataset(dataset_dir)
    rng = np.random.default_rng(3)
    anim = ds.animations()[0]["id"]
    for _ in range(20):
        n1, n2, drags = ds.sample_pair(anim, rng)
        assert n1 != n2
        for d in drags.drags:
            assert 0 <= d.source[0] < 64 and 0 <= d.source[1] < 64


def test_moving_mask_nonempty_and_inside_foreground(dataset_dir):
    ds = ArticulatedDataset(dataset_dir)
    anim = ds.animations()[0]["id"]
    mask = ds.moving_mask(anim, 6)
    fg = ds.foreground(anim, 6)
    assert mask.any()
    assert not (mask & ~fg).any()


def test_seed_changes_dataset(tmp_path):
    generate_dataset(SMALL, seed=8, out_dir=tmp_path / "other")
    ds = ArticulatedDataset(tmp_path / "other")
    assert validate_dataset(tmp_path / "other") == []
