import json
import os

import numpy as np
import pytest

from conceptcloud.model import RunConfig, SegmentedPointCloud
from conceptcloud.scene import SceneSpec

HELPERS_DIR = os.path.join(os.path.dirname(__file__), "helpers")

# 6 distinct labels with colors on the 8-bit grid (survive rendering exactly)
PALETTE = {
    "banana": (230, 214, 28),
    "apple": (200, 30, 30),
    "cereal": (150, 90, 40),
    "mug": (30, 60, 200),
    "crate": (40, 160, 60),
    "ball": (160, 40, 170),
}
FIXTURE_DIM = 8


def fixture_scene_dict(points_per_object: int = 300) -> dict:
    """Six well-separated primitives, one per palette entry."""
    kinds = ["cylinder", "sphere", "box", "cylinder", "box", "sphere"]
    objects = []
    for i, (label, rgb) in enumerate(PALETTE.items()):
        gx, gy = i % 3, i // 3
        objects.append({
            "label": label,
            "kind": kinds[i],
            "center": [gx * 1.5 - 1.5, gy * 1.5 - 0.75, 0.25],
            "size": 0.4,
            "color": [c / 255.0 for c in rgb],
        })
    return {"points_per_object": points_per_object, "objects": objects}


def fixture_encoder_dict() -> dict:
    vectors = {}
    for i, label in enumerate(PALETTE):
        basis = [0.0] * FIXTURE_DIM
        basis[i] = 1.0
        vectors[label] = basis
    return {"dim": FIXTURE_DIM, "vectors": vectors,
            "colors": {label: list(rgb) for label, rgb in PALETTE.items()}}


@pytest.fixture(scope="session")
def fixture_encoder_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("fixture") / "encoder.json"
    path.write_text(json.dumps(fixture_encoder_dict()))
    return str(path)


@pytest.fixture(scope="session")
def fixture_scene_spec() -> SceneSpec:
    return SceneSpec.from_dict(fixture_scene_dict())


@pytest.fixture
def config() -> RunConfig:
    return RunConfig()


def make_cloud(points, colors, ids, timestep=0) -> SegmentedPointCloud:
    return SegmentedPointCloud(
        timestep,
        np.asarray(points, np.float64),
        np.asarray(colors, np.float64),
        np.asarray(ids, np.int64),
    )


def two_object_cloud() -> SegmentedPointCloud:
    """Two separated single-color blobs (ids 1 and 2)."""
    rng = np.random.default_rng(42)
    a = rng.normal(0, 0.05, (60, 3)) + [0, 0, 0]
    b = rng.normal(0, 0.05, (60, 3)) + [2, 0, 0]
    points = np.vstack([a, b])
    colors = np.vstack([np.tile([1.0, 0.0, 0.0], (60, 1)), np.tile([0.0, 0.0, 1.0], (60, 1))])
    ids = np.concatenate([np.full(60, 1), np.full(60, 2)])
    return make_cloud(points, colors, ids)
