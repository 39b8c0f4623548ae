"""Shared domain types: segmented point clouds, feature vectors, concept clouds.

All types are immutable after construction (array members are marked
read-only) and hold no I/O state, so they are safe to share across threads.

Positions and colors are float64 in memory. Frame files store float32
coordinates and 8-bit colors, so values coming from disk are a fixpoint:
reading a written file reproduces them bit-for-bit, while arbitrary
in-memory values quantize once on their first write.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np

MAX_OBJECT_ID = 2**32 - 1
UNIT_NORM_TOL = 1e-6


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Return v / ||v||; raises ValueError on a near-zero vector."""
    v = np.asarray(v, dtype=np.float64)
    n = float(np.linalg.norm(v))
    if n < 1e-12:
        raise ValueError("cannot normalize a near-zero vector")
    return v / n


def is_unit(v: np.ndarray, tol: float = UNIT_NORM_TOL) -> bool:
    return abs(float(np.linalg.norm(np.asarray(v, dtype=np.float64))) - 1.0) <= tol


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


@dataclass(frozen=True)
class ColorRGB:
    """Color with channels in [0, 1]."""

    r: float
    g: float
    b: float

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.g, self.b], dtype=np.float64)


@dataclass(frozen=True)
class SegmentedPoint:
    position: Point3
    color: ColorRGB
    object_id: int


@dataclass(frozen=True)
class SegmentedPointCloud:
    """One frame: positions, colors and an object id per point.

    Point order is stable; the index is a point's identity within the frame.
    """

    timestep: int
    positions: np.ndarray  # (n, 3) float64
    colors: np.ndarray  # (n, 3) float64, nominal range [0, 1]
    object_ids: np.ndarray  # (n,) int64, non-negative

    def __post_init__(self):
        object.__setattr__(self, "positions", _readonly(np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)))
        object.__setattr__(self, "colors", _readonly(np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)))
        object.__setattr__(self, "object_ids", _readonly(np.asarray(self.object_ids, dtype=np.int64).reshape(-1)))
        if not (len(self.positions) == len(self.colors) == len(self.object_ids)):
            raise ValueError("positions, colors and object_ids must have equal length")

    @classmethod
    def empty(cls, timestep: int = 0) -> "SegmentedPointCloud":
        return cls(timestep, np.empty((0, 3)), np.empty((0, 3)), np.empty(0, np.int64))

    @classmethod
    def from_points(cls, timestep: int, points: Sequence[SegmentedPoint]) -> "SegmentedPointCloud":
        pos = np.array([[p.position.x, p.position.y, p.position.z] for p in points], np.float64).reshape(-1, 3)
        col = np.array([[p.color.r, p.color.g, p.color.b] for p in points], np.float64).reshape(-1, 3)
        ids = np.array([p.object_id for p in points], np.int64)
        return cls(timestep, pos, col, ids)

    def __len__(self) -> int:
        return len(self.object_ids)

    def point(self, i: int) -> SegmentedPoint:
        x, y, z = (float(v) for v in self.positions[i])
        r, g, b = (float(v) for v in self.colors[i])
        return SegmentedPoint(Point3(x, y, z), ColorRGB(r, g, b), int(self.object_ids[i]))

    def object_set(self) -> frozenset[int]:
        return frozenset(int(o) for o in np.unique(self.object_ids))

    def indices_of(self, object_id: int) -> np.ndarray:
        return np.flatnonzero(self.object_ids == object_id)


def validate_cloud(cloud: SegmentedPointCloud) -> list[str]:
    """Check every type invariant; returns one message per violation.

    Never raises: an invalid cloud yields descriptions naming the offending
    point index and the rule it breaks.
    """
    violations: list[str] = []
    if cloud.timestep < 0:
        violations.append(f"timestep {cloud.timestep} is negative")
    bad = np.flatnonzero(~np.isfinite(cloud.positions).all(axis=1))
    violations.extend(f"point {i}: non-finite coordinate" for i in bad)
    finite_col = np.isfinite(cloud.colors)
    in_range = finite_col & (cloud.colors >= 0.0) & (cloud.colors <= 1.0)
    for i in np.flatnonzero(~in_range.all(axis=1)):
        j = int(np.flatnonzero(~in_range[i])[0])
        violations.append(f"point {i}: color channel {'rgb'[j]} = {cloud.colors[i, j]} outside [0, 1]")
    for i in np.flatnonzero(cloud.object_ids < 0):
        violations.append(f"point {i}: negative object_id {cloud.object_ids[i]}")
    return violations


@dataclass(frozen=True)
class ConceptPoint:
    position: np.ndarray  # (3,) float64
    feature: np.ndarray  # (d,) float64, unit
    source_object: int | None = None


@dataclass(frozen=True)
class ConceptCloud:
    """Points paired with unit semantic features; the queryable map.

    source_objects uses -1 where a point has no unanimous originating
    object (mixed voxels, or unknown provenance).
    """

    positions: np.ndarray  # (m, 3) float64
    features: np.ndarray  # (m, d) float64, unit rows
    source_objects: np.ndarray  # (m,) int64, -1 when absent
    feature_dim: int
    voxel_size: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "positions", _readonly(np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)))
        feats = np.asarray(self.features, dtype=np.float64)
        feats = feats.reshape(0, self.feature_dim) if feats.size == 0 else feats.reshape(len(self.positions), -1)
        object.__setattr__(self, "features", _readonly(feats))
        object.__setattr__(self, "source_objects", _readonly(np.asarray(self.source_objects, dtype=np.int64).reshape(-1)))
        if len(self.positions) > 0 and self.features.shape[1] != self.feature_dim:
            raise ValueError(f"feature dimension {self.features.shape[1]} does not match declared {self.feature_dim}")
        if len(self.source_objects) != len(self.positions):
            raise ValueError("source_objects length mismatch")

    def __len__(self) -> int:
        return len(self.positions)

    def point(self, i: int) -> ConceptPoint:
        src = int(self.source_objects[i])
        return ConceptPoint(self.positions[i].copy(), self.features[i].copy(), None if src < 0 else src)


@dataclass(frozen=True)
class Image:
    """Row-major 8-bit RGB raster."""

    pixels: np.ndarray  # (h, w, 3) uint8

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] * px.shape[1] == 0:
            raise ValueError("pixels must be a non-empty (h, w, 3) array")
        object.__setattr__(self, "pixels", _readonly(px))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()


@dataclass(frozen=True)
class RunConfig:
    """Tunables shared across the pipeline; defaults are the documented ones.

    voxel_increment is accepted and carried for config compatibility but has
    no effect on aggregation (the grid is built once at voxel_size).
    """

    voxel_size: float = 0.1
    voxel_increment: float = 0.1
    knn_k: int = 16
    outlier_std_mult: float = 2.0
    fov_deg: float = 60.0
    frame_margin: float = 1.2
    render_resolution: tuple[int, int] = (224, 224)
    splat_radius_px: int = 1
    change_epsilon: float = 1e-6
    relevancy_threshold: float = 0.5

    def validate(self) -> None:
        if not (self.voxel_size > 0 and math.isfinite(self.voxel_size)):
            raise ValueError(f"voxel_size must be > 0, got {self.voxel_size}")
        if not (self.voxel_increment > 0 and math.isfinite(self.voxel_increment)):
            raise ValueError(f"voxel_increment must be > 0, got {self.voxel_increment}")
        if self.knn_k < 3:
            raise ValueError(f"knn_k must be >= 3, got {self.knn_k}")
        if not math.isfinite(self.outlier_std_mult):
            raise ValueError("outlier_std_mult must be finite")
        if not (0.0 < self.fov_deg < 180.0):
            raise ValueError(f"fov_deg must be in (0, 180), got {self.fov_deg}")
        if self.frame_margin < 1.0:
            raise ValueError(f"frame_margin must be >= 1, got {self.frame_margin}")
        w, h = self.render_resolution
        if w <= 0 or h <= 0:
            raise ValueError(f"render_resolution must be positive, got {self.render_resolution}")
        if self.splat_radius_px < 0:
            raise ValueError(f"splat_radius_px must be >= 0, got {self.splat_radius_px}")
        if self.change_epsilon < 0:
            raise ValueError(f"change_epsilon must be >= 0, got {self.change_epsilon}")
        if not (0.0 <= self.relevancy_threshold <= 1.0):
            raise ValueError(f"relevancy_threshold must be in [0, 1], got {self.relevancy_threshold}")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "render_resolution" in data:
            w, h = data["render_resolution"]
            data = {**data, "render_resolution": (int(w), int(h))}
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def replaced(self, **kwargs) -> "RunConfig":
        cfg = replace(self, **kwargs)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["render_resolution"] = list(self.render_resolution)
        return d
