"""Scene input: frame manifests, synthetic scene generation, change detection.

Synthetic scenes stand in for a simulator: primitive objects are sampled
uniformly by surface area with a counter-based RNG keyed on (seed,
object id), so generation is deterministic and independent of object
order. Per-timestep rigid motions transform the previous frame's stored
positions, which keeps unmoved objects bit-identical across frames.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .model import Image, RunConfig, SegmentedPointCloud
from .render import CameraPose, rasterize
from .views import plan_camera

ORBIT_ELEVATION_RAD = math.radians(30.0)

GROUND_OBJECT_ID = 0
GROUND_LABEL = "ground"


class SceneSpecError(ValueError):
    """Invalid synthetic scene description."""


@dataclass(frozen=True)
class PrimitiveObject:
    label: str
    kind: str  # box | sphere | cylinder
    center: np.ndarray  # (3,)
    size: np.ndarray  # (3,) full extents; spheres use size[0] as diameter
    color: np.ndarray  # (3,) in [0, 1]


@dataclass(frozen=True)
class Motion:
    timestep: int
    label: str
    translate: np.ndarray  # (3,)
    rotate_axis: np.ndarray | None = None
    rotate_angle_rad: float = 0.0


@dataclass(frozen=True)
class SceneSpec:
    objects: tuple[PrimitiveObject, ...]
    points_per_object: int = 400
    timesteps: int = 1
    ground_plane: bool = False
    ground_size: float = 6.0
    ground_color: tuple[float, float, float] = (0.45, 0.45, 0.45)
    ground_points: int | None = None  # default 4 * points_per_object
    motions: tuple[Motion, ...] = ()

    def validate(self) -> None:
        if not self.objects:
            raise SceneSpecError("scene needs at least one object")
        if self.points_per_object < 8:
            raise SceneSpecError(f"points_per_object must be >= 8, got {self.points_per_object}")
        if self.timesteps < 1:
            raise SceneSpecError(f"timesteps must be >= 1, got {self.timesteps}")
        labels = [o.label for o in self.objects]
        if len(set(labels)) != len(labels):
            raise SceneSpecError("object labels must be unique")
        if self.ground_plane and GROUND_LABEL in labels:
            raise SceneSpecError(f"label {GROUND_LABEL!r} is reserved for the ground plane")
        for o in self.objects:
            if o.kind not in ("box", "sphere", "cylinder"):
                raise SceneSpecError(f"object {o.label!r}: unknown kind {o.kind!r}")
            if not np.all(np.asarray(o.size) > 0):
                raise SceneSpecError(f"object {o.label!r}: sizes must be > 0")
            if not (np.all(np.asarray(o.color) >= 0) and np.all(np.asarray(o.color) <= 1)):
                raise SceneSpecError(f"object {o.label!r}: color channels must be in [0, 1]")
        for m in self.motions:
            if m.label not in labels:
                raise SceneSpecError(f"motion references unknown object {m.label!r}")
            if not (1 <= m.timestep < self.timesteps):
                raise SceneSpecError(f"motion timestep {m.timestep} outside [1, {self.timesteps - 1}]")
        if self.ground_plane and self.ground_size <= 0:
            raise SceneSpecError("ground_size must be > 0")

    def object_ids(self) -> dict[str, int]:
        """Stable id assignment: listed objects get 1..n; ground gets 0."""
        ids = {o.label: i + 1 for i, o in enumerate(self.objects)}
        if self.ground_plane:
            ids[GROUND_LABEL] = GROUND_OBJECT_ID
        return ids

    def labels(self) -> dict[int, str]:
        return {oid: label for label, oid in self.object_ids().items()}

    @classmethod
    def from_dict(cls, data: dict) -> "SceneSpec":
        try:
            objects = []
            for entry in data["objects"]:
                size = entry.get("size", 1.0)
                size3 = np.full(3, float(size)) if np.isscalar(size) else np.asarray(size, np.float64)
                objects.append(PrimitiveObject(
                    label=str(entry["label"]),
                    kind=str(entry.get("kind", "box")),
                    center=np.asarray(entry.get("center", (0.0, 0.0, 0.0)), np.float64),
                    size=size3,
                    color=np.asarray(entry.get("color", (0.5, 0.5, 0.5)), np.float64),
                ))
            motions = []
            for entry in data.get("motions", ()):
                rot = entry.get("rotate")
                motions.append(Motion(
                    timestep=int(entry["timestep"]),
                    label=str(entry["object"]),
                    translate=np.asarray(entry.get("translate", (0.0, 0.0, 0.0)), np.float64),
                    rotate_axis=None if rot is None else np.asarray(rot["axis"], np.float64),
                    rotate_angle_rad=0.0 if rot is None else math.radians(float(rot["angle_deg"])),
                ))
            spec = cls(
                objects=tuple(objects),
                points_per_object=int(data.get("points_per_object", 400)),
                timesteps=int(data.get("timesteps", 1)),
                ground_plane=bool(data.get("ground_plane", False)),
                ground_size=float(data.get("ground_size", 6.0)),
                ground_points=data.get("ground_points"),
                motions=tuple(motions),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneSpecError(f"malformed scene spec: {exc}") from None
        spec.validate()
        return spec

    @classmethod
    def from_file(cls, path) -> "SceneSpec":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def _object_rng(seed: int, object_id: int) -> np.random.Generator:
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(object_id)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _sample_sphere(rng, n: int, size: np.ndarray) -> np.ndarray:
    radius = float(size[0]) / 2.0
    z = radius * (2.0 * rng.random(n) - 1.0)
    phi = 2.0 * math.pi * rng.random(n)
    rho = np.sqrt(np.maximum(radius * radius - z * z, 0.0))
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def _sample_box(rng, n: int, size: np.ndarray) -> np.ndarray:
    sx, sy, sz = (float(v) for v in size)
    areas = np.array([sy * sz, sy * sz, sx * sz, sx * sz, sx * sy, sx * sy])
    cum = np.cumsum(areas / areas.sum())
    face = np.searchsorted(cum, rng.random(n), side="right")
    u = rng.random(n) - 0.5
    v = rng.random(n) - 0.5
    pts = np.empty((n, 3))
    for f, (fixed_axis, fixed_sign, ua, va) in enumerate([
        (0, +1, 1, 2), (0, -1, 1, 2),
        (1, +1, 0, 2), (1, -1, 0, 2),
        (2, +1, 0, 1), (2, -1, 0, 1),
    ]):
        sel = face == f
        pts[sel, fixed_axis] = fixed_sign * (sx, sy, sz)[fixed_axis] / 2.0
        pts[sel, ua] = u[sel] * (sx, sy, sz)[ua]
        pts[sel, va] = v[sel] * (sx, sy, sz)[va]
    return pts


def _sample_cylinder(rng, n: int, size: np.ndarray) -> np.ndarray:
    radius = float(size[0]) / 2.0
    height = float(size[2])
    lateral = 2.0 * math.pi * radius * height
    cap = math.pi * radius * radius
    cum = np.cumsum(np.array([lateral, cap, cap]) / (lateral + 2 * cap))
    region = np.searchsorted(cum, rng.random(n), side="right")
    u = rng.random(n)
    v = rng.random(n)
    pts = np.empty((n, 3))
    lat = region == 0
    phi = 2.0 * math.pi * u
    pts[lat, 0] = radius * np.cos(phi[lat])
    pts[lat, 1] = radius * np.sin(phi[lat])
    pts[lat, 2] = (v[lat] - 0.5) * height
    for r, zsign in ((1, +1), (2, -1)):
        sel = region == r
        rr = radius * np.sqrt(u[sel])
        pts[sel, 0] = rr * np.cos(2.0 * math.pi * v[sel])
        pts[sel, 1] = rr * np.sin(2.0 * math.pi * v[sel])
        pts[sel, 2] = zsign * height / 2.0
    return pts


_SAMPLERS = {"sphere": _sample_sphere, "box": _sample_box, "cylinder": _sample_cylinder}


def _rotation_matrix(axis: np.ndarray, angle_rad: float) -> np.ndarray:
    a = np.asarray(axis, np.float64)
    norm = np.linalg.norm(a)
    if norm < 1e-12:
        raise SceneSpecError("rotation axis must be non-zero")
    x, y, z = a / norm
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    one_c = 1.0 - c
    return np.array([
        [c + x * x * one_c, x * y * one_c - z * s, x * z * one_c + y * s],
        [y * x * one_c + z * s, c + y * y * one_c, y * z * one_c - x * s],
        [z * x * one_c - y * s, z * y * one_c + x * s, c + z * z * one_c],
    ])


def generate_scene(spec: SceneSpec, seed: int) -> list[SegmentedPointCloud]:
    """Sample the scene and apply per-timestep motions; one cloud per step."""
    spec.validate()
    ids = spec.object_ids()
    order = sorted(ids.values())
    by_id: dict[int, PrimitiveObject | None] = {ids[o.label]: o for o in spec.objects}
    if spec.ground_plane:
        by_id[GROUND_OBJECT_ID] = None

    positions: dict[int, np.ndarray] = {}
    colors: dict[int, np.ndarray] = {}
    centers: dict[int, np.ndarray] = {}
    for oid in order:
        rng = _object_rng(seed, oid)
        obj = by_id[oid]
        if obj is None:  # ground plane
            count = spec.ground_points if spec.ground_points is not None else 4 * spec.points_per_object
            local = np.zeros((count, 3))
            local[:, 0] = (rng.random(count) - 0.5) * spec.ground_size
            local[:, 1] = (rng.random(count) - 0.5) * spec.ground_size
            positions[oid] = local
            colors[oid] = np.tile(np.asarray(spec.ground_color, np.float64), (count, 1))
            centers[oid] = np.zeros(3)
        else:
            local = _SAMPLERS[obj.kind](rng, spec.points_per_object, obj.size)
            positions[oid] = local + obj.center
            colors[oid] = np.tile(obj.color, (spec.points_per_object, 1))
            centers[oid] = obj.center.copy()

    label_to_id = ids
    frames: list[SegmentedPointCloud] = []
    for t in range(spec.timesteps):
        if t > 0:
            for m in spec.motions:
                if m.timestep != t:
                    continue
                oid = label_to_id[m.label]
                pts = positions[oid]
                c = centers[oid]
                if m.rotate_axis is not None and m.rotate_angle_rad != 0.0:
                    rot = _rotation_matrix(m.rotate_axis, m.rotate_angle_rad)
                    pts = (pts - c) @ rot.T + c
                pts = pts + m.translate
                positions[oid] = pts
                centers[oid] = c + m.translate
        pos = np.concatenate([positions[oid] for oid in order])
        col = np.concatenate([colors[oid] for oid in order])
        oid_arr = np.concatenate([np.full(len(positions[oid]), oid, np.int64) for oid in order])
        frames.append(SegmentedPointCloud(t, pos, col, oid_arr))
    return frames


def detect_changed_objects(
    prev: SegmentedPointCloud, curr: SegmentedPointCloud, change_epsilon: float
) -> set[int]:
    """Objects of the current frame that differ from the previous frame.

    An object changed if it is new, its point count differs, or any
    index-aligned point moved more than change_epsilon (euclidean) or
    changed any color channel by more than change_epsilon. Objects absent
    from the current frame are not reported (the set is a subset of the
    current frame's ids).
    """
    changed: set[int] = set()
    prev_ids = prev.object_set()
    for oid in curr.object_set():
        if oid not in prev_ids:
            changed.add(oid)
            continue
        ia = prev.indices_of(oid)
        ib = curr.indices_of(oid)
        if len(ia) != len(ib):
            changed.add(oid)
            continue
        dp = np.linalg.norm(prev.positions[ia] - curr.positions[ib], axis=1)
        if np.any(dp > change_epsilon):
            changed.add(oid)
            continue
        dc = np.abs(prev.colors[ia] - curr.colors[ib])
        if np.any(dc > change_epsilon):
            changed.add(oid)
    return changed


def generate_orbit_frames(
    cloud: SegmentedPointCloud, n_frames: int, config: RunConfig, backend: str | None = None
) -> list[tuple[Image, np.ndarray]]:
    """Render n_frames views from a circular orbit around the cloud.

    Cameras sit at uniform azimuth steps (starting at 0) and a fixed 30
    degree elevation, aimed at the cloud's bounding-sphere center. Each
    frame comes with its pixel-aligned object-id mask (-1 = background).
    """
    if n_frames < 1:
        raise ValueError(f"n_frames must be >= 1, got {n_frames}")
    if len(cloud) == 0:
        raise ValueError("cannot orbit an empty cloud")
    pts = cloud.positions
    colors_u8 = np.rint(cloud.colors * 255.0).clip(0, 255).astype(np.uint8)
    frames = []
    for k in range(n_frames):
        azimuth = 2.0 * math.pi * k / n_frames
        camera = plan_camera(
            pts, ORBIT_ELEVATION_RAD, azimuth,
            fov_deg=config.fov_deg, frame_margin=config.frame_margin,
            resolution=config.render_resolution, voxel_size=config.voxel_size,
        )
        frames.append(rasterize(pts, colors_u8, cloud.object_ids, camera, config.splat_radius_px, backend=backend))
    return frames


@dataclass(frozen=True)
class SceneManifest:
    """Frame file list in timestep order plus the id -> label map."""

    frame_paths: tuple[str, ...]
    labels: dict[int, str]
    cameras: tuple[CameraPose, ...] = ()

    def __post_init__(self):
        if not self.frame_paths:
            raise ValueError("manifest must list at least one frame")
        values = list(self.labels.values())
        if len(set(values)) != len(values):
            raise ValueError("manifest labels must be unique")

    def id_for_label(self, label: str) -> int:
        for oid, name in self.labels.items():
            if name == label:
                return oid
        raise KeyError(f"label {label!r} not present in manifest")

    @classmethod
    def from_file(cls, path) -> "SceneManifest":
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        base = os.path.dirname(os.path.abspath(path))
        try:
            frames = tuple(os.path.join(base, p) for p in data["frames"])
            labels = {int(k): str(v) for k, v in data.get("labels", {}).items()}
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}: malformed manifest: {exc}") from None
        cameras = []
        for cam in data.get("cameras", ()):
            cameras.append(CameraPose(
                position=np.asarray(cam["position"], np.float64),
                look_at=np.asarray(cam["look_at"], np.float64),
                up=np.asarray(cam.get("up", (0.0, 0.0, 1.0)), np.float64),
                fov_deg=float(cam.get("fov_deg", 60.0)),
                resolution=tuple(cam.get("resolution", (224, 224))),
            ))
        return cls(frames, labels, tuple(cameras))


def write_manifest(path, frame_names: list[str], labels: dict[int, str]) -> None:
    """Write a manifest with frame paths relative to the manifest file."""
    doc = {"frames": list(frame_names), "labels": {str(k): v for k, v in sorted(labels.items())}}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
