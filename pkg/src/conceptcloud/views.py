"""Synthetic view planning: outlier removal, normals, camera placement.

A view of a point set is rendered from a camera sitting on the ray from
the set's bounding-sphere center along the mean surface normal, far enough
back that the whole set fits in frame. Closed objects (full spheres,
boxes) have outward normals that cancel; the mean then falls back to +z,
which is logged rather than treated as an error.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy.spatial import cKDTree

from .model import Image, RunConfig, SegmentedPointCloud
from .render import CameraPose, render_view

logger = logging.getLogger(__name__)

FALLBACK_NORMAL = np.array([0.0, 0.0, 1.0])


class SynthesisError(RuntimeError):
    """View synthesis cannot produce an image for the requested target."""


def filter_outliers(points: np.ndarray, knn_k: int, outlier_std_mult: float) -> np.ndarray:
    """Keep points whose mean k-neighbor distance is within the global band.

    The band is mean + outlier_std_mult * std of that statistic over all
    points. Sets of size <= knn_k are kept whole. Returns a boolean mask.
    """
    pts = np.asarray(points, np.float64).reshape(-1, 3)
    n = len(pts)
    if n == 0:
        raise ValueError("filter_outliers requires a non-empty point set")
    if n <= knn_k:
        return np.ones(n, bool)
    tree = cKDTree(pts)
    dists, _ = tree.query(pts, k=knn_k + 1)  # column 0 is the point itself
    mean_d = dists[:, 1:].mean(axis=1)
    threshold = mean_d.mean() + outlier_std_mult * mean_d.std()
    return mean_d <= threshold


def estimate_normals(points: np.ndarray, knn_k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-point PCA normals over the knn_k-neighborhood (self included).

    Each normal is the smallest-eigenvalue eigenvector of the neighborhood
    covariance, oriented away from the set centroid; an exactly ambiguous
    orientation resolves toward +z, then +x, then +y. Degenerate
    (collinear or coincident) neighborhoods are flagged invalid.

    Returns (normals (n, 3), valid (n,) bool).
    """
    pts = np.asarray(points, np.float64).reshape(-1, 3)
    n = len(pts)
    if n < 3:
        raise ValueError("normal estimation requires at least 3 points")
    k = min(knn_k, n)
    tree = cKDTree(pts)
    _, idx = tree.query(pts, k=k)
    if k == 1:
        idx = idx[:, None]
    neigh = pts[idx]
    centered = neigh - neigh.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered)
    eigvals, eigvecs = np.linalg.eigh(cov)
    normals = eigvecs[:, :, 0]
    valid = (eigvals[:, 2] > 0) & (eigvals[:, 1] > 1e-12 * eigvals[:, 2])

    centroid = pts.mean(axis=0)
    outward = pts - centroid
    lengths = np.linalg.norm(outward, axis=1)
    dirs = np.zeros_like(outward)
    nz = lengths > 1e-12
    dirs[nz] = outward[nz] / lengths[nz, None]
    dots = np.einsum("ij,ij->i", normals, dirs)

    sign = np.where(dots > 1e-9, 1.0, np.where(dots < -1e-9, -1.0, 0.0))
    tie = sign == 0.0
    for axis in (2, 0, 1):
        comp = normals[:, axis]
        use = tie & (np.abs(comp) > 1e-9)
        sign[use] = np.sign(comp[use])
        tie &= ~use
    sign[tie] = 1.0
    return normals * sign[:, None], valid


def mean_unit_normal(normals: np.ndarray) -> tuple[np.ndarray, bool]:
    """Normalized arithmetic mean of unit normals.

    Opposing normals can cancel; a near-zero mean falls back to +z and is
    reported via the returned degenerate flag (and logged).
    """
    arr = np.asarray(normals, np.float64).reshape(-1, 3)
    if len(arr) == 0:
        raise ValueError("mean_unit_normal requires at least one normal")
    m = arr.mean(axis=0)
    length = float(np.linalg.norm(m))
    if length <= 1e-9:
        logger.warning("mean normal cancelled (norm %.3e); using +z fallback", length)
        return FALLBACK_NORMAL.copy(), True
    return m / length, False


def normal_to_angles(normal: np.ndarray) -> tuple[float, float]:
    """(elevation, azimuth) of a unit vector, radians.

    elevation = arcsin(z) in [-pi/2, pi/2]; azimuth = atan2(y, x) in
    (-pi, pi], defined as 0 at the poles (x = y = 0).
    """
    x, y, z = (float(v) for v in np.asarray(normal, np.float64).reshape(3))
    elevation = math.asin(min(1.0, max(-1.0, z)))
    if x == 0.0 and y == 0.0:
        return elevation, 0.0
    azimuth = math.atan2(y, x)
    if azimuth == -math.pi:
        azimuth = math.pi
    return elevation, azimuth


def angles_to_direction(elevation: float, azimuth: float) -> np.ndarray:
    ce = math.cos(elevation)
    return np.array([ce * math.cos(azimuth), ce * math.sin(azimuth), math.sin(elevation)])


def bounding_sphere(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Enclosing sphere centered on the AABB midpoint (deterministic)."""
    pts = np.asarray(points, np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise ValueError("bounding_sphere requires a non-empty point set")
    center = (pts.min(axis=0) + pts.max(axis=0)) / 2.0
    radius = float(np.linalg.norm(pts - center, axis=1).max())
    return center, radius


def plan_camera(
    points: np.ndarray,
    elevation: float,
    azimuth: float,
    *,
    fov_deg: float,
    frame_margin: float,
    resolution: tuple[int, int],
    voxel_size: float = 0.1,
) -> CameraPose:
    """Place a camera along (elevation, azimuth) looking at the point set.

    The stand-off distance is frame_margin * r / tan(fov/2) for bounding
    radius r; a single point (r = 0) uses frame_margin * voxel_size. Up is
    +z unless the view direction is nearly vertical, then +x.
    """
    center, radius = bounding_sphere(points)
    direction = angles_to_direction(elevation, azimuth)
    if radius > 0.0:
        distance = frame_margin * radius / math.tan(math.radians(fov_deg) / 2.0)
    else:
        distance = frame_margin * voxel_size
    up = np.array([1.0, 0.0, 0.0]) if abs(direction[2]) > 0.99 else np.array([0.0, 0.0, 1.0])
    return CameraPose(
        position=center + distance * direction,
        look_at=center,
        up=up,
        fov_deg=fov_deg,
        resolution=resolution,
    )


def _view_direction(points: np.ndarray, knn_k: int) -> np.ndarray:
    """Mean oriented normal with fallbacks for degenerate sets."""
    if len(points) < 3:
        logger.debug("fewer than 3 points; using +z view direction")
        return FALLBACK_NORMAL.copy()
    normals, valid = estimate_normals(points, knn_k)
    if not valid.any():
        logger.warning("no valid normals (degenerate geometry); using +z fallback")
        return FALLBACK_NORMAL.copy()
    direction, _ = mean_unit_normal(normals[valid])
    return direction


def plan_view(points: np.ndarray, config: RunConfig) -> tuple[CameraPose, np.ndarray]:
    """Full camera-planning path for a point set.

    Filters outliers, estimates the mean normal, converts it to angles and
    plans the camera. Returns (camera, inlier mask); rendering should use
    only the inlier points.
    """
    points = np.asarray(points, np.float64).reshape(-1, 3)
    keep = filter_outliers(points, config.knn_k, config.outlier_std_mult)
    if not keep.any():
        raise SynthesisError("all points were filtered as outliers")
    pts = points[keep]
    normal = _view_direction(pts, config.knn_k)
    elevation, azimuth = normal_to_angles(normal)
    camera = plan_camera(
        pts, elevation, azimuth,
        fov_deg=config.fov_deg, frame_margin=config.frame_margin,
        resolution=config.render_resolution, voxel_size=config.voxel_size,
    )
    return camera, keep


def _synthesize(points, colors, config: RunConfig, backend) -> Image:
    camera, keep = plan_view(points, config)
    return render_view(points[keep], colors[keep], camera, config.splat_radius_px, backend=backend)


def synthesize_object_view(
    cloud: SegmentedPointCloud, object_id: int, config: RunConfig, backend: str | None = None
) -> Image:
    """Render one object in isolation, viewed along its mean normal."""
    idx = cloud.indices_of(object_id)
    if len(idx) == 0:
        raise ValueError(f"object {object_id} is not present in the cloud")
    try:
        return _synthesize(cloud.positions[idx], cloud.colors[idx], config, backend)
    except SynthesisError as exc:
        raise SynthesisError(f"object {object_id}: {exc}") from None


def synthesize_global_view(
    cloud: SegmentedPointCloud, config: RunConfig, backend: str | None = None
) -> Image:
    """Render the whole frame with the same camera-planning pipeline."""
    if len(cloud) == 0:
        raise ValueError("cannot synthesize a view of an empty cloud")
    return _synthesize(cloud.positions, cloud.colors, config, backend)
