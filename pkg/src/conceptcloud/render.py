"""Perspective point-splat rendering with a z-buffer.

The camera model is a simple look-at pinhole: the field of view applies to
the smaller image axis, pixels are square, and a point's splat is the
(2r+1)^2 square around its projected pixel. Depth ties resolve to the
lower point index, so renders are deterministic for a fixed point order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import Image

BACKGROUND_COLOR = (128, 128, 128)


@dataclass(frozen=True)
class CameraPose:
    position: np.ndarray  # (3,) float64
    look_at: np.ndarray  # (3,) float64
    up: np.ndarray  # (3,) float64, unit
    fov_deg: float
    resolution: tuple[int, int]  # (width, height)

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, np.float64).reshape(3))
        object.__setattr__(self, "look_at", np.asarray(self.look_at, np.float64).reshape(3))
        object.__setattr__(self, "up", np.asarray(self.up, np.float64).reshape(3))
        fwd = self.look_at - self.position
        if np.linalg.norm(fwd) < 1e-12:
            raise ValueError("camera position coincides with look_at")
        if not (0.0 < self.fov_deg < 180.0):
            raise ValueError(f"fov_deg must be in (0, 180), got {self.fov_deg}")
        f = fwd / np.linalg.norm(fwd)
        if np.linalg.norm(np.cross(f, self.up)) < 1e-9:
            raise ValueError("up vector is parallel to the view direction")

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Orthonormal (right, true_up, forward)."""
        f = self.look_at - self.position
        f = f / np.linalg.norm(f)
        r = np.cross(f, self.up)
        r = r / np.linalg.norm(r)
        u = np.cross(r, f)
        return r, u, f

    def focal_px(self) -> float:
        w, h = self.resolution
        return 0.5 * min(w, h) / math.tan(math.radians(self.fov_deg) / 2.0)


def project_points(points: np.ndarray, camera: CameraPose) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project to pixel coordinates; returns (px, py, depth).

    Pixel (c, r) covers [c, c+1) x [r, r+1); the optical axis maps to
    (width/2, height/2). depth <= 0 means behind the camera; such entries
    carry px = py = nan.
    """
    pts = np.asarray(points, np.float64).reshape(-1, 3)
    right, up, fwd = camera.basis()
    q = pts - camera.position
    x = q @ right
    y = q @ up
    z = q @ fwd
    w, h = camera.resolution
    focal = camera.focal_px()
    with np.errstate(divide="ignore", invalid="ignore"):
        px = np.where(z > 0, w / 2.0 + focal * x / z, np.nan)
        py = np.where(z > 0, h / 2.0 - focal * y / z, np.nan)
    return px, py, z


def rasterize(
    points: np.ndarray,
    colors_u8: np.ndarray,
    ids: np.ndarray | None,
    camera: CameraPose,
    splat_radius_px: int,
    backend: str | None = None,
) -> tuple[Image, np.ndarray]:
    """Render points and return (image, per-pixel id mask, -1 = background)."""
    pts = np.asarray(points, np.float64).reshape(-1, 3)
    colors_u8 = np.asarray(colors_u8, np.uint8).reshape(-1, 3)
    if ids is None:
        ids = np.arange(len(pts), dtype=np.int64)
    px, py, z = project_points(pts, camera)
    w, h = camera.resolution
    infront = z > 1e-12
    # park culled points far off-screen; clamp the rest so the int cast is safe
    off = -(10 + 2 * splat_radius_px)
    cols = np.full(len(pts), off, np.int64)
    rows = np.full(len(pts), off, np.int64)
    lim = float(2**40)
    cols[infront] = np.floor(np.clip(px[infront], -lim, lim)).astype(np.int64)
    rows[infront] = np.floor(np.clip(py[infront], -lim, lim)).astype(np.int64)
    img, mask = kernels.splat(
        cols, rows, np.where(infront, z, np.inf), colors_u8, ids,
        w, h, splat_radius_px, BACKGROUND_COLOR, backend=backend,
    )
    return Image(img), mask


def render_view(
    points: np.ndarray,
    colors: np.ndarray,
    camera: CameraPose,
    splat_radius_px: int,
    backend: str | None = None,
) -> Image:
    """Render a view of colored points; colors are floats in [0, 1]."""
    colors_u8 = np.rint(np.asarray(colors, np.float64).reshape(-1, 3) * 255.0).clip(0, 255).astype(np.uint8)
    image, _ = rasterize(points, colors_u8, None, camera, splat_radius_px, backend=backend)
    return image
