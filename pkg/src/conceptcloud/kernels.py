"""Kernel dispatch: compiled extension when available, numpy otherwise.

The two backends are interchangeable bit-for-bit. Splatting performs no
arithmetic (per pixel it selects the candidate with minimal (depth, point
index)), and voxel accumulation adds in ascending point-index order in
both paths. Set CONCEPTCLOUD_PURE=1 to force the numpy backend; see
benchmarks/compare_backends.py for throughput numbers.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from . import _kernels as _ext
except ImportError:  # extension not built
    _ext = None

_PURE = os.environ.get("CONCEPTCLOUD_PURE", "") not in ("", "0")


def active_backend() -> str:
    return "compiled" if (_ext is not None and not _PURE) else "numpy"


def available_backends() -> list[str]:
    return ["numpy"] if _ext is None else ["compiled", "numpy"]


def _resolve(backend: str | None) -> str:
    if backend is None:
        return active_backend()
    if backend not in ("compiled", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "compiled" and _ext is None:
        raise RuntimeError("compiled kernels are not available")
    return backend


def splat(
    cols: np.ndarray,
    rows: np.ndarray,
    depth: np.ndarray,
    colors_u8: np.ndarray,
    ids: np.ndarray,
    width: int,
    height: int,
    radius: int,
    background: tuple[int, int, int],
    backend: str | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Rasterize square splats with a z-buffer.

    Returns (image (h, w, 3) uint8, mask (h, w) int64 with -1 where nothing
    was drawn). Depth ties resolve to the lower point index.
    """
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    depth = np.ascontiguousarray(depth, dtype=np.float64)
    colors_u8 = np.ascontiguousarray(colors_u8, dtype=np.uint8)
    ids = np.ascontiguousarray(ids, dtype=np.int64)
    img = np.empty((height, width, 3), np.uint8)
    img[:] = np.asarray(background, np.uint8)
    mask = np.full((height, width), -1, np.int64)
    if _resolve(backend) == "compiled":
        zbuf = np.full((height, width), np.inf, np.float64)
        _ext.splat(cols, rows, depth, colors_u8, ids, width, height, radius, img, mask, zbuf)
        return img, mask

    n = len(cols)
    if n == 0:
        return img, mask
    offs = np.arange(-radius, radius + 1, dtype=np.int64)
    dr, dc = (o.ravel() for o in np.meshgrid(offs, offs, indexing="ij"))
    rows_all = rows[:, None] + dr[None, :]
    cols_all = cols[:, None] + dc[None, :]
    valid = (rows_all >= 0) & (rows_all < height) & (cols_all >= 0) & (cols_all < width)
    point_idx = np.broadcast_to(np.arange(n, dtype=np.int64)[:, None], rows_all.shape)
    pix = (rows_all * width + cols_all)[valid]
    depth_v = np.broadcast_to(depth[:, None], rows_all.shape)[valid]
    idx_v = point_idx[valid]
    if len(pix) == 0:
        return img, mask
    order = np.lexsort((idx_v, depth_v, pix))
    pix_s, idx_s = pix[order], idx_v[order]
    first = np.ones(len(pix_s), bool)
    first[1:] = pix_s[1:] != pix_s[:-1]
    win_pix, win_idx = pix_s[first], idx_s[first]
    img.reshape(-1, 3)[win_pix] = colors_u8[win_idx]
    mask.reshape(-1)[win_pix] = ids[win_idx]
    return img, mask


def voxel_accumulate(
    groups: np.ndarray,
    positions: np.ndarray,
    features: np.ndarray,
    n_groups: int,
    backend: str | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sum positions and features per group, in ascending point-index order.

    Returns (pos_sum (g, 3), feat_sum (g, d), counts (g,)).
    """
    groups = np.ascontiguousarray(groups, dtype=np.int64)
    positions = np.ascontiguousarray(positions, dtype=np.float64)
    features = np.ascontiguousarray(features, dtype=np.float64)
    pos_sum = np.zeros((n_groups, 3), np.float64)
    feat_sum = np.zeros((n_groups, features.shape[1]), np.float64)
    if _resolve(backend) == "compiled":
        counts = np.zeros(n_groups, np.int64)
        _ext.voxel_accumulate(groups, positions, features, pos_sum, feat_sum, counts)
        return pos_sum, feat_sum, counts
    # np.add.at is unbuffered: adds happen element by element in index order
    np.add.at(pos_sum, groups, positions)
    np.add.at(feat_sum, groups, features)
    counts = np.bincount(groups, minlength=n_groups).astype(np.int64)
    return pos_sum, feat_sum, counts
