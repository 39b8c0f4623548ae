"""Voxel aggregation: one output point per occupied grid cell.

The grid is anchored at the world origin with half-open cells
[i*v, (i+1)*v). Per cell, the output position is the member centroid and
the output feature is the L2-normalized member-feature sum. Sums run in
ascending original point-index order in both kernel backends, so results
are reproducible bit-for-bit.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .model import ConceptCloud


def voxel_keys(positions: np.ndarray, voxel_size: float) -> np.ndarray:
    """Componentwise floor(p / voxel_size) as int64 rows."""
    if voxel_size <= 0:
        raise ValueError(f"voxel_size must be > 0, got {voxel_size}")
    pts = np.asarray(positions, np.float64).reshape(-1, 3)
    return np.floor(pts / voxel_size).astype(np.int64)


def voxel_key(point, voxel_size: float) -> tuple[int, int, int]:
    i, j, k = voxel_keys(np.asarray(point, np.float64).reshape(1, 3), voxel_size)[0]
    return int(i), int(j), int(k)


def aggregate(raw: ConceptCloud, voxel_size: float, backend: str | None = None) -> ConceptCloud:
    """Pool a concept cloud onto the voxel grid.

    Members of a cell merge into one point: centroid position, normalized
    feature sum (fallback to the lowest-index member's feature if the sum
    cancels), and the unanimous source object or -1. Output rows are
    ordered by voxel key.
    """
    if voxel_size <= 0:
        raise ValueError(f"voxel_size must be > 0, got {voxel_size}")
    n = len(raw)
    if n == 0:
        raise ValueError("cannot aggregate an empty concept cloud")
    keys = voxel_keys(raw.positions, voxel_size)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1).astype(np.int64)
    g = len(uniq)

    pos_sum, feat_sum, counts = kernels.voxel_accumulate(
        inverse, raw.positions, raw.features, g, backend=backend)
    centroids = pos_sum / counts[:, None].astype(np.float64)

    norms = np.linalg.norm(feat_sum, axis=1)
    first_member = np.full(g, n, np.int64)
    np.minimum.at(first_member, inverse, np.arange(n, dtype=np.int64))
    degenerate = norms < 1e-9
    safe = np.where(degenerate, 1.0, norms)
    features = feat_sum / safe[:, None]
    if degenerate.any():
        features[degenerate] = raw.features[first_member[degenerate]]

    id_min = np.full(g, np.iinfo(np.int64).max, np.int64)
    id_max = np.full(g, np.iinfo(np.int64).min, np.int64)
    np.minimum.at(id_min, inverse, raw.source_objects)
    np.maximum.at(id_max, inverse, raw.source_objects)
    sources = np.where(id_min == id_max, id_min, -1)

    return ConceptCloud(centroids, features, sources, raw.feature_dim, voxel_size=voxel_size)
