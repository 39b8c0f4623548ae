"""Naive per-frame fusion baseline.

Every captured frame is embedded in full plus once per visible object
(tight mask crop), so encoder cost grows linearly with the frame count.
This reproduces the cost structure of classic dense-mapping pipelines and
is what the object-level pipeline is benchmarked against.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .encoders import EncoderBase
from .model import ConceptCloud, Image, RunConfig, SegmentedPointCloud
from .pipeline import build_concept_update, embed_image, fuse_object_feature
from .voxel import aggregate

DEFAULT_MIN_PIXELS = 25


@dataclass(frozen=True)
class BaselineResult:
    concept_cloud: ConceptCloud
    encoder_calls: int
    timings: dict[str, float] = field(default_factory=dict)


def _crop(image: Image, mask: np.ndarray, object_id: int) -> Image:
    rows, cols = np.nonzero(mask == object_id)
    r0, r1 = int(rows.min()), int(rows.max())
    c0, c1 = int(cols.min()), int(cols.max())
    return Image(np.asarray(image.pixels)[r0:r1 + 1, c0:c1 + 1])


def run_baseline(
    frames: list[tuple[Image, np.ndarray]],
    cloud: SegmentedPointCloud,
    encoder: EncoderBase,
    config: RunConfig,
    min_pixels: int = DEFAULT_MIN_PIXELS,
) -> BaselineResult:
    """Fuse per-frame features onto the cloud and aggregate.

    Per frame: one full-frame embedding plus one crop embedding per object
    covering at least min_pixels mask pixels. An object's feature is the
    normalized sum of its fused crop features over all frames where it was
    visible; objects never seen get the mean of the frame embeddings.
    """
    if not frames:
        raise ValueError("baseline needs at least one frame")
    cloud_ids = cloud.object_set()
    dim = encoder.dimension
    acc: dict[int, np.ndarray] = {}
    global_acc = np.zeros(dim)
    calls = 0
    t_embed = 0.0
    t_fuse = 0.0

    for image, mask in frames:
        if mask.shape != (image.height, image.width):
            raise ValueError("frame mask is not pixel-aligned with its image")
        ids, counts = np.unique(mask[mask >= 0], return_counts=True)
        unknown = [int(i) for i in ids if int(i) not in cloud_ids]
        if unknown:
            raise ValueError(f"frame references objects {unknown} not present in the cloud")
        t0 = time.perf_counter()
        frame_feature = embed_image(encoder, image)
        calls += 1
        visible = [int(i) for i, c in zip(ids, counts) if c >= min_pixels]
        crop_features = []
        for oid in visible:
            crop_features.append(embed_image(encoder, _crop(image, mask, oid)))
            calls += 1
        t_embed += time.perf_counter() - t0

        t0 = time.perf_counter()
        global_acc += frame_feature
        for oid, crop_feature in zip(visible, crop_features):
            fused = fuse_object_feature(crop_feature, frame_feature)
            if oid not in acc:
                acc[oid] = np.zeros(dim)
            acc[oid] += fused
        t_fuse += time.perf_counter() - t0

    t0 = time.perf_counter()
    global_mean = global_acc / np.linalg.norm(global_acc)
    features: dict[int, np.ndarray] = {}
    for oid in sorted(cloud_ids):
        if oid in acc:
            features[oid] = acc[oid] / np.linalg.norm(acc[oid])
        else:
            features[oid] = global_mean.copy()
    raw = build_concept_update(cloud, features, feature_dim=dim)
    pooled = aggregate(raw, config.voxel_size)
    t_fuse += time.perf_counter() - t0

    return BaselineResult(pooled, calls, {"embedding_s": t_embed, "fusion_s": t_fuse})
