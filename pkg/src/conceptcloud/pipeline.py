"""Per-timestep feature pipeline with object-level caching.

The expensive operation is the encoder call. Each object is embedded from
one synthesized view, so a frame costs |objects| + 1 calls the first time
and |changed| + 1 afterwards (zero when nothing changed). Cached raw
embeddings of unchanged objects are reused; fused features are cheap
vector math and are refreshed for every object whenever the global
feature changes, since fusion depends on it.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np
from PIL import Image as PILImage

from .encoders import EncoderBase, EncoderError
from .model import ConceptCloud, Image, RunConfig, SegmentedPointCloud
from .scene import detect_changed_objects
from .views import synthesize_global_view, synthesize_object_view

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimestepFeatures:
    """Raw unit embeddings of one timestep: per-object map plus the global."""

    object_features: dict[int, np.ndarray]
    global_feature: np.ndarray


@dataclass(frozen=True)
class TimestepResult:
    raw_cloud: ConceptCloud  # pre-aggregation: every point carries its object's fused feature
    features: TimestepFeatures
    encoder_calls: int
    changed_objects: frozenset[int]
    timings: dict[str, float] = field(default_factory=dict)


def _receive(vec, dimension: int) -> np.ndarray:
    """Validate and L2-normalize an encoder output (encoders are not trusted)."""
    arr = np.asarray(vec, np.float64).reshape(-1)
    if arr.shape != (dimension,):
        raise EncoderError(f"embedding has dimension {arr.shape[0]}, expected {dimension}")
    if not np.all(np.isfinite(arr)):
        raise EncoderError("embedding contains non-finite values")
    norm = float(np.linalg.norm(arr))
    if norm < 1e-12:
        raise EncoderError("embedding has near-zero norm")
    return arr / norm


def embed_image(encoder: EncoderBase, image: Image) -> np.ndarray:
    return _receive(encoder.embed_image(image), encoder.dimension)


def embed_text(encoder: EncoderBase, text: str) -> np.ndarray:
    return _receive(encoder.embed_text(text), encoder.dimension)


def embed_images(encoder: EncoderBase, images: list[Image]) -> list[np.ndarray]:
    """Batch variant; external encoders pipeline these requests."""
    return [_receive(v, encoder.dimension) for v in encoder.embed_images(images)]


def fuse_object_feature(e_o: np.ndarray, e_g: np.ndarray) -> np.ndarray:
    """Blend an object feature with the global feature by importance.

    Importance w = (1 - cos(e_o, e_g)) / 2: an object identical to the
    scene contributes nothing beyond it (w = 0), an opposite one keeps
    only itself (w = 1). Returns normalize(w * e_o + (1 - w) * e_g); a
    cancelled blend falls back to e_o.
    """
    a = np.asarray(e_o, np.float64).reshape(-1)
    b = np.asarray(e_g, np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    cos = float(np.clip(np.dot(a, b), -1.0, 1.0))
    w = (1.0 - cos) / 2.0
    blend = w * a + (1.0 - w) * b
    norm = float(np.linalg.norm(blend))
    if norm < 1e-9:
        return a.copy()
    return blend / norm


def build_concept_update(cloud: SegmentedPointCloud, fused: dict[int, np.ndarray],
                         feature_dim: int | None = None) -> ConceptCloud:
    """Broadcast each object's fused feature onto its points."""
    present = cloud.object_set()
    missing = sorted(present - set(fused))
    if missing:
        raise ValueError(f"missing fused features for objects {missing}")
    if feature_dim is None:
        if not fused:
            raise ValueError("cannot infer feature dimension from an empty feature map")
        feature_dim = len(next(iter(fused.values())))
    features = np.empty((len(cloud), feature_dim), np.float64)
    for oid in present:
        features[cloud.object_ids == oid] = np.asarray(fused[oid], np.float64)
    return ConceptCloud(cloud.positions, features, cloud.object_ids.copy(), feature_dim)


class FeaturePipeline:
    """Owns the embedding cache across timesteps (single-owner, not shared)."""

    def __init__(self, encoder: EncoderBase, config: RunConfig,
                 debug_dir: str | None = None, backend: str | None = None):
        self.encoder = encoder
        self.config = config
        self.debug_dir = debug_dir
        self.backend = backend
        self._prev: SegmentedPointCloud | None = None
        self._object_features: dict[int, np.ndarray] = {}
        self._fused: dict[int, np.ndarray] = {}
        self._global: np.ndarray | None = None

    def _dump(self, image: Image, name: str) -> None:
        if self.debug_dir:
            os.makedirs(self.debug_dir, exist_ok=True)
            PILImage.fromarray(np.asarray(image.pixels), "RGB").save(
                os.path.join(self.debug_dir, name))

    def process_timestep(self, cloud: SegmentedPointCloud) -> TimestepResult:
        """Ingest one frame; returns the pre-aggregation concept cloud."""
        cfg = self.config
        curr_ids = sorted(cloud.object_set())

        if self._prev is None:
            changed = set(curr_ids)
        else:
            changed = detect_changed_objects(self._prev, cloud, cfg.change_epsilon)
        for gone in set(self._object_features) - set(curr_ids):
            self._object_features.pop(gone, None)
            self._fused.pop(gone, None)
        global_needed = self._global is None or bool(changed)

        t0 = time.perf_counter()
        changed_sorted = sorted(changed)
        images = [synthesize_object_view(cloud, oid, cfg, backend=self.backend)
                  for oid in changed_sorted]
        global_view = synthesize_global_view(cloud, cfg, backend=self.backend) if global_needed else None
        t_synth = time.perf_counter() - t0

        for oid, img in zip(changed_sorted, images):
            self._dump(img, f"view_t{cloud.timestep}_obj{oid}.png")
        if global_view is not None:
            self._dump(global_view, f"view_t{cloud.timestep}_global.png")

        t0 = time.perf_counter()
        embeddings = embed_images(self.encoder, images) if images else []
        for oid, vec in zip(changed_sorted, embeddings):  # commit in ascending id order
            self._object_features[oid] = vec
        calls = len(images)
        if global_view is not None:
            self._global = embed_image(self.encoder, global_view)
            calls += 1
        t_embed = time.perf_counter() - t0

        t0 = time.perf_counter()
        assert self._global is not None
        if global_view is not None:
            # e_G changed: refresh every fused feature (no encoder cost)
            self._fused = {oid: fuse_object_feature(self._object_features[oid], self._global)
                           for oid in curr_ids}
        raw = build_concept_update(cloud, self._fused, feature_dim=self.encoder.dimension)
        t_fuse = time.perf_counter() - t0

        self._prev = cloud
        features = TimestepFeatures(
            {oid: self._object_features[oid].copy() for oid in curr_ids},
            self._global.copy(),
        )
        return TimestepResult(
            raw_cloud=raw,
            features=features,
            encoder_calls=calls,
            changed_objects=frozenset(changed),
            timings={"view_synthesis_s": t_synth, "embedding_s": t_embed, "fusion_s": t_fuse},
        )


def process_timestep(prev: FeaturePipeline | None, cloud: SegmentedPointCloud,
                     encoder: EncoderBase, config: RunConfig) -> tuple[TimestepResult, FeaturePipeline]:
    """Functional wrapper: pass the returned pipeline as prev for the next step."""
    pipe = prev if prev is not None else FeaturePipeline(encoder, config)
    return pipe.process_timestep(cloud), pipe
