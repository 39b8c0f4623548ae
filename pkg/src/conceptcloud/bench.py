"""Benchmark harness: object-level synthesis versus per-frame baseline.

Both methods run on the identical generated scene with the same
fixed-latency mock encoder settings. Frame capture (orbit rendering) for
the baseline simulates the sensor stream and is reported separately; the
headline totals cover feature computation plus fusion/aggregation, which
is what the two methods actually disagree on.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .baseline import run_baseline
from .encoders import MockHashEncoder
from .model import RunConfig
from .pipeline import FeaturePipeline
from .scene import SceneSpec, generate_orbit_frames, generate_scene
from .voxel import aggregate


@dataclass(frozen=True)
class MethodStats:
    encoder_calls: int
    feature_2d_s: float
    fusion_3d_s: float
    total_s: float
    capture_s: float = 0.0

    def to_dict(self) -> dict:
        return {
            "encoder_calls": self.encoder_calls,
            "feature_2d_s": self.feature_2d_s,
            "fusion_3d_s": self.fusion_3d_s,
            "total_s": self.total_s,
            "capture_s": self.capture_s,
        }


def run_benchmark(
    spec: SceneSpec,
    n_frames: int,
    encoder_latency_s: float,
    config: RunConfig,
    seed: int = 0,
    mock_dim: int = 32,
) -> dict:
    cloud = generate_scene(spec, seed)[0]
    n_objects = len(cloud.object_set())

    # object-level synthesis pipeline
    encoder = MockHashEncoder(mock_dim, latency_s=encoder_latency_s)
    pipe = FeaturePipeline(encoder, config)
    t0 = time.perf_counter()
    step = pipe.process_timestep(cloud)
    t_mid = time.perf_counter()
    aggregate(step.raw_cloud, config.voxel_size)
    t_end = time.perf_counter()
    synthesis = MethodStats(
        encoder_calls=step.encoder_calls,
        feature_2d_s=step.timings["view_synthesis_s"] + step.timings["embedding_s"],
        fusion_3d_s=step.timings["fusion_s"] + (t_end - t_mid),
        total_s=t_end - t0,
    )

    # per-frame baseline on the same scene
    encoder = MockHashEncoder(mock_dim, latency_s=encoder_latency_s)
    t0 = time.perf_counter()
    frames = generate_orbit_frames(cloud, n_frames, config)
    capture_s = time.perf_counter() - t0
    t0 = time.perf_counter()
    result = run_baseline(frames, cloud, encoder, config)
    total = time.perf_counter() - t0
    baseline = MethodStats(
        encoder_calls=result.encoder_calls,
        feature_2d_s=result.timings["embedding_s"],
        fusion_3d_s=result.timings["fusion_s"],
        total_s=total,
        capture_s=capture_s,
    )

    return {
        "n_frames": n_frames,
        "n_objects": n_objects,
        "points": len(cloud),
        "encoder_latency_ms": encoder_latency_s * 1000.0,
        "synthesis": synthesis.to_dict(),
        "baseline": baseline.to_dict(),
        "call_ratio": baseline.encoder_calls / synthesis.encoder_calls,
        "time_ratio": baseline.total_s / synthesis.total_s if synthesis.total_s > 0 else float("inf"),
    }


def format_report(report: dict) -> str:
    lines = [
        f"scene: {report['n_objects']} objects, {report['points']} points; "
        f"{report['n_frames']} frames; encoder latency {report['encoder_latency_ms']:.0f} ms",
        f"{'method':<12} {'calls':>7} {'2D feat (s)':>12} {'3D fuse (s)':>12} {'total (s)':>10}",
    ]
    for name in ("synthesis", "baseline"):
        m = report[name]
        lines.append(
            f"{name:<12} {m['encoder_calls']:>7} {m['feature_2d_s']:>12.3f} "
            f"{m['fusion_3d_s']:>12.3f} {m['total_s']:>10.3f}"
        )
    lines.append(
        f"ratios (baseline/synthesis): calls {report['call_ratio']:.1f}x, "
        f"wall time {report['time_ratio']:.1f}x"
    )
    return "\n".join(lines)
