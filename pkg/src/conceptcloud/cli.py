"""Command-line interface: map, query, bench, gen-scene.

Exit codes: 0 success, 1 usage error, 2 data error, 3 encoder error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import ply
from .bench import format_report, run_benchmark
from .encoders import EncoderError, EncoderSpecError, parse_encoder_spec
from .model import RunConfig
from .pipeline import FeaturePipeline, embed_text
from .query import export_relevancy, iou, relevancy, threshold_mask
from .scene import SceneManifest, SceneSpec, generate_scene, write_manifest
from .voxel import aggregate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_ENCODER = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _add_common(p: argparse.ArgumentParser, encoder_default: str | None = "mock"):
    p.add_argument("--config", help="JSON file with run-config overrides")
    p.add_argument("--voxel-size", type=float, help="voxel grid size override")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for commands that sample scenes (others ignore it)")
    if encoder_default is not None:
        p.add_argument("--encoder", default=encoder_default,
                       help="mock[:DIM] | fixture:PATH | external:CMD")


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    if getattr(args, "voxel_size", None) is not None:
        cfg = cfg.replaced(voxel_size=args.voxel_size)
    cfg.validate()
    return cfg


def _build_parser() -> _Parser:
    parser = _Parser(prog="conceptcloud", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("map", help="build a concept cloud from a frame manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output concept cloud (.ply)")
    p.add_argument("--report", help="run report path (default: <out>.report.json)")
    p.add_argument("--debug-views", help="directory for rendered view PNGs")
    _add_common(p)

    p = sub.add_parser("query", help="score a text query against a concept cloud")
    p.add_argument("--cloud", required=True, help="concept cloud file from 'map'")
    p.add_argument("--text", required=True)
    p.add_argument("--manifest", help="manifest for label lookup (with --target)")
    p.add_argument("--target", help="ground-truth object label (or numeric id) for IoU")
    p.add_argument("--threshold", type=float, help="mask threshold on normalized scores")
    p.add_argument("--out", help="write a relevancy-colored PLY here")
    _add_common(p)

    p = sub.add_parser("bench", help="compare synthesis against the per-frame baseline")
    p.add_argument("--scene-spec", required=True, help="synthetic scene spec (JSON)")
    p.add_argument("--n-frames", type=int, default=236)
    p.add_argument("--encoder-latency-ms", type=float, default=50.0)
    p.add_argument("--mock-dim", type=int, default=32)
    p.add_argument("--out", help="write the JSON report here")
    _add_common(p, encoder_default=None)

    p = sub.add_parser("gen-scene", help="generate frames + manifest from a scene spec")
    p.add_argument("--spec", required=True, help="synthetic scene spec (JSON)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ascii", action="store_true", help="write ASCII PLY frames")
    return parser


def _cmd_map(args) -> int:
    config = _load_config(args)
    manifest = SceneManifest.from_file(args.manifest)
    with parse_encoder_spec(args.encoder) as encoder:
        pipe = FeaturePipeline(encoder, config, debug_dir=args.debug_views)
        total_calls = 0
        per_step_calls = []
        stage = {"view_synthesis_s": 0.0, "embedding_s": 0.0, "fusion_s": 0.0, "aggregation_s": 0.0}
        final = None
        points_in = 0
        for path in manifest.frame_paths:
            cloud = ply.read_frame(path)
            step = pipe.process_timestep(cloud)
            t0 = time.perf_counter()
            final = aggregate(step.raw_cloud, config.voxel_size)
            stage["aggregation_s"] += time.perf_counter() - t0
            for key in ("view_synthesis_s", "embedding_s", "fusion_s"):
                stage[key] += step.timings[key]
            total_calls += step.encoder_calls
            per_step_calls.append(step.encoder_calls)
            points_in = len(step.raw_cloud)
    assert final is not None
    ply.write_concept_cloud(final, args.out)
    report = {
        "encoder_calls": total_calls,
        "per_step_encoder_calls": per_step_calls,
        "per_stage_seconds": stage,
        "points_in": points_in,
        "voxels_out": len(final),
        "timesteps": len(manifest.frame_paths),
        "out": str(args.out),
    }
    report_path = args.report or (str(args.out) + ".report.json")
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_query(args) -> int:
    config = _load_config(args)
    threshold = args.threshold if args.threshold is not None else config.relevancy_threshold
    cloud = ply.read_concept_cloud(args.cloud)
    with parse_encoder_spec(args.encoder) as encoder:
        q = embed_text(encoder, args.text)
    result = relevancy(cloud, q, query_text=args.text)
    mask = threshold_mask(result, threshold)
    out = {
        "query": args.text,
        "n_points": len(cloud),
        "threshold": threshold,
        "mask_size": int(len(mask)),
        "score_min": float(result.raw_scores.min()),
        "score_max": float(result.raw_scores.max()),
    }
    if args.target is not None:
        if args.manifest:
            manifest = SceneManifest.from_file(args.manifest)
            try:
                target_id = manifest.id_for_label(args.target)
            except KeyError:
                if args.target.isdigit():
                    target_id = int(args.target)
                else:
                    raise
        elif args.target.lstrip("-").isdigit():
            target_id = int(args.target)
        else:
            raise _UsageError("--target needs --manifest to resolve a label")
        out["target_id"] = target_id
        out["iou"] = iou(mask, target_id, cloud)
    if args.out:
        export_relevancy(cloud, result, args.out)
        out["relevancy_ply"] = str(args.out)
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_bench(args) -> int:
    config = _load_config(args)
    spec = SceneSpec.from_file(args.scene_spec)
    report = run_benchmark(
        spec, args.n_frames, args.encoder_latency_ms / 1000.0, config,
        seed=args.seed, mock_dim=args.mock_dim,
    )
    print(format_report(report))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(report, f, indent=2, sort_keys=True)
            f.write("\n")
    return EXIT_OK


def _cmd_gen_scene(args) -> int:
    import os

    spec = SceneSpec.from_file(args.spec)
    clouds = generate_scene(spec, args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    names = []
    for cloud in clouds:
        name = f"frame_{cloud.timestep:04d}.ply"
        ply.write_frame(cloud, os.path.join(args.out_dir, name), binary=not args.ascii)
        names.append(name)
    write_manifest(os.path.join(args.out_dir, "manifest.json"), names, spec.labels())
    print(json.dumps({
        "out_dir": str(args.out_dir),
        "frames": names,
        "objects": len(spec.labels()),
        "points_per_frame": len(clouds[0]),
    }, indent=2, sort_keys=True))
    return EXIT_OK


_COMMANDS = {
    "map": _cmd_map,
    "query": _cmd_query,
    "bench": _cmd_bench,
    "gen-scene": _cmd_gen_scene,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (_UsageError, EncoderSpecError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EncoderError as exc:
        print(f"encoder error: {exc}", file=sys.stderr)
        return EXIT_ENCODER
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
