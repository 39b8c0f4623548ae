import json

import numpy as np
import pytest

from conceptcloud import ply
from conceptcloud.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main

from conftest import fixture_scene_dict


@pytest.fixture
def scene_dir(tmp_path):
    """Two-object scene written to disk: frames + manifest."""
    spec = {
        "points_per_object": 150,
        "timesteps": 2,
        "objects": [
            {"label": "banana", "kind": "cylinder", "center": [0, 0, 0.2], "size": 0.4,
             "color": [230 / 255, 214 / 255, 28 / 255]},
            {"label": "apple", "kind": "sphere", "center": [1.5, 0, 0.2], "size": 0.4,
             "color": [200 / 255, 30 / 255, 30 / 255]},
        ],
    }
    spec_path = tmp_path / "scene.json"
    spec_path.write_text(json.dumps(spec))
    out_dir = tmp_path / "frames"
    assert main(["gen-scene", "--spec", str(spec_path), "--out-dir", str(out_dir)]) == EXIT_OK
    return out_dir


class TestGenScene:
    def test_writes_frames_and_manifest(self, scene_dir):
        names = sorted(p.name for p in scene_dir.iterdir())
        assert names == ["frame_0000.ply", "frame_0001.ply", "manifest.json"]
        manifest = json.loads((scene_dir / "manifest.json").read_text())
        assert manifest["labels"] == {"1": "banana", "2": "apple"}

    def test_same_seed_gives_identical_bytes(self, tmp_path):
        spec_path = tmp_path / "scene.json"
        spec_path.write_text(json.dumps(fixture_scene_dict(points_per_object=60)))
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["gen-scene", "--spec", str(spec_path), "--out-dir", str(out),
                         "--seed", "11"]) == EXIT_OK
            outs.append(out)
        for fname in ("frame_0000.ply", "manifest.json"):
            assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()

    def test_invalid_spec_is_a_data_error(self, tmp_path, capsys):
        spec_path = tmp_path / "bad.json"
        spec_path.write_text(json.dumps({"objects": []}))
        assert main(["gen-scene", "--spec", str(spec_path), "--out-dir", str(tmp_path / "x")]) == EXIT_DATA


class TestMap:
    def test_map_reports_call_counts(self, scene_dir, tmp_path, capsys):
        out = tmp_path / "cloud.ply"
        code = main(["map", "--manifest", str(scene_dir / "manifest.json"),
                     "--out", str(out), "--encoder", "mock:16"])
        assert code == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        # 2 objects + global at t=0; second frame is identical, so 0 calls
        assert report["per_step_encoder_calls"] == [3, 0]
        assert report["encoder_calls"] == 3
        assert report["voxels_out"] > 0
        assert out.exists()
        assert (tmp_path / "cloud.ply.report.json").exists()

    def test_map_is_deterministic(self, scene_dir, tmp_path):
        outs = []
        for name in ("one.ply", "two.ply"):
            out = tmp_path / name
            assert main(["map", "--manifest", str(scene_dir / "manifest.json"),
                         "--out", str(out), "--encoder", "mock:16"]) == EXIT_OK
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_missing_manifest_names_path(self, tmp_path, capsys):
        missing = tmp_path / "nope" / "manifest.json"
        assert main(["map", "--manifest", str(missing), "--out", str(tmp_path / "o.ply")]) == EXIT_DATA
        assert "nope" in capsys.readouterr().err

    def test_voxel_size_override(self, scene_dir, tmp_path, capsys):
        out = tmp_path / "cloud.ply"
        assert main(["map", "--manifest", str(scene_dir / "manifest.json"),
                     "--out", str(out), "--encoder", "mock:16",
                     "--voxel-size", "0.5"]) == EXIT_OK
        cloud = ply.read_concept_cloud(out)
        assert cloud.voxel_size == 0.5


class TestQuery:
    @pytest.fixture
    def mapped(self, scene_dir, tmp_path, fixture_encoder_path):
        out = tmp_path / "cloud.ply"
        assert main(["map", "--manifest", str(scene_dir / "manifest.json"),
                     "--out", str(out), "--encoder", f"fixture:{fixture_encoder_path}"]) == EXIT_OK
        return out

    def test_direct_label_query_reaches_full_iou(self, mapped, scene_dir, tmp_path,
                                                 fixture_encoder_path, capsys):
        code = main(["query", "--cloud", str(mapped), "--text", "banana",
                     "--encoder", f"fixture:{fixture_encoder_path}",
                     "--manifest", str(scene_dir / "manifest.json"),
                     "--target", "banana", "--out", str(tmp_path / "rel.ply")])
        assert code == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert out["iou"] == 1.0
        assert (tmp_path / "rel.ply").exists()

    def test_zero_threshold_masks_everything(self, mapped, fixture_encoder_path, capsys):
        assert main(["query", "--cloud", str(mapped), "--text", "banana",
                     "--encoder", f"fixture:{fixture_encoder_path}",
                     "--threshold", "0"]) == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert out["mask_size"] == out["n_points"]

    def test_query_empty_cloud_is_data_error(self, tmp_path, capsys):
        from conceptcloud.model import ConceptCloud
        empty = ConceptCloud(np.empty((0, 3)), np.empty((0, 8)), np.empty(0, np.int64), 8)
        path = tmp_path / "empty.ply"
        ply.write_concept_cloud(empty, path)
        assert main(["query", "--cloud", str(path), "--text", "x",
                     "--encoder", "mock:8"]) == EXIT_DATA

    def test_target_without_manifest_is_usage_error(self, mapped, capsys):
        assert main(["query", "--cloud", str(mapped), "--text", "banana",
                     "--encoder", "mock:8", "--target", "banana"]) == EXIT_USAGE


class TestBench:
    def test_one_frame_one_object_is_break_even(self, tmp_path, capsys):
        spec_path = tmp_path / "scene.json"
        spec_path.write_text(json.dumps({
            "points_per_object": 100,
            "objects": [{"label": "solo", "kind": "sphere", "center": [0, 0, 0.2],
                         "size": 0.4, "color": [0.9, 0.1, 0.1]}],
        }))
        report_path = tmp_path / "report.json"
        assert main(["bench", "--scene-spec", str(spec_path), "--n-frames", "1",
                     "--encoder-latency-ms", "0", "--out", str(report_path)]) == EXIT_OK
        report = json.loads(report_path.read_text())
        assert report["synthesis"]["encoder_calls"] == 2
        assert report["baseline"]["encoder_calls"] == 2
        assert report["call_ratio"] == pytest.approx(1.0)

    def test_small_benchmark_report(self, tmp_path, capsys):
        spec_path = tmp_path / "scene.json"
        spec_path.write_text(json.dumps(fixture_scene_dict(points_per_object=80)))
        report_path = tmp_path / "report.json"
        code = main(["bench", "--scene-spec", str(spec_path), "--n-frames", "3",
                     "--encoder-latency-ms", "0", "--mock-dim", "8",
                     "--out", str(report_path)])
        assert code == EXIT_OK
        report = json.loads(report_path.read_text())
        assert report["synthesis"]["encoder_calls"] == 7  # 6 objects + global
        assert report["baseline"]["encoder_calls"] == 3 * 7
        assert report["call_ratio"] == pytest.approx(3.0)
        assert "calls" in capsys.readouterr().out


class TestExitCodes:
    def test_unknown_flag_is_usage(self, capsys):
        assert main(["map", "--bogus"]) == EXIT_USAGE

    def test_unknown_subcommand_is_usage(self, capsys):
        assert main(["frobnicate"]) == EXIT_USAGE

    def test_unknown_encoder_spec_is_usage(self, scene_dir, tmp_path, capsys):
        assert main(["map", "--manifest", str(scene_dir / "manifest.json"),
                     "--out", str(tmp_path / "o.ply"), "--encoder", "quantum"]) == EXIT_USAGE

    def test_bad_config_file_is_data_error(self, scene_dir, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"voxel_size": -1}))
        assert main(["map", "--manifest", str(scene_dir / "manifest.json"),
                     "--out", str(tmp_path / "o.ply"), "--config", str(cfg)]) == EXIT_DATA
