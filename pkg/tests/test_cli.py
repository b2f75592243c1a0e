import csv
import json

import numpy as np
import pytest

from srattack.cli import dispatch
from srattack.engine import write_weights
from srattack.image import BoundingBox, save_image
from srattack.manifest import (
    ManifestEntry,
    SplitSpec,
    attach_boxes,
    build_manifest,
    write_manifest,
)

from conftest import make_png_tree
from test_engine import tiny_model, zero_model


@pytest.fixture
def frame_fixture(tmp_path):
    """Small frame tree + manifest with boxes, ready for the attack command."""
    root = tmp_path / "frames"
    vids = make_png_tree(root, ["original", "Deepfakes"], 2, 3, size=20)
    split = SplitSpec(train=(vids[0],), test=(vids[1],))
    entries = build_manifest(root, split, "Deepfakes", frames_per_video=3, seed=5)
    entries = attach_boxes(entries, {e.path: BoundingBox(2, 2, 12, 12) for e in entries})
    manifest = tmp_path / "manifest.csv"
    write_manifest(entries, manifest)
    return root, manifest, entries


def write_score_files(tmp_path, entries, plain_pristine, plain_fake, att_pristine, att_fake):
    plain = tmp_path / "scores_plain.csv"
    attacked = tmp_path / "scores_attacked.csv"
    for path, pristine_score, fake_score in (
        (plain, plain_pristine, plain_fake),
        (attacked, att_pristine, att_fake),
    ):
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["image_path", "score"])
            for e in entries:
                w.writerow([e.path, pristine_score if e.label == "pristine" else fake_score])
    return plain, attacked


class TestModelInspect:
    def test_valid_file(self, tmp_path, capsys):
        weights = tmp_path / "m.srw"
        write_weights(tiny_model(scale=2, n_feats=3, n_resblocks=2, res_scale=0.5), weights)
        assert dispatch(["model", "inspect", "--weights", str(weights)]) == 0
        out = capsys.readouterr().out
        assert "x2" in out
        assert "n_feats:     3" in out
        assert "n_resblocks: 2" in out
        assert "res_scale:   0.5" in out
        assert "rgb_mean" in out

    def test_bad_file_exits_3(self, tmp_path):
        bad = tmp_path / "bad.srw"
        bad.write_bytes(b"JUNKJUNKJUNK")
        assert dispatch(["model", "inspect", "--weights", str(bad)]) == 3

    def test_missing_file_exits_3(self, tmp_path):
        assert dispatch(["model", "inspect", "--weights", str(tmp_path / "no.srw")]) == 3


class TestUsageErrors:
    def test_unknown_flag(self):
        assert dispatch(["model", "inspect", "--wrong", "x"]) == 2

    def test_unknown_subcommand(self):
        assert dispatch(["frobnicate"]) == 2

    def test_attack_edsr_without_weights(self, frame_fixture, tmp_path):
        root, manifest, _ = frame_fixture
        code = dispatch(
            ["attack", "--manifest", str(manifest), "--backend", "edsr",
             "--out", str(tmp_path / "out"), "--root", str(root)]
        )
        assert code == 2

    def test_attack_bicubic_with_weights(self, frame_fixture, tmp_path):
        root, manifest, _ = frame_fixture
        code = dispatch(
            ["attack", "--manifest", str(manifest), "--backend", "bicubic",
             "--weights", "w.srw", "--out", str(tmp_path / "out"), "--root", str(root)]
        )
        assert code == 2


class TestManifestCommands:
    def test_build_and_validate(self, tmp_path, capsys):
        root = tmp_path / "frames"
        vids = make_png_tree(root, ["original", "FaceSwap"], 3, 4, size=16)
        split_file = tmp_path / "split.json"
        split_file.write_text(json.dumps({"train": vids[:2], "test": vids[2:]}))
        out = tmp_path / "m.csv"
        code = dispatch(
            ["--seed", "9", "manifest", "build", "--root", str(root), "--split",
             str(split_file), "--method", "FaceSwap", "--frames-per-video", "3",
             "--out", str(out)]
        )
        assert code == 0
        assert out.exists()
        assert (tmp_path / "m.run.json").exists()
        run = json.loads((tmp_path / "m.run.json").read_text())
        assert run["subcommand"] == "manifest build"
        assert run["config"]["seed"] == 9
        assert "version" in run and "timestamp" in run

        # no boxes attached -> validation reports findings -> exit 1
        assert dispatch(["manifest", "validate", "--manifest", str(out), "--root", str(root)]) == 1
        text = capsys.readouterr().out
        assert "no face box" in text

    def test_validate_ok_exit_0(self, frame_fixture):
        root, manifest, _ = frame_fixture
        assert dispatch(["manifest", "validate", "--manifest", str(manifest),
                         "--root", str(root)]) == 0

    def test_build_missing_root_exits_3(self, tmp_path):
        split_file = tmp_path / "split.json"
        split_file.write_text(json.dumps({"train": ["a"], "test": ["b"]}))
        code = dispatch(
            ["manifest", "build", "--root", str(tmp_path / "nope"), "--split",
             str(split_file), "--method", "FaceSwap", "--out", str(tmp_path / "m.csv")]
        )
        assert code == 3


class TestAttackCommand:
    def test_bicubic_run(self, frame_fixture, tmp_path):
        root, manifest, entries = frame_fixture
        out = tmp_path / "attacked"
        code = dispatch(
            ["--jobs", "2", "attack", "--manifest", str(manifest), "--k", "2",
             "--backend", "bicubic", "--out", str(out), "--root", str(root),
             "--log-similarity"]
        )
        assert code == 0
        assert (out / "attack_log.csv").exists()
        assert (out / "run_manifest.json").exists()
        for e in entries:
            assert (out / e.path).exists()
        run = json.loads((out / "run_manifest.json").read_text())
        assert run["config"]["k"] == 2
        assert run["config"]["weights_sha256"] is None

    def test_edsr_run_records_digest(self, frame_fixture, tmp_path):
        root, manifest, _ = frame_fixture
        weights = tmp_path / "w.srw"
        write_weights(zero_model(scale=2), weights)
        out = tmp_path / "attacked"
        code = dispatch(
            ["attack", "--manifest", str(manifest), "--backend", "edsr",
             "--weights", str(weights), "--out", str(out), "--root", str(root)]
        )
        assert code == 0
        run = json.loads((out / "run_manifest.json").read_text())
        assert len(run["config"]["weights_sha256"]) == 64

    def test_collision_exits_3(self, frame_fixture, tmp_path):
        root, manifest, _ = frame_fixture
        out = tmp_path / "attacked"
        args = ["attack", "--manifest", str(manifest), "--out", str(out), "--root", str(root)]
        assert dispatch(args) == 0
        assert dispatch(args) == 3

    def test_missing_manifest_exits_3(self, tmp_path):
        assert dispatch(["attack", "--manifest", str(tmp_path / "no.csv"),
                         "--out", str(tmp_path / "o")]) == 3


class TestSimilarityCommand:
    def test_report_written(self, tmp_path, rng, capsys):
        a = tmp_path / "a.png"
        b = tmp_path / "b.png"
        save_image(np.floor(rng.random((8, 8, 3)) * 256), a)
        save_image(np.floor(rng.random((8, 8, 3)) * 256), b)
        pairs = tmp_path / "pairs.csv"
        pairs.write_text(f"original,attacked,group\n{a},{b},Pristine\n")
        out = tmp_path / "sim.csv"
        assert dispatch(["similarity", "--pairs", str(pairs), "--out", str(out)]) == 0
        assert out.exists()
        assert (tmp_path / "sim.run.json").exists()
        assert "Pristine" in capsys.readouterr().out

    def test_bad_pairs_header_exits_3(self, tmp_path):
        pairs = tmp_path / "pairs.csv"
        pairs.write_text("x,y\n")
        assert dispatch(["similarity", "--pairs", str(pairs), "--out", str(tmp_path / "s.csv")]) == 3


class TestEvaluateCommand:
    def test_fake_only_rows_share_fpr(self, frame_fixture, tmp_path):
        root, manifest, entries = frame_fixture
        plain, attacked = write_score_files(tmp_path, entries, 0.2, 0.9, 0.4, 0.6)
        out = tmp_path / "eval"
        code = dispatch(
            ["evaluate", "--manifest", str(manifest), "--scores-plain", str(plain),
             "--scores-attacked", str(attacked), "--setup", "fake-only",
             "--out", str(out), "--tag", "toy"]
        )
        assert code == 0
        with open(out / "report.csv") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 2
        assert rows[0]["model"] == "toy"
        assert rows[0]["fpr"] == rows[1]["fpr"]
        assert {r["sr"] for r in rows} == {"0", "1"}
        assert (out / "roc_toy_Deepfakes_nosr.csv").exists()
        assert (out / "roc_toy_Deepfakes_sr.csv").exists()
        assert (out / "run_manifest.json").exists()

    def test_roc_files_parse(self, frame_fixture, tmp_path):
        root, manifest, entries = frame_fixture
        plain, attacked = write_score_files(tmp_path, entries, 0.1, 0.8, 0.3, 0.7)
        out = tmp_path / "eval"
        dispatch(
            ["evaluate", "--manifest", str(manifest), "--scores-plain", str(plain),
             "--scores-attacked", str(attacked), "--setup", "both", "--out", str(out)]
        )
        with open(out / "roc_detector_Deepfakes_sr.csv") as f:
            points = [(float(r["fpr"]), float(r["tpr"])) for r in csv.DictReader(f)]
        assert points[0] == (0.0, 0.0) and points[-1] == (1.0, 1.0)

    def test_score_gap_exits_3(self, frame_fixture, tmp_path):
        root, manifest, entries = frame_fixture
        plain, attacked = write_score_files(tmp_path, entries[:-1], 0.2, 0.9, 0.4, 0.6)
        code = dispatch(
            ["evaluate", "--manifest", str(manifest), "--scores-plain", str(plain),
             "--scores-attacked", str(attacked), "--setup", "both",
             "--out", str(tmp_path / "eval")]
        )
        assert code == 3
