"""Command-line interface: subcommands, exit codes, end-to-end pipeline."""

import json
import os

import numpy as np
import pytest

from seginpaint import pngio
from seginpaint.cli import run
from seginpaint.synth import read_manifest
from conftest import random_labelmap, random_mask


def tree_bytes(root):
    out = {}
    for dirpath, _, files in os.walk(root):
        for name in sorted(files):
            path = os.path.join(dirpath, name)
            out[os.path.relpath(path, root)] = open(path, "rb").read()
    return out


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cliset") / "ds"
    code = run(["synth", "--count", "8", "--out", str(out), "--seed", "7",
                "--width", "80", "--height", "60", "--threshold", "0.0"])
    assert code == 0
    return out


class TestSynthCommand:
    def test_determinism(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        args = ["synth", "--count", "6", "--seed", "7", "--width", "64",
                "--height", "48", "--threshold", "0.0"]
        assert run(args + ["--out", str(a)]) == 0
        assert run(args + ["--out", str(b)]) == 0
        assert tree_bytes(a) == tree_bytes(b)

    def test_all_rejected_exits_2(self, tmp_path):
        code = run(["synth", "--count", "2", "--out", str(tmp_path / "d"),
                    "--seed", "1", "--width", "64", "--height", "48",
                    "--threshold", "0.99"])
        assert code == 2


class TestInpaintCommand:
    def _sample(self, dataset_dir):
        rec = read_manifest(dataset_dir / "manifest.jsonl")[0]
        return (dataset_dir / rec["dynamic_png"], dataset_dir / rec["mask_png"])

    @pytest.mark.parametrize("method", ["nn", "ns", "pm"])
    def test_classic_methods(self, dataset_dir, tmp_path, method, carla9):
        dyn_png, mask_png = self._sample(dataset_dir)
        out_png = tmp_path / f"{method}.png"
        code = run(["inpaint", "--method", method, "--in", str(dyn_png),
                    "--mask", str(mask_png), "--out", str(out_png),
                    "--iters", "100"])
        assert code == 0
        m = pngio.read_labelmap(dyn_png)
        mask = pngio.read_mask(mask_png)
        out = pngio.read_labelmap(out_png)
        assert (out[~mask] == m[~mask]).all()
        assert carla9.is_static_lut()[out[mask]].all()

    def test_color_render_written(self, dataset_dir, tmp_path):
        dyn_png, mask_png = self._sample(dataset_dir)
        out_png = tmp_path / "o.png"
        rgb_png = tmp_path / "o_rgb.png"
        code = run(["inpaint", "--method", "nn", "--in", str(dyn_png),
                    "--mask", str(mask_png), "--out", str(out_png),
                    "--color-render", str(rgb_png)])
        assert code == 0 and rgb_png.exists()

    def test_learned_requires_ckpt(self, dataset_dir, tmp_path):
        dyn_png, mask_png = self._sample(dataset_dir)
        code = run(["inpaint", "--method", "learned", "--in", str(dyn_png),
                    "--mask", str(mask_png), "--out", str(tmp_path / "o.png")])
        assert code == 1

    def test_unknown_method_is_usage_error(self, dataset_dir, tmp_path):
        dyn_png, mask_png = self._sample(dataset_dir)
        code = run(["inpaint", "--method", "magic", "--in", str(dyn_png),
                    "--mask", str(mask_png), "--out", str(tmp_path / "o.png")])
        assert code == 1

    def test_missing_input_is_data_error(self, tmp_path):
        code = run(["inpaint", "--method", "nn", "--in", str(tmp_path / "nope.png"),
                    "--mask", str(tmp_path / "nope2.png"),
                    "--out", str(tmp_path / "o.png")])
        assert code == 2


class TestTrainAndLearnedInpaint:
    def test_train_then_inpaint(self, dataset_dir, tmp_path):
        ckpt = tmp_path / "g.ckpt"
        code = run(["train", "--manifest", str(dataset_dir / "manifest.jsonl"),
                    "--out", str(ckpt), "--steps", "2", "--batch", "2",
                    "--crop-w", "64", "--crop-h", "48", "--seed", "3"])
        assert code == 0
        assert ckpt.exists() and (tmp_path / "g.ckpt.csv").exists()
        rec = read_manifest(dataset_dir / "manifest.jsonl")[0]
        out_png = tmp_path / "learned.png"
        code = run(["inpaint", "--method", "learned",
                    "--in", str(dataset_dir / rec["dynamic_png"]),
                    "--mask", str(dataset_dir / rec["mask_png"]),
                    "--ckpt", str(ckpt), "--out", str(out_png)])
        assert code == 0 and out_png.exists()


class TestEvalAndReport:
    def _predict_all(self, dataset_dir, pred_dir):
        pred_dir.mkdir(exist_ok=True)
        for rec in read_manifest(dataset_dir / "manifest.jsonl"):
            truth = pngio.read_labelmap(dataset_dir / rec["static_png"])
            pngio.write_labelmap(pred_dir / (rec["id"] + ".png"), truth)

    def test_eval_and_report(self, dataset_dir, tmp_path):
        pred_dir = tmp_path / "pred"
        self._predict_all(dataset_dir, pred_dir)
        out_dir = tmp_path / "eval"
        code = run(["eval", "--manifest", str(dataset_dir / "manifest.jsonl"),
                    "--pred-dir", str(pred_dir), "--method", "gt",
                    "--out", str(out_dir)])
        assert code == 0
        assert (out_dir / "accuracy.csv").exists()
        code = run(["report", "--result", str(out_dir / "accuracy.csv"),
                    "--out", str(tmp_path / "cmp")])
        assert code == 0
        assert (tmp_path / "cmp" / "comparison.csv").exists()

    def test_missing_prediction_exits_3(self, dataset_dir, tmp_path, capsys):
        pred_dir = tmp_path / "pred"
        self._predict_all(dataset_dir, pred_dir)
        first = read_manifest(dataset_dir / "manifest.jsonl")[0]["id"]
        (pred_dir / (first + ".png")).unlink()
        code = run(["eval", "--manifest", str(dataset_dir / "manifest.jsonl"),
                    "--pred-dir", str(pred_dir), "--out", str(tmp_path / "eval")])
        assert code == 3
        assert first in capsys.readouterr().err


class TestTaxonomyCommand:
    def test_list(self, capsys):
        assert run(["taxonomy", "--list"]) == 0
        err = capsys.readouterr().err
        assert "carla9" in err and "cityscapes12" in err

    def test_export_and_reload(self, tmp_path, carla9):
        path = tmp_path / "carla9.json"
        assert run(["taxonomy", "--name", "carla9", "--out", str(path)]) == 0
        from seginpaint.taxonomy import load_taxonomy
        assert load_taxonomy(path) == carla9

    def test_taxonomy_dir_env(self, tmp_path, dataset_dir, monkeypatch, city12):
        tax_dir = tmp_path / "taxes"
        tax_dir.mkdir()
        (tax_dir / "mytax.json").write_text(city12.to_json())
        monkeypatch.setenv("SEGINPAINT_TAXONOMY_DIR", str(tax_dir))
        assert run(["taxonomy", "--name", "mytax", "--out",
                    str(tmp_path / "o.json")]) == 0

    def test_unknown_taxonomy_exits_2(self, tmp_path):
        assert run(["taxonomy", "--name", "missing", "--out",
                    str(tmp_path / "o.json")]) == 2


class TestConfigAndUsage:
    def test_no_command_is_usage_error(self):
        assert run([]) == 1

    def test_config_provides_defaults(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"synth": {"count": 3, "width": 64, "height": 48,
                                             "threshold": 0.0}}))
        out = tmp_path / "d"
        assert run(["--config", str(cfg), "synth", "--out", str(out),
                    "--seed", "2"]) == 0
        records = read_manifest(out / "manifest.jsonl")
        assert 0 < len(records) <= 3
        doc = json.loads((out / "config.json").read_text())
        assert doc["count"] == 3 and doc["width"] == 64

    def test_flags_override_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"synth": {"count": 3, "width": 64, "height": 48,
                                             "threshold": 0.0}}))
        out = tmp_path / "d"
        assert run(["--config", str(cfg), "synth", "--out", str(out),
                    "--seed", "2", "--count", "5"]) == 0
        doc = json.loads((out / "config.json").read_text())
        assert doc["count"] == 5

    def test_unreadable_config_exits_2(self, tmp_path):
        assert run(["--config", str(tmp_path / "nope.json"), "synth",
                    "--out", str(tmp_path / "d")]) == 2
