import contextlib
import io
import json
import os
import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from pygeofuse.bench import load_dataset
from pygeofuse.cli import main
from pygeofuse.commands import gradcheck, synth_gen
from pygeofuse.config import SynthGenConfig, TrainConfig
from pygeofuse.errors import ConfigurationError
from pygeofuse.nn import load_checkpoint, load_model
from pygeofuse.utils import read_manifest

# Small enough for a few seconds per run: 16 px images, 4 tokens of width 8
TINY_MODEL = [
    "--set", "model.patch_size=8",
    "--set", "model.d_model=8",
    "--set", "model.depth=1",
    "--set", "model.heads=2",
    "--set", "model.channel_heads=2",
    "--set", "train.batch_size=3",
]


def _quiet(argv):
    with contextlib.redirect_stdout(io.StringIO()), contextlib.redirect_stderr(io.StringIO()):
        return main(argv)


def _files(root: Path):
    """Relative path -> bytes of every output file except logs and the echoed config."""
    out = {}
    for path in sorted(root.rglob("*")):
        relative = path.relative_to(root)
        if path.is_dir() or relative.parts[0] == "logs" or relative.name == "config.yaml":
            continue
        out[str(relative)] = path.read_bytes()
    return out


class TestSynthGen(unittest.TestCase):
    def test_same_seed_same_bytes(self):
        """
        Two runs with the same seed write identical files
        """
        with tempfile.TemporaryDirectory() as tmp_dir:
            tmp_path = Path(tmp_dir)
            for name in ("first", "second"):
                code = _quiet(["synth-gen", "--classes", "3", "--views-per-class", "2",
                               "--test-views-per-class", "1", "--size", "16", "--seed", "5",
                               "--out", str(tmp_path / name)])
                self.assertEqual(code, 0)

            first, second = _files(tmp_path / "first"), _files(tmp_path / "second")
            self.assertEqual(sorted(first), sorted(second), "Different files generated")
            for filename, content in first.items():
                self.assertEqual(content, second[filename], f"Content mismatch in {filename}")

    def test_manifest_matches_dataset(self):
        with tempfile.TemporaryDirectory() as tmp_dir:
            with contextlib.redirect_stdout(io.StringIO()):
                parser = synth_gen(Path(tmp_dir) / "data", classes=2, views_per_class=2, size=16)
            manifest = parser.to_pandas()
            train = parser.to_dataset("train")
            test = load_dataset(parser.to_path(), "test")
            indexed = {tuple(row) for row in train.relative_rows() + test.relative_rows()}

        self.assertEqual(list(manifest.columns), ["class_id", "view", "seed", "path"])
        # per class and split: two drone views plus the shared satellite and roadmap rasters
        self.assertEqual(len(manifest), 2 * 2 * 4)
        self.assertEqual(indexed, {(r.class_id, r.view, r.path) for r in manifest.itertuples(index=False)})

    def test_refuses_non_empty_directory(self):
        with tempfile.TemporaryDirectory() as tmp_dir:
            (Path(tmp_dir) / "keep.txt").write_text("x")
            argv = ["synth-gen", "--classes", "1", "--views-per-class", "1", "--size", "16", "--out", tmp_dir]
            self.assertEqual(_quiet(argv), 1)
            self.assertEqual(_quiet(argv + ["--force"]), 0)
            self.assertTrue((Path(tmp_dir) / "keep.txt").exists())

    def test_validation_errors(self):
        with tempfile.TemporaryDirectory() as tmp_dir:
            out = str(Path(tmp_dir) / "data")
            self.assertEqual(_quiet(["synth-gen", "--classes", "0", "--out", out]), 1)
            self.assertEqual(_quiet(["synth-gen", "--out", out, "--set", "synth.colour=red"]), 1)
            self.assertEqual(_quiet(["synth-gen", "--out", out, "--set", "synth.classes=many"]), 1)
            self.assertEqual(_quiet(["synth-gen"]), 1)
            self.assertFalse(Path(out).exists())

    def test_yaml_config(self):
        with tempfile.TemporaryDirectory() as tmp_dir:
            config_file = Path(tmp_dir) / "synth.yaml"
            config_file.write_text(yaml.safe_dump({"run": {"out_dir": "data"}, "synth": {"classes": 4}}))
            config = SynthGenConfig.from_yaml(config_file, overrides=["synth.size=32"])
        self.assertEqual((config.classes, config.size, config.views_per_class), (4, 32, 8))

        with self.assertRaises(ConfigurationError):
            SynthGenConfig.from_mapping({"synth.classes": 4})
        with self.assertRaises(ConfigurationError):
            SynthGenConfig.from_mapping({"run.out_dir": "data", "synth.views": 4})

    def test_key_value_config_file(self):
        with tempfile.TemporaryDirectory() as tmp_dir:
            tmp_path = Path(tmp_dir)
            config_file = tmp_path / "run.cfg"
            config_file.write_text(
                "# desk test\n"
                "synth.classes=2\n"
                "\n"
                "synth.views_per_class=1\n"
                "synth.size=16\n"
                "synth.seed=3\n"
            )
            out = tmp_path / "data"
            code = _quiet(["synth-gen", "--config", str(config_file), "--out", str(out), "--set", "synth.seed=4"])
            self.assertEqual(code, 0)
            echoed = yaml.safe_load((out / "config.yaml").read_text())
            manifest = read_manifest(out / "manifest.tsv")

            config = SynthGenConfig.from_yaml(config_file, overrides=["run.out_dir=data"])

            config_file.write_text("synth.classes 2\n")
            self.assertEqual(_quiet(["synth-gen", "--config", str(config_file), "--out", str(tmp_path / "x")]), 1)

        self.assertEqual((echoed["synth.classes"], echoed["synth.size"], echoed["synth.seed"]), (2, 16, 4))
        # per class and split: one drone view plus the satellite and roadmap rasters
        self.assertEqual(len(manifest), 2 * 2 * 3)
        self.assertEqual((config.classes, config.views_per_class, config.seed), (2, 1, 3))


class TestGradCheck(unittest.TestCase):
    def test_fusion_scope(self):
        with tempfile.TemporaryDirectory() as tmp_dir:
            out = str(Path(tmp_dir) / "gc")
            self.assertEqual(_quiet(["gradcheck", "--scope", "fusion", "--out", out]), 0)
            table = pd.read_csv(Path(out) / "gradcheck.csv")
        self.assertEqual(list(table.columns), ["scope", "operation", "max_rel_error", "passed"])
        self.assertTrue(table["passed"].all())
        self.assertTrue((table["max_rel_error"] <= 1e-4).all())

    def test_failure_exit_code(self):
        with tempfile.TemporaryDirectory() as tmp_dir:
            out = Path(tmp_dir) / "gc"
            self.assertEqual(_quiet(["gradcheck", "--scope", "attention", "--tol", "0", "--out", str(out)]), 2)
            # the table is written before the failure is raised
            self.assertTrue((out / "gradcheck.csv").is_file())

    def test_parser(self):
        with tempfile.TemporaryDirectory() as tmp_dir:
            with contextlib.redirect_stdout(io.StringIO()):
                parser = gradcheck(Path(tmp_dir) / "gc", scope="core")
            self.assertEqual(parser.failed(), [])
            self.assertTrue(all(row["scope"] == "core" for row in parser.to_list()))


class TestTrainAndEval(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls._tmp = tempfile.TemporaryDirectory()
        cls.tmp_path = Path(cls._tmp.name)
        cls.data = cls.tmp_path / "data"
        code = _quiet(["synth-gen", "--classes", "3", "--views-per-class", "2", "--test-views-per-class", "1",
                       "--size", "16", "--seed", "1", "--out", str(cls.data)])
        assert code == 0

    @classmethod
    def tearDownClass(cls):
        cls._tmp.cleanup()

    def _train(self, name, *extra):
        out = self.tmp_path / name
        code = _quiet(["train", "--data", str(self.data), "--out", str(out), "--epochs", "2", "--seed", "3",
                       *TINY_MODEL, *extra])
        self.assertEqual(code, 0)
        return out

    def test_outputs(self):
        out = self._train("outputs")
        for name in ("model.npz", "loss_log.csv", "config.yaml", "final_eval.json", "final_eval.csv"):
            self.assertTrue((out / name).is_file(), name)
        self.assertEqual(len(list((out / "logs").glob("train_*.log"))), 1)

        loss_log = pd.read_csv(out / "loss_log.csv")
        self.assertEqual(list(loss_log.columns), ["epoch", "step", "L_IT", "L_CE", "L_CC", "L_total", "lr"])
        self.assertEqual(len(loss_log), 2 * 2)
        self.assertTrue(np.isfinite(loss_log[["L_IT", "L_CE", "L_CC", "L_total"]].to_numpy()).all())

        _, meta = load_checkpoint(out / "model.npz")
        self.assertEqual(meta["classes"], ["0000", "0001", "0002"])
        self.assertEqual(meta["modality"], "roadmap")

        report = json.loads((out / "final_eval.json").read_text())
        self.assertEqual([r["direction"] for r in report], ["drone->satellite", "satellite->drone"])
        self.assertEqual(len(report[0]["conditions"]), 10)

    def test_determinism_and_eval(self):
        """
        Two training runs with one seed give identical loss logs and checkpoints,
        and evaluating the checkpoint reproduces the report written after training
        """
        first, second = self._train("run_a"), self._train("run_b")
        for name in ("loss_log.csv", "final_eval.json", "final_eval.csv"):
            self.assertEqual((first / name).read_bytes(), (second / name).read_bytes(), f"Content mismatch in {name}")
        # the npz container stamps its members with the write time; compare the tensors
        state_a, meta_a = load_checkpoint(first / "model.npz")
        state_b, meta_b = load_checkpoint(second / "model.npz")
        self.assertEqual(meta_a, meta_b)
        for name, value in state_a.items():
            np.testing.assert_array_equal(value, state_b[name], err_msg=name)

        evaluated = self.tmp_path / "eval"
        code = _quiet(["eval", "--data", str(self.data), "--checkpoint", str(first / "model.npz"),
                       "--out", str(evaluated)])
        self.assertEqual(code, 0)
        self.assertEqual((evaluated / "report.csv").read_bytes(), (first / "final_eval.csv").read_bytes())
        self.assertEqual((evaluated / "report.json").read_bytes(), (first / "final_eval.json").read_bytes())

    def test_eval_subset(self):
        trained = self._train("subset")
        out = self.tmp_path / "eval_subset"
        code = _quiet(["eval", "--data", str(self.data), "--checkpoint", str(trained / "model.npz"),
                       "--out", str(out), "--directions", "s2d", "--conditions", "Normal,Fog+Rain"])
        self.assertEqual(code, 0)
        report = pd.read_csv(out / "report.csv")
        self.assertEqual(list(report["direction"].unique()), ["satellite->drone"])
        self.assertEqual(list(report["condition"]), ["Normal", "FogRain", "Mean"])

    def test_token_only_ablation(self):
        out = self._train("token_only", "--ablate", "token-only")
        echoed = yaml.safe_load((out / "config.yaml").read_text())
        self.assertEqual(echoed["train.ablate"], "token-only")
        self.assertEqual(echoed["train.lam"], 0.0)
        self.assertIs(echoed["model.channel_fusion"], False)

        model = load_model(out / "model.npz")
        self.assertFalse(model.config.channel_fusion)
        self.assertTrue(model.fusion.gate_w3.frozen)
        self.assertEqual(float(model.fusion.gate_w3.data), 0.0)
        self.assertTrue((pd.read_csv(out / "loss_log.csv")["L_total"] >= 0).all())

    def test_ablation_ignores_token_gate(self):
        # w3 never moves when channel fusion is off, whatever its initial value
        out = self._train("gate", "--ablate", "token-only", "--set", "model.gate_init=0.5")
        model = load_model(out / "model.npz")
        self.assertEqual(float(model.fusion.gate_w3.data), 0.0)
        self.assertNotEqual(float(model.fusion.gate_w1.data), 0.0)

    def test_blank_modality(self):
        out = self._train("blank", "--modality", "blank", "--set", "eval.after_training=false")
        _, meta = load_checkpoint(out / "model.npz")
        self.assertEqual(meta["modality"], "blank")
        self.assertFalse((out / "final_eval.json").exists())

    def test_unknown_set_key(self):
        code = _quiet(["train", "--data", str(self.data), "--out", str(self.tmp_path / "bad"),
                       "--set", "train.learning_rate=0.1"])
        self.assertEqual(code, 1)
        with self.assertRaises(ConfigurationError):
            TrainConfig.from_mapping({"data.root": str(self.data), "run.out_dir": "x", "train.ablate": 3.5}).run()

    def test_missing_inputs(self):
        self.assertEqual(_quiet(["train", "--data", str(self.tmp_path / "nowhere"),
                                 "--out", str(self.tmp_path / "missing")]), 1)
        self.assertEqual(_quiet(["eval", "--data", str(self.data), "--checkpoint", str(self.tmp_path / "none.npz"),
                                 "--out", str(self.tmp_path / "missing_eval")]), 1)


@unittest.skipUnless(os.getenv("GEOFUSE_SLOW") == "1", "set GEOFUSE_SLOW=1 to run the desk-scale studies")
class TestDeskScale(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls._tmp = tempfile.TemporaryDirectory()
        cls.tmp_path = Path(cls._tmp.name)
        cls.data = cls.tmp_path / "desk32"
        code = main(["synth-gen", "--classes", "32", "--views-per-class", "8", "--seed", "0", "--out", str(cls.data)])
        assert code == 0

    @classmethod
    def tearDownClass(cls):
        cls._tmp.cleanup()

    @staticmethod
    def _mean_r1(out: Path) -> float:
        report = json.loads((out / "final_eval.json").read_text())
        return next(r["mean"]["r1"] for r in report if r["direction"] == "drone->satellite")

    def test_fused_beats_satellite_only(self):
        runs = {}
        for modality in ("roadmap", "blank"):
            out = self.tmp_path / f"train_{modality}"
            self.assertEqual(main(["train", "--data", str(self.data), "--out", str(out),
                                   "--modality", modality, "--seed", "0"]), 0)
            runs[modality] = self._mean_r1(out)
            epochs = pd.read_csv(out / "loss_log.csv").groupby("epoch")["L_total"].mean()
            self.assertLess(epochs.iloc[-1], epochs.iloc[0], modality)

        self.assertGreaterEqual(runs["roadmap"] - runs["blank"], 0.05, runs)
        self.assertGreaterEqual(runs["roadmap"], 10 / 32, runs)

    def test_full_not_below_token_only(self):
        out = self.tmp_path / "ablation"
        self.assertEqual(main(["ablation", "--data", str(self.data), "--out", str(out),
                               "--configs", "token_only,token_channel,full", "--seeds", "0,1,2"]), 0)
        summary = pd.read_csv(out / "ablation.csv").set_index(["config", "direction"])
        self.assertEqual(set(summary["seeds"]), {3})
        self.assertGreaterEqual(
            summary.loc[("full", "drone->satellite"), "r1_mean"],
            summary.loc[("token_only", "drone->satellite"), "r1_mean"],
        )


if __name__ == "__main__":
    unittest.main()
