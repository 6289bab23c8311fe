"""The batch command-line surface: flags, exit codes, manifests."""

import json
import subprocess
import sys

import numpy as np
import pytest

from pvplearn.checkpoint import load_checkpoint
from pvplearn.cli import build_parser, main
from pvplearn.corpus import load_corpus, load_synth

CLASSES_TXT = "bench\nperson\ndog\n"

SUBCOMMANDS = [
    "gen-text",
    "filter-text",
    "train-stage1",
    "train-stage2",
    "infer",
    "eval",
    "ensemble",
    "heatmap",
    "sweep",
    "gradcheck",
    "export-synth",
]


def write_matrix(path, values):
    rows = [",".join(f"{v:.10g}" for v in row) for row in np.atleast_2d(values)]
    path.write_text("".join(r + "\n" for r in rows))


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """One gen-text + train-stage1 + train-stage2 + export-synth chain."""
    root = tmp_path_factory.mktemp("cli")
    (root / "cls.txt").write_text(CLASSES_TXT)
    assert (
        main(
            [
                "gen-text",
                "--classes", str(root / "cls.txt"),
                "--count", "30",
                "--seed", "1",
                "--out", str(root / "c.jsonl"),
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "train-stage1",
                "--corpus", str(root / "c.jsonl"),
                "--classes", str(root / "cls.txt"),
                "--epochs", "5",
                "--lr", "0.1",
                "--seed", "1",
                "--prompt-hw", "8",
                "--embed-dim", "48",
                "--out", str(root / "s1.ckpt"),
                "--log", str(root / "s1.csv"),
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "train-stage2",
                "--corpus", str(root / "c.jsonl"),
                "--ckpt", str(root / "s1.ckpt"),
                "--epochs", "3",
                "--seed", "1",
                "--context-length", "4",
                "--out", str(root / "s2.ckpt"),
            ]
        )
        == 0
    )
    assert (
        main(
            [
                "export-synth",
                "--classes", str(root / "cls.txt"),
                "--like-ckpt", str(root / "s1.ckpt"),
                "--images-per-combo", "2",
                "--n-combos", "6",
                "--seed", "1",
                "--out", str(root / "data.npz"),
            ]
        )
        == 0
    )
    return root


class TestParsing:
    def test_help_exits_zero_everywhere(self, capsys):
        assert main(["--help"]) == 0
        for name in SUBCOMMANDS:
            assert main([name, "--help"]) == 0, name
            assert "--help" in capsys.readouterr().out

    def test_every_subcommand_registered(self):
        parser = build_parser()
        registered = parser._subparsers._group_actions[0].choices
        assert sorted(registered) == sorted(SUBCOMMANDS)

    def test_unknown_flag_is_usage_error(self, capsys):
        assert main(["gradcheck", "--bogus"]) == 1
        err = capsys.readouterr().err
        assert "usage:" in err
        assert "--bogus" in err

    def test_no_subcommand_is_input_error(self, capsys):
        assert main([]) == 1
        assert "usage:" in capsys.readouterr().err

    def test_console_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "pvplearn.cli", "--help"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "gen-text" in proc.stdout


class TestGenAndFilter:
    def test_gen_text_output_and_manifest(self, workdir, capsys):
        texts = load_corpus(workdir / "c.jsonl")
        assert len(texts) == 30
        assert all(t.labels for t in texts)
        manifest = json.loads((workdir / "c.jsonl.manifest.json").read_text())
        assert manifest["command"] == "gen-text"
        assert manifest["seed"] == 1
        assert manifest["config"]["count"] == 30
        assert "sha256" in manifest["inputs"]["classes"]

    def test_gen_text_reruns_bit_identical(self, workdir, tmp_path):
        out = tmp_path / "again.jsonl"
        assert (
            main(
                [
                    "gen-text",
                    "--classes", str(workdir / "cls.txt"),
                    "--count", "30",
                    "--seed", "1",
                    "--out", str(out),
                ]
            )
            == 0
        )
        assert out.read_bytes() == (workdir / "c.jsonl").read_bytes()

    def test_filter_text(self, workdir, tmp_path, capsys):
        raw = tmp_path / "raw.txt"
        raw.write_text(
            "a bench in a park\n"
            "a person walking a dog\n"
            "no matching words at all\n"
            + " ".join(["word"] * 30)
            + "\n"
        )
        out = tmp_path / "kept.jsonl"
        assert (
            main(
                [
                    "filter-text",
                    "--in", str(raw),
                    "--classes", str(workdir / "cls.txt"),
                    "--seed", "2",
                    "--out", str(out),
                ]
            )
            == 0
        )
        assert "kept 2 of 4" in capsys.readouterr().out
        kept = load_corpus(out)
        assert [t.labels for t in kept] == [(0,), (1, 2)]


class TestTraining:
    def test_stage1_checkpoint_and_flags(self, workdir):
        ckpt = load_checkpoint(workdir / "s1.ckpt")
        assert ckpt.stage == 1
        assert ckpt.meta["hyperparams"]["stage1_epochs"] == 5
        assert ckpt.meta["hyperparams"]["stage1_lr"] == 0.1
        assert ckpt.meta["seed"] == 1
        log = (workdir / "s1.csv").read_text().splitlines()
        assert log[0] == "epoch,step,l_vtc,l_visual,l_text,total,lr"

    def test_stage2_checkpoint(self, workdir):
        ckpt = load_checkpoint(workdir / "s2.ckpt")
        assert ckpt.stage == 2
        assert ckpt.meta["hyperparams"]["stage2_epochs"] == 3
        assert ckpt.meta["hyperparams"]["context_length"] == 4

    def test_config_file_with_flag_override(self, workdir, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text("stage2_epochs = 3\nlambda_mix = 0.9\ncontext_length = 4\n")
        out = tmp_path / "s2.ckpt"
        assert (
            main(
                [
                    "train-stage2",
                    "--corpus", str(workdir / "c.jsonl"),
                    "--ckpt", str(workdir / "s1.ckpt"),
                    "--config", str(cfg),
                    "--lambda", "0.8",
                    "--seed", "1",
                    "--out", str(out),
                ]
            )
            == 0
        )
        hp = load_checkpoint(out).meta["hyperparams"]
        assert hp["lambda_mix"] == 0.8  # flag beats file
        assert hp["stage2_epochs"] == 3  # file beats default

    def test_lambda_out_of_range_is_input_error(self, workdir, capsys):
        code = main(
            [
                "train-stage2",
                "--corpus", str(workdir / "c.jsonl"),
                "--ckpt", str(workdir / "s1.ckpt"),
                "--lambda", "1.5",
                "--out", "/tmp/never.ckpt",
            ]
        )
        assert code == 1
        assert "lambda_mix" in capsys.readouterr().err

    def test_unknown_config_key_is_input_error(self, workdir, tmp_path, capsys):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text("warmup_epochs = 3\n")
        code = main(
            [
                "train-stage1",
                "--corpus", str(workdir / "c.jsonl"),
                "--classes", str(workdir / "cls.txt"),
                "--config", str(cfg),
                "--out", str(tmp_path / "x.ckpt"),
            ]
        )
        assert code == 1
        assert "warmup_epochs" in capsys.readouterr().err

    def test_missing_corpus_is_input_error(self, workdir):
        code = main(
            [
                "train-stage1",
                "--corpus", "/nonexistent/c.jsonl",
                "--classes", str(workdir / "cls.txt"),
                "--out", "/tmp/never.ckpt",
            ]
        )
        assert code == 1

    def test_rerun_is_byte_identical(self, workdir, tmp_path):
        out = tmp_path / "s1.ckpt"
        assert (
            main(
                [
                    "train-stage1",
                    "--corpus", str(workdir / "c.jsonl"),
                    "--classes", str(workdir / "cls.txt"),
                    "--epochs", "5",
                    "--lr", "0.1",
                    "--seed", "1",
                    "--prompt-hw", "8",
                    "--embed-dim", "48",
                    "--out", str(out),
                ]
            )
            == 0
        )
        assert out.read_bytes() == (workdir / "s1.ckpt").read_bytes()


class TestScoringCommands:
    def infer_scores(self, workdir, tmp_path, extra=()):
        out = tmp_path / "scores.csv"
        code = main(
            [
                "infer",
                "--images", str(workdir / "data.npz"),
                "--ckpt", str(workdir / "s2.ckpt"),
                "--out", str(out),
                *extra,
            ]
        )
        assert code == 0
        return np.loadtxt(out, delimiter=",", ndmin=2)

    def test_infer_writes_scores(self, workdir, tmp_path):
        scores = self.infer_scores(workdir, tmp_path)
        ds = load_synth(workdir / "data.npz")
        assert scores.shape == (ds.n_images, 3)

    def test_infer_alpha_channels(self, workdir, tmp_path):
        fused = self.infer_scores(workdir, tmp_path, extra=["--alpha", "0.5"])
        visual = self.infer_scores(workdir, tmp_path, extra=["--alpha", "1.0"])
        text = self.infer_scores(workdir, tmp_path, extra=["--alpha", "0.0"])
        assert np.allclose(fused, 0.5 * visual + 0.5 * text, atol=1e-9)

    def test_eval_perfect_toy(self, tmp_path, capsys):
        write_matrix(tmp_path / "s.csv", np.array([[0.9, 0.1], [0.2, 0.8]]))
        write_matrix(tmp_path / "l.csv", np.array([[1, 0], [0, 1]]))
        assert (
            main(
                [
                    "eval",
                    "--scores", str(tmp_path / "s.csv"),
                    "--labels", str(tmp_path / "l.csv"),
                ]
            )
            == 0
        )
        assert "mAP 1.0" in capsys.readouterr().out

    def test_eval_per_class(self, tmp_path, capsys):
        write_matrix(tmp_path / "s.csv", np.array([[0.9, 0.1], [0.2, 0.8]]))
        write_matrix(tmp_path / "l.csv", np.array([[1, 0], [0, 0]]))
        assert (
            main(
                [
                    "eval",
                    "--scores", str(tmp_path / "s.csv"),
                    "--labels", str(tmp_path / "l.csv"),
                    "--per-class",
                ]
            )
            == 0
        )
        out = capsys.readouterr().out
        assert "AP[0] 1.0" in out
        assert "AP[1] skipped (no positives)" in out

    def test_eval_without_positives_is_runtime_failure(self, tmp_path, capsys):
        write_matrix(tmp_path / "s.csv", np.array([[0.9, 0.1]]))
        write_matrix(tmp_path / "l.csv", np.array([[0, 0]]))
        code = main(
            [
                "eval",
                "--scores", str(tmp_path / "s.csv"),
                "--labels", str(tmp_path / "l.csv"),
            ]
        )
        assert code == 2
        assert "runtime failure" in capsys.readouterr().err

    def test_ensemble(self, tmp_path):
        write_matrix(tmp_path / "a.csv", np.array([[0.0, 2.0], [4.0, 2.0]]))
        write_matrix(tmp_path / "b.csv", np.array([[1.0, 1.0], [1.0, 3.0]]))
        out = tmp_path / "f.csv"
        assert (
            main(
                [
                    "ensemble",
                    "--a", str(tmp_path / "a.csv"),
                    "--b", str(tmp_path / "b.csv"),
                    "--weight", "0.5",
                    "--out", str(out),
                ]
            )
            == 0
        )
        fused = np.loadtxt(out, delimiter=",")
        expected = 0.5 * np.array([[0.0, 0.5], [1.0, 0.5]]) + 0.5 * np.array(
            [[0.0, 0.0], [0.0, 1.0]]
        )
        assert np.allclose(fused, expected)

    def test_heatmap(self, workdir, tmp_path):
        out = tmp_path / "h.pgm"
        csv_out = tmp_path / "h.csv"
        assert (
            main(
                [
                    "heatmap",
                    "--images", str(workdir / "data.npz"),
                    "--index", "0",
                    "--ckpt", str(workdir / "s2.ckpt"),
                    "--class-index", "0",
                    "--out", str(out),
                    "--csv-out", str(csv_out),
                ]
            )
            == 0
        )
        assert out.read_bytes().startswith(b"P5\n4 4\n255\n")
        assert np.loadtxt(csv_out, delimiter=",").shape == (4, 4)

    def test_heatmap_bad_index(self, workdir, tmp_path):
        code = main(
            [
                "heatmap",
                "--images", str(workdir / "data.npz"),
                "--index", "999",
                "--ckpt", str(workdir / "s2.ckpt"),
                "--class-index", "0",
                "--out", str(tmp_path / "h.pgm"),
            ]
        )
        assert code == 1


class TestSweepAndGradcheck:
    def test_sweep_sequential_and_parallel_agree(self, workdir, tmp_path):
        grid = tmp_path / "grid.toml"
        grid.write_text('alpha = [0.0, 1.0]\n')
        base = tmp_path / "base.toml"
        base.write_text(
            "seed = 1\nbatch_size = 16\nstage1_epochs = 2\nstage2_epochs = 1\n"
            "prompt_hw = 8\ncontext_length = 4\n"
        )
        outs = []
        for jobs in ("1", "2"):
            out = tmp_path / f"sweep_{jobs}.csv"
            assert (
                main(
                    [
                        "sweep",
                        "--corpus", str(workdir / "c.jsonl"),
                        "--classes", str(workdir / "cls.txt"),
                        "--images", str(workdir / "data.npz"),
                        "--grid", str(grid),
                        "--config", str(base),
                        "--embed-dim", "48",
                        "--jobs", jobs,
                        "--out", str(out),
                    ]
                )
                == 0
            )
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
        header = outs[0].decode().splitlines()[0]
        assert header == "alpha,map,status,error"

    def test_sweep_isolates_bad_point(self, workdir, tmp_path):
        grid = tmp_path / "grid.toml"
        grid.write_text('alpha = [0.5, 7.0]\n')  # second value out of range
        base = tmp_path / "base.toml"
        base.write_text(
            "seed = 1\nbatch_size = 16\nstage1_epochs = 1\nstage2_epochs = 1\n"
            "prompt_hw = 8\ncontext_length = 4\n"
        )
        out = tmp_path / "sweep.csv"
        assert (
            main(
                [
                    "sweep",
                    "--corpus", str(workdir / "c.jsonl"),
                    "--classes", str(workdir / "cls.txt"),
                    "--images", str(workdir / "data.npz"),
                    "--grid", str(grid),
                    "--config", str(base),
                    "--embed-dim", "48",
                    "--out", str(out),
                ]
            )
            == 0
        )
        rows = out.read_text().splitlines()
        assert rows[1].startswith("0.5,") and ",ok," in rows[1]
        assert rows[2].startswith("7.0,") and ",error," in rows[2]

    def test_gradcheck_passes(self, capsys):
        assert main(["gradcheck", "--seed", "3"]) == 0
        assert "max relative error" in capsys.readouterr().out

    def test_gradcheck_impossible_tolerance_fails(self, capsys):
        assert main(["gradcheck", "--seed", "3", "--tol", "1e-18"]) == 2


class TestExportSynth:
    def test_like_ckpt_matches_training_encoders(self, workdir):
        ds = load_synth(workdir / "data.npz")
        assert ds.images.shape == (12, 16, 16, 3)
        assert ds.class_names == ["bench", "person", "dog"]
        manifest = json.loads((workdir / "data.npz.manifest.json").read_text())
        ckpt = load_checkpoint(workdir / "s1.ckpt")
        assert manifest["config"]["encoder_digest"] == ckpt.meta["encoder_digest"]

    def test_standalone_encoder_flags(self, workdir, tmp_path):
        out = tmp_path / "d.npz"
        assert (
            main(
                [
                    "export-synth",
                    "--classes", str(workdir / "cls.txt"),
                    "--embed-dim", "48",
                    "--images-per-combo", "1",
                    "--n-combos", "3",
                    "--seed", "5",
                    "--out", str(out),
                ]
            )
            == 0
        )
        ds = load_synth(out)
        assert ds.images.shape == (3, 16, 16, 3)
