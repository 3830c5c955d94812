"""CLI surface: subcommands, exit codes, config precedence, manifests."""

import json

import numpy as np
import pytest

from mage.cli import main
from mage.data import Dataset, EmbeddingRecord, read_records, write_records
from mage.rng import Rng


@pytest.fixture
def records_file(tmp_path):
    rng = Rng(0)
    records = [
        EmbeddingRecord(id=f"r{i}", lang="kin", label=i % 3, vector=rng.normal(6))
        for i in range(30)
    ]
    path = tmp_path / "records.jsonl"
    write_records(Dataset.from_records(records), path)
    return path


@pytest.fixture
def tsv_file(tmp_path):
    lines = []
    rng = Rng(1)
    labels = ["negative", "neutral", "positive"]
    for i in range(9):
        vec = ",".join(f"{v:.4f}" for v in rng.normal(5))
        lines.append(f"t{i}\tswa\t{labels[i % 3]}\t{vec}")
    path = tmp_path / "tweets.tsv"
    path.write_text("\n".join(lines) + "\n")
    return path


class TestIngest:
    def test_tsv_to_records_with_summary(self, tsv_file, tmp_path, capsys):
        out_dir = tmp_path / "out"
        code = main(
            ["ingest", "--input", str(tsv_file), "--output", "r.jsonl", "--out-dir", str(out_dir)]
        )
        assert code == 0
        captured = capsys.readouterr().out
        assert "ingested 9 records" in captured
        assert "swa label=0: 3" in captured
        ds = read_records(out_dir / "r.jsonl")
        assert len(ds) == 9 and ds.dimension == 5

    def test_binary_output(self, records_file, tmp_path):
        out_dir = tmp_path / "out"
        code = main(
            ["ingest", "--input", str(records_file), "--output", "r.bin", "--out-dir", str(out_dir)]
        )
        assert code == 0
        assert read_records(out_dir / "r.bin").dimension == 6

    def test_bad_label_exits_2(self, tmp_path, capsys):
        path = tmp_path / "bad.tsv"
        path.write_text("a\tkin\tmaybe\t1.0,2.0\n")
        code = main(["ingest", "--input", str(path), "--out-dir", str(tmp_path)])
        assert code == 2
        assert "maybe" in capsys.readouterr().err

    def test_missing_file_exits_2(self, tmp_path):
        assert main(["ingest", "--input", str(tmp_path / "nope.tsv"), "--out-dir", str(tmp_path)]) == 2


class TestTrainAugAndAugment:
    def test_checkpoints_then_views(self, tmp_path, records_file):
        ck_dir = tmp_path / "ck"
        config = {
            "augmenters": {
                "ae_latent": 2,
                "ae_hidden": [4],
                "ae_epochs": 2,
                "ae_batch": 16,
                "vae_latent": 2,
                "vae_hidden": 4,
                "vae_epochs": 2,
                "vae_batch": 16,
            }
        }
        config_path = tmp_path / "cfg.json"
        config_path.write_text(json.dumps(config))
        code = main(
            ["train-aug", "--data", str(records_file), "--config", str(config_path),
             "--seed", "5", "--out-dir", str(ck_dir)]
        )
        assert code == 0
        assert sorted(p.name for p in ck_dir.iterdir()) == [
            "ae.ckpt", "dae.ckpt", "manifest.json", "vae.ckpt",
        ]

        view_dir = tmp_path / "views"
        code = main(
            ["augment", "--data", str(records_file), "--checkpoints", str(ck_dir),
             "--config", str(config_path), "--seed", "5", "--out-dir", str(view_dir)]
        )
        assert code == 0
        for name in ("view-linear", "view-ae", "view-dae", "view-vae"):
            ds = read_records(view_dir / f"{name}.jsonl")
            assert len(ds) == 30 and ds.dimension == 6

    def test_manifest_records_hashes(self, tmp_path, records_file):
        ck_dir = tmp_path / "ck"
        config_path = tmp_path / "cfg.json"
        config_path.write_text(json.dumps({
            "augmenters": {"ae_latent": 2, "ae_hidden": [4], "ae_epochs": 1, "ae_batch": 16,
                           "vae_latent": 2, "vae_hidden": 4, "vae_epochs": 1, "vae_batch": 16}
        }))
        main(["train-aug", "--data", str(records_file), "--config", str(config_path),
              "--seed", "6", "--out-dir", str(ck_dir)])
        manifest = json.loads((ck_dir / "manifest.json").read_text())
        assert manifest["command"] == "train-aug"
        assert manifest["seed"] == 6
        assert str(records_file) in manifest["inputs"]
        assert all(len(h) == 64 for h in manifest["outputs"].values())
        assert manifest["config"]["plan"]["base_seed"] == 6


class TestAblate:
    def test_synthetic_run_writes_reports(self, tmp_path, capsys):
        out_dir = tmp_path / "out"
        code = main(
            ["ablate", "--synthetic", "--synthetic-dim", "12", "--synthetic-per-class", "20",
             "--shuffles", "1", "--iterations", "1", "--seed", "9", "--out-dir", str(out_dir)]
        )
        assert code == 0
        assert (out_dir / "report.csv").exists()
        assert (out_dir / "report.md").exists()
        lines = (out_dir / "report.csv").read_text().strip().splitlines()
        assert len(lines) == 1 + 10  # header + 10 configs x 1 run

    def test_rerun_same_seed_byte_identical(self, tmp_path):
        outs = []
        for tag in ("a", "b"):
            out_dir = tmp_path / tag
            main(["ablate", "--synthetic", "--synthetic-dim", "12", "--synthetic-per-class", "15",
                  "--shuffles", "1", "--iterations", "1", "--seed", "4", "--out-dir", str(out_dir),
                  "--format", "csv"])
            outs.append((out_dir / "report.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_format_flag_limits_outputs(self, tmp_path):
        out_dir = tmp_path / "out"
        main(["ablate", "--synthetic", "--synthetic-dim", "12", "--synthetic-per-class", "12",
              "--shuffles", "1", "--iterations", "1", "--seed", "2", "--out-dir", str(out_dir),
              "--format", "markdown"])
        assert (out_dir / "report.md").exists()
        assert not (out_dir / "report.csv").exists()

    def test_missing_data_exits_1(self, tmp_path):
        assert main(["ablate", "--out-dir", str(tmp_path)]) == 1


class TestConfigPrecedence:
    def test_file_overrides_defaults_and_flags_override_file(self, tmp_path, records_file):
        config_path = tmp_path / "cfg.json"
        config_path.write_text(json.dumps({"plan": {"base_seed": 100, "n_shuffles": 2}}))
        out_dir = tmp_path / "out"
        # ingest writes the resolved config into the manifest
        main(["ingest", "--input", str(records_file), "--config", str(config_path),
              "--seed", "7", "--out-dir", str(out_dir)])
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["config"]["plan"]["n_shuffles"] == 2  # from file
        assert manifest["config"]["plan"]["base_seed"] == 7  # flag wins over file

    def test_unknown_config_key_exits_1(self, tmp_path, records_file):
        config_path = tmp_path / "cfg.json"
        config_path.write_text(json.dumps({"plan": {"bogus": 1}}))
        code = main(["ingest", "--input", str(records_file), "--config", str(config_path),
                     "--out-dir", str(tmp_path)])
        assert code == 1

    def test_out_dir_env_var(self, tmp_path, records_file, monkeypatch):
        env_dir = tmp_path / "from-env"
        monkeypatch.setenv("MAGE_OUT_DIR", str(env_dir))
        code = main(["ingest", "--input", str(records_file)])
        assert code == 0
        assert (env_dir / "records.jsonl").exists()


class TestGradcheck:
    def test_passes_and_prints_table(self, capsys):
        code = main(["gradcheck", "--seeds", "2"])
        assert code == 0
        out = capsys.readouterr().out
        assert "component" in out and "lstm_unroll" in out and "FAIL" not in out

    def test_unknown_command_exits_1(self):
        assert main(["frobnicate"]) == 1


def _separable_records(tmp_path, n=60, dim=8):
    rng = Rng(3)
    ds = Dataset.from_records(
        [
            EmbeddingRecord(
                id=f"s{i}",
                lang="syn",
                label=i % 3,
                vector=rng.normal(dim) + 8.0 * np.eye(dim)[i % 3],
            )
            for i in range(n)
        ]
    )
    data_path = tmp_path / "d.jsonl"
    write_records(ds, data_path)
    return data_path


class TestTrainClf:
    def test_single_config_on_split_data(self, tmp_path, capsys):
        data_path = _separable_records(tmp_path)
        out_dir = tmp_path / "out"
        code = main(["train-clf", "--data", str(data_path), "--classifier", "softmax",
                     "--seed", "1", "--out-dir", str(out_dir)])
        assert code == 0
        metrics = json.loads((out_dir / "metrics.json").read_text())
        assert metrics["config"] == "original:softmax"
        assert metrics["accuracy"] > 0.9
        # checkpoint and the per-sample prediction table are written
        from mage.checkpoint import load_model

        model = load_model(out_dir / "classifier.ckpt")
        assert model.weights.shape == (3, 8)
        lines = (out_dir / "predictions.csv").read_text().strip().splitlines()
        assert lines[0] == "id,true,predicted,p0,p1,p2"
        assert len(lines) > 1

    def test_attention_run_exports_traces_and_checkpoints(self, tmp_path):
        data_path = _separable_records(tmp_path)
        out_dir = tmp_path / "out"
        config_path = tmp_path / "cfg.json"
        config_path.write_text(json.dumps({
            "attention": {"num_heads": 2},
            "augmenters": {"ae_latent": 2, "ae_hidden": [4], "ae_epochs": 2, "ae_batch": 16,
                           "vae_latent": 2, "vae_hidden": 4, "vae_epochs": 2, "vae_batch": 16},
            "classifiers": {"max_epochs": 5, "learning_rate": 0.01},
            "train_fraction": 0.8,
        }))
        code = main(["train-clf", "--data", str(data_path), "--classifier", "softmax",
                     "--augmenter", "vae", "--attention", "--config", str(config_path),
                     "--seed", "2", "--out-dir", str(out_dir)])
        assert code == 0
        names = sorted(p.name for p in out_dir.iterdir())
        assert names == [
            "attention-traces.csv", "attention.ckpt", "classifier.ckpt",
            "manifest.json", "metrics.json", "predictions.csv",
        ]
        header = (out_dir / "attention-traces.csv").read_text().splitlines()[0]
        assert header == "id,head,view,weight"
