"""Pipeline contracts: config parsing, the checkpoint container, staged
artifacts, determinism, stage isolation, and the CLI."""

import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from dosids import pipeline as pl
from dosids.checkpoint import file_digest, load_arrays, save_arrays
from dosids.cli import main as cli_main
from conftest import cluster_dataset


def write_flow_csv(path, seed=0, counts=(30, 30, 30, 10, 10), n_features=8):
    """Blob data dressed up as a flow CSV: numeric columns plus one
    categorical, one socket-ish and one constant column."""
    ds = cluster_dataset(seed, list(counts), n_features=n_features)
    rng = np.random.default_rng(seed + 1)
    protos = rng.choice(["tcp", "udp", "icmp"], ds.n_rows)
    with open(path, "w", encoding="utf-8") as fh:
        names = [f"f{i}" for i in range(n_features)]
        fh.write("src_ip," + ",".join(names) + ",proto,const_col,attack_cat\n")
        for r in range(ds.n_rows):
            feats = ",".join(repr(float(v)) for v in ds.features[r])
            fh.write(f"10.0.0.{r % 250},{feats},{protos[r]},0,"
                     f"{ds.class_names[ds.labels[r]]}\n")
    return path


CONFIG_TEMPLATE = """
# pipeline under test
data.input = {csv}
data.label_column = attack_cat
data.socket_columns = src_ip
split.train_fraction = 0.7
augment.policy = median
gan.epochs = 3
gan.batch_size = 4
extractor.blocks = 2
extractor.epochs = 2
extractor.learning_rate = 0.01
aso.population = 4
aso.iterations = 3
aso.proxy_epochs = 1
run.seed = 7
run.out = {out}
"""


@pytest.fixture
def tiny_run(tmp_path):
    csv = write_flow_csv(tmp_path / "flows.csv")
    cfg_path = tmp_path / "cfg.txt"
    cfg_path.write_text(CONFIG_TEMPLATE.format(csv=csv, out=tmp_path / "out"))
    return cfg_path, tmp_path


# ---- checkpoint container -----------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    arrays = {"a.weight": rng.normal(size=(3, 4)).astype(np.float32),
              "b.bias": rng.normal(size=5).astype(np.float32),
              "scalar": np.float32(2.5)}
    path = tmp_path / "t.ckpt"
    save_arrays(path, arrays)
    loaded = load_arrays(path)
    assert set(loaded) == set(arrays)
    assert np.allclose(loaded["a.weight"], arrays["a.weight"])
    assert loaded["b.bias"].shape == (5,)
    assert float(loaded["scalar"]) == 2.5


def test_checkpoint_digest_stable(tmp_path):
    arrays = {"w": np.arange(6, dtype=np.float64).reshape(2, 3)}
    save_arrays(tmp_path / "a.ckpt", arrays)
    save_arrays(tmp_path / "b.ckpt", dict(reversed(list(arrays.items()))))
    assert file_digest(tmp_path / "a.ckpt") == file_digest(tmp_path / "b.ckpt")


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"not a checkpoint at all")
    with pytest.raises(ValueError, match="magic"):
        load_arrays(path)


# ---- config ----------------------------------------------------------------------

def test_parse_config_round_trip(tmp_path):
    cfg_path = tmp_path / "c.txt"
    cfg_path.write_text(
        "data.input = a.csv\n"
        "data.label_column = label  # trailing comment\n"
        "\n"
        "augment.target.worms = 500\n"
        "classifier.momentum = 0.8\n"
        "classifier.epochs = 40\n"
        "tune.skip = true\n"
        "run.seed = 11\n")
    cfg = pl.config_from_file(cfg_path)
    assert cfg.input_path == "a.csv"
    assert cfg.augment_targets == {"worms": 500}
    assert cfg.skip_tune is True
    assert cfg.classifier_overrides.momentum == 0.8
    assert cfg.classifier_overrides.epochs == 40
    assert cfg.seed == 11


def test_parse_config_rejects_unknown_key(tmp_path):
    cfg_path = tmp_path / "c.txt"
    cfg_path.write_text("data.inptu = x.csv\n")
    with pytest.raises(ValueError, match="unknown config key"):
        pl.config_from_file(cfg_path)


def test_parse_config_rejects_bad_line(tmp_path):
    cfg_path = tmp_path / "c.txt"
    cfg_path.write_text("just some words\n")
    with pytest.raises(ValueError, match="key = value"):
        pl.config_from_file(cfg_path)


def test_presets():
    cfg = pl.PipelineConfig()
    desk = pl.apply_preset(cfg, "desk")
    assert desk.extractor_blocks == 4
    assert desk.subsample == 5000
    assert desk.gan.epochs == 30
    assert (desk.aso.population, desk.aso.iterations) == (10, 20)
    assert desk.proxy_epochs == 3
    paper = pl.apply_preset(cfg, "paper")
    assert paper.extractor_blocks == 16
    with pytest.raises(ValueError):
        pl.apply_preset(cfg, "laptop")


def test_config_validation():
    cfg = pl.PipelineConfig(train_fraction=1.5)
    with pytest.raises(ValueError):
        cfg.validate()
    cfg = pl.PipelineConfig(classifier_input="pixels")
    with pytest.raises(ValueError):
        cfg.validate()


# ---- staged runs -------------------------------------------------------------------

def test_full_run_artifacts_and_manifest(tiny_run):
    cfg_path, tmp_path = tiny_run
    cfg = pl.config_from_file(cfg_path)
    cfg.skip_tune = True
    cfg.classifier_overrides = None
    manifest = pl.run_pipeline(cfg)

    out = tmp_path / "out"
    for rel in ("ingest/train.bin", "ingest/test.bin", "ingest/dataset.json",
                "augment/train_aug.bin", "extract/extractor.ckpt",
                "extract/train_features.bin", "tune/hyperparams.json",
                "tune/aso_trace.csv", "train/classifier.ckpt",
                "train/epoch_trace.csv", "evaluate/metrics.json",
                "evaluate/per_class.csv", "evaluate/confusion.csv",
                "report/report.txt", "manifest.json"):
        assert (out / rel).exists(), rel

    # digests in the manifest match the files on disk
    for rel, digest in manifest["checkpoint_digests"].items():
        assert file_digest(out / rel) == digest
    # census reflects the median-count targets exactly
    after = manifest["census"]["after_augmentation"]
    before = manifest["census"]["before_augmentation"]
    median = int(np.median(list(before.values())))
    for name, count in after.items():
        assert count == max(before[name], median)
    # skip-tune pins the reference optimum
    assert manifest["hyperparameters"]["momentum"] == 0.9
    assert manifest["hyperparameters"]["batch_size"] == 32


def test_augment_stage_idempotent(tiny_run):
    cfg_path, tmp_path = tiny_run
    cfg = pl.config_from_file(cfg_path)
    pl.run_stage(cfg, "ingest")
    pl.run_stage(cfg, "augment")
    first = (tmp_path / "out/augment/train_aug.bin").read_bytes()
    pl.run_stage(cfg, "augment")
    assert (tmp_path / "out/augment/train_aug.bin").read_bytes() == first


def test_missing_upstream_artifact_error(tiny_run):
    cfg_path, _ = tiny_run
    cfg = pl.config_from_file(cfg_path)
    with pytest.raises(pl.StageError, match="run the 'ingest' stage first") as err:
        pl.run_stage(cfg, "augment")
    assert err.value.code == pl.STAGE_CODES["augment"]


def test_stage_error_removes_partial_outputs(tiny_run, tmp_path):
    cfg_path, base = tiny_run
    cfg = pl.config_from_file(cfg_path)
    cfg.input_path = str(base / "missing.csv")
    with pytest.raises(pl.StageError) as err:
        pl.run_stage(cfg, "ingest")
    assert err.value.code == pl.STAGE_CODES["ingest"]
    assert not (base / "out/ingest").exists()


def test_tune_stage_writes_trace(tiny_run):
    cfg_path, tmp_path = tiny_run
    cfg = pl.config_from_file(cfg_path)
    for stage in ("ingest", "augment", "extract", "tune"):
        pl.run_stage(cfg, stage)
    lines = (tmp_path / "out/tune/aso_trace.csv").read_text().splitlines()
    assert lines[0] == "iteration,best_fitness,mean_fitness,K"
    assert len(lines) == 1 + cfg.aso.iterations
    best = [float(l.split(",")[1]) for l in lines[1:]]
    assert all(a >= b for a, b in zip(best, best[1:]))
    payload = json.loads((tmp_path / "out/tune/hyperparams.json").read_text())
    assert payload["tuned"] is True


def test_emit_clean_and_synthetic(tiny_run):
    cfg_path, tmp_path = tiny_run
    cfg = pl.config_from_file(cfg_path)
    cfg.emit_clean = str(tmp_path / "clean.csv")
    cfg.emit_synthetic = str(tmp_path / "synth.csv")
    pl.run_stage(cfg, "ingest")
    pl.run_stage(cfg, "augment")
    clean = (tmp_path / "clean.csv").read_text().splitlines()
    meta = json.loads((tmp_path / "out/ingest/dataset.json").read_text())
    assert len(clean) == 1 + meta["rows"]["train"] + meta["rows"]["test"]
    values = np.array([[float(v) for v in line.split(",")[:-1]]
                       for line in clean[1:]])
    assert values.min() >= 0.0 and values.max() <= 1.0
    synth = (tmp_path / "synth.csv").read_text().splitlines()
    assert synth[0].endswith(",synthetic")
    assert all(line.endswith(",1") for line in synth[1:])
    aug_meta = json.loads((tmp_path / "out/augment/augment.json").read_text())
    added = sum(aug_meta["census_after"][c] - aug_meta["census_before"][c]
                for c in aug_meta["census_after"])
    assert len(synth) - 1 == added


def test_raw_classifier_input_skips_extractor(tiny_run):
    cfg_path, tmp_path = tiny_run
    cfg = pl.config_from_file(cfg_path)
    cfg.classifier_input = "raw"
    cfg.skip_tune = True
    pl.run_pipeline(cfg)
    assert not (tmp_path / "out/extract/extractor.ckpt").exists()
    info = json.loads((tmp_path / "out/extract/extract.json").read_text())
    meta = json.loads((tmp_path / "out/ingest/dataset.json").read_text())
    n_feat = len(meta["normalization"]["columns"])
    assert info == {"mode": "raw", "feature_dim": n_feat}


def test_rerun_is_byte_identical(tiny_run):
    cfg_path, tmp_path = tiny_run
    cfg = pl.config_from_file(cfg_path)
    cfg.skip_tune = True
    pl.run_pipeline(cfg)
    metrics_a = (tmp_path / "out/evaluate/metrics.json").read_bytes()
    cfg2 = pl.config_from_file(cfg_path)
    cfg2.skip_tune = True
    cfg2.out_dir = str(tmp_path / "out2")
    pl.run_pipeline(cfg2)
    metrics_b = (tmp_path / "out2/evaluate/metrics.json").read_bytes()
    assert metrics_a == metrics_b


def test_stage_isolation_reproduces_metrics(tiny_run):
    cfg_path, tmp_path = tiny_run
    cfg = pl.config_from_file(cfg_path)
    cfg.skip_tune = True
    pl.run_pipeline(cfg)
    metrics_before = (tmp_path / "out/evaluate/metrics.json").read_bytes()
    for stage in ("train", "evaluate", "report"):
        shutil.rmtree(tmp_path / "out" / stage)
    for stage in ("train", "evaluate", "report"):
        pl.run_stage(cfg, stage)
    assert (tmp_path / "out/evaluate/metrics.json").read_bytes() == metrics_before


# ---- cli -----------------------------------------------------------------------------

def test_cli_run_and_stage_exit_codes(tiny_run, capsys):
    cfg_path, tmp_path = tiny_run
    assert cli_main(["run", "--config", str(cfg_path), "--skip-tune",
                     "--out", str(tmp_path / "cli_out")]) == 0
    out = capsys.readouterr().out
    assert "overall accuracy" in out
    assert cli_main(["report", "--config", str(cfg_path),
                     "--out", str(tmp_path / "cli_out")]) == 0


def test_cli_missing_upstream_exit_code(tiny_run):
    cfg_path, tmp_path = tiny_run
    code = cli_main(["evaluate", "--config", str(cfg_path),
                     "--out", str(tmp_path / "fresh")])
    assert code == pl.STAGE_CODES["evaluate"]


def test_cli_bad_config_exit_code(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("nonsense.key = 1\n")
    assert cli_main(["run", "--config", str(bad)]) == 2


def test_cli_seed_override(tiny_run):
    cfg_path, tmp_path = tiny_run
    assert cli_main(["ingest", "--config", str(cfg_path), "--seed", "99",
                     "--out", str(tmp_path / "seeded")]) == 0
    a = (tmp_path / "seeded/ingest/train.bin").read_bytes()
    assert cli_main(["ingest", "--config", str(cfg_path), "--seed", "100",
                     "--out", str(tmp_path / "seeded2")]) == 0
    b = (tmp_path / "seeded2/ingest/train.bin").read_bytes()
    assert a != b


def test_console_script_help():
    result = subprocess.run([sys.executable, "-m", "dosids.cli", "--help"],
                            capture_output=True, text=True)
    assert result.returncode == 0
    assert "run" in result.stdout
