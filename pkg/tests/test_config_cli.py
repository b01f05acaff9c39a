import csv
import json

import numpy as np
import pytest
import yaml

from qcbm.cli import main
from qcbm.config import config_from_dict, load_config
from qcbm.encoding import rebin_counts
from qcbm.datagen import load_csv
from qcbm.simulator import ConfigurationError
from qcbm.training import load_checkpoint

from pipeline import SMOKE, run_pipeline


def smoke_dict():
    return yaml.safe_load(SMOKE.read_text())


def write_config(tmp_path, **changes):
    raw = smoke_dict()
    for section, values in changes.items():
        raw.setdefault(section, {}).update(values)
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(raw))
    return path


@pytest.fixture(scope="module")
def smoke_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("smoke")
    return out, run_pipeline(out)


# --- config --------------------------------------------------------------

@pytest.mark.parametrize("name", ["smoke.yaml", "dijet_8q.yaml", "dijet_12q.yaml"])
def test_shipped_configs_load(name):
    cfg = load_config(SMOKE.parent / name)
    assert sum(cfg.binning.qubits_per_feature) == cfg.circuit.num_qubits


def test_smoke_config_loads():
    cfg = load_config(SMOKE)
    assert cfg.circuit.num_qubits == 4 and cfg.lcd.noise.p01 == 0.02
    assert config_from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize("raw,match", [
    ({"trainig": {}}, "trainig"),
    ({"training": {"learning_rat": 0.1}}, "learning_rat"),
    ({"lcd": {"noise": {"p02": 0.1}}}, "p02"),
    ({"binning": {"qubits_per_feature": [2, 3]}}, "sums to 5"),
    ({"circuit": {"kind": "tree", "num_qubits": 6, "num_layers": 1}, "binning": {"qubits_per_feature": [3, 3]}}, "divisible"),
    ({"circuit": {"kind": "brick", "num_qubits": 3, "num_layers": 1, "initial_state": "bell"},
      "binning": {"qubits_per_feature": [1, 2]}}, "bell"),
    ({"datagen": {"rho_pt_mass": 1.5}}, "rho_pt_mass"),
    ({"eval": {"repetitions": 1}}, "repetitions"),
])
def test_config_errors(raw, match):
    with pytest.raises(ConfigurationError, match=match):
        config_from_dict(raw)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.yaml")


def test_invalid_yaml(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("training: [unclosed\n")
    with pytest.raises(ConfigurationError):
        load_config(path)


# --- CLI exit codes ------------------------------------------------------

def test_invalid_rho_exits_with_config_error(tmp_path, capsys):
    path = write_config(tmp_path, datagen={"rho_pt_mass": 1.5})
    assert main(["datagen", "--config", str(path), "--out-dir", str(tmp_path)]) == 1
    assert "rho_pt_mass" in capsys.readouterr().err


def test_usage_errors(tmp_path):
    assert main([]) == 1
    assert main(["bogus"]) == 1
    assert main(["train", "--out-dir", str(tmp_path)]) == 1
    assert main(["datagen", "--config", str(SMOKE), "--threads", "0"]) == 1


def test_missing_data_file(tmp_path):
    assert main(["train", "--config", str(SMOKE), "--data", str(tmp_path / "none.csv"), "--out-dir", str(tmp_path)]) == 2


def test_missing_checkpoint(tmp_path):
    args = ["--checkpoint", str(tmp_path / "none.json"), "--out-dir", str(tmp_path)]
    assert main(["sample"] + args) == 2
    assert main(["eval", "--config", str(SMOKE), "--data", str(tmp_path / "x.csv")] + args) != 0


def test_batch_smaller_than_qubits(tmp_path, smoke_run):
    out, _ = smoke_run
    path = write_config(tmp_path, lcd={"max_batch": 2})
    assert main(["lcd", "--config", str(path), "--checkpoint", str(out / "checkpoint.json"), "--out-dir", str(tmp_path)]) == 1


# --- pipeline ------------------------------------------------------------

def test_pipeline_succeeds(smoke_run):
    out, codes = smoke_run
    assert codes == {"datagen": 0, "train": 0, "lcd": 0, "sample": 0, "eval": 0}
    for name in ["datagen", "train", "lcd", "sample"]:
        manifest = json.loads((out / f"manifest_{name}.json").read_text())
        assert manifest["tool_version"] and manifest["seeds"] and manifest["outputs"]
    assert (out / "eval" / "manifest_eval.json").exists()


def test_train_outputs(smoke_run):
    out, _ = smoke_run
    with open(out / "loss.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["step", "js"] and len(rows) == 301
    manifest = json.loads((out / "manifest_train.json").read_text())
    assert len(manifest["timings"]["step_wall_s"]) == 300
    assert manifest["inputs"]["data"]["sha256"]
    ck = load_checkpoint(out / "checkpoint.json")
    assert ck.state.step == 300 and ck.scheme is not None


def test_sample_outputs(smoke_run):
    out, _ = smoke_run
    data = load_csv(out / "samples.csv", ["pt", "mass"])
    assert data.num_events == 8192
    ck = load_checkpoint(out / "checkpoint_lcd.json")
    counts = np.zeros(16, dtype=int)
    with open(out / "sample_counts.csv") as fh:
        for row in csv.DictReader(fh):
            counts[int(row["bitstring"], 2)] = int(row["count"])
    np.testing.assert_array_equal(rebin_counts(data, ck.scheme), counts)
    assert json.loads((out / "manifest_sample.json").read_text())["rebin_matches_counts"]


def test_lcd_outputs(smoke_run):
    out, _ = smoke_run
    manifest = json.loads((out / "manifest_lcd.json").read_text())
    assert manifest["after"]["noisy_js"] <= manifest["before"]["noisy_js"]
    with open(out / "lcd_trace.csv") as fh:
        header = next(csv.reader(fh))
    assert {"noisy_js", "reference_js", "offset", "adopted"} <= set(header)


def test_eval_outputs(smoke_run):
    out, _ = smoke_run
    report = json.loads((out / "eval" / "report.json").read_text())
    assert np.array(report["correlation"]).shape == (2, 2)
    assert report["d_score"] < 0.05
    assert (out / "eval" / "marginals.csv").exists()


def test_datagen_digest_stable(tmp_path):
    path = write_config(tmp_path, datagen={"n_events": 1000})
    for sub in ("a", "b"):
        assert main(["datagen", "--config", str(path), "--out-dir", str(tmp_path / sub)]) == 0
    assert (tmp_path / "a" / "data.csv").read_bytes() == (tmp_path / "b" / "data.csv").read_bytes()


def test_datagen_records_correlation(tmp_path):
    path = write_config(tmp_path, datagen={"n_events": 10**6, "rho_pt_mass": 0.2})
    assert main(["datagen", "--config", str(path), "--out-dir", str(tmp_path)]) == 0
    achieved = json.loads((tmp_path / "manifest_datagen.json").read_text())["achieved_correlation"]
    assert 0.19 <= achieved["pt-mass"] <= 0.21


def test_zero_noise_exact_lcd_is_monotone(tmp_path, smoke_run):
    out, _ = smoke_run
    path = write_config(tmp_path, lcd={"n_shots": None, "noise": {"p01": 0.0, "p10": 0.0, "depolarizing": 0.0}})
    assert main(["lcd", "--config", str(path), "--checkpoint", str(out / "checkpoint.json"), "--out-dir", str(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "manifest_lcd.json").read_text())
    assert manifest["after"]["exact_js"] <= manifest["before"]["exact_js"]


def test_fraction_study_command(tmp_path, smoke_run):
    out, _ = smoke_run
    path = write_config(tmp_path, training={"max_steps": 50}, eval={"fractions": [0.5, 1.0], "repetitions": 5})
    assert main(["fraction-study", "--config", str(path), "--data", str(out / "data.csv"), "--out-dir", str(tmp_path)]) == 0
    with open(tmp_path / "fraction_study.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 2


def test_seed_override_changes_samples(tmp_path, smoke_run):
    out, _ = smoke_run
    ck = str(out / "checkpoint_lcd.json")
    main(["sample", "--checkpoint", ck, "--n-shots", "100", "--seed", "2", "--out-dir", str(tmp_path / "a")])
    main(["sample", "--checkpoint", ck, "--n-shots", "100", "--seed", "3", "--out-dir", str(tmp_path / "b")])
    assert (tmp_path / "a" / "samples.csv").read_bytes() != (tmp_path / "b" / "samples.csv").read_bytes()
