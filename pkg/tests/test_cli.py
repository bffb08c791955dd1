"""End-to-end runs of the ``rbspade`` command line."""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from rbspade import presets
from rbspade.calibration import synth_calibration, write_calibration
from rbspade.cli import build_parser, cmd_calibrate, main


def run(args, tmp_path, expect=0):
    rc = main(list(args) + ["--out-dir", str(tmp_path)])
    assert rc == expect
    return rc


def load(path):
    return json.loads(path.read_text())


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert main(["simulate", "--seed", "3", "--n", "400", "--out-dir", str(out)]) == 0
    return out / "dataset.csv"


# -- calibrate ---------------------------------------------------------------

def test_calibrate_synthetic_rayleigh(tmp_path):
    run(["calibrate", "--synthetic"], tmp_path)
    doc = load(tmp_path / "calibration.json")
    assert doc["rayleigh_limit_um"] == pytest.approx(326.565, abs=1e-3)
    assert [s["source_id"] for s in doc["sources"]] == ["src1", "src2"]
    spl = doc["sources"][0]["spline"]
    assert spl["knot_residual"] < 1e-12
    assert doc["config"]["width"] == [presets.SRC1_WIDTH, presets.SRC2_WIDTH]
    assert "workers" not in doc["config"] and "out_dir" not in doc["config"]


def test_cmd_calibrate_single_width(tmp_path):
    assert cmd_calibrate(["--synthetic", "--width", "300", "--out-dir", str(tmp_path)]) == 0
    doc = load(tmp_path / "calibration.json")
    assert doc["sources"][0]["fit"]["width_um"] == pytest.approx(300.0, abs=0.3)


def test_calibrate_files_and_export(tmp_path):
    cal = synth_calibration(300.0, variances=[1e-3] * 4, step=5.0)
    path = tmp_path / "one.csv"
    write_calibration(cal, path)
    out = tmp_path / "out"
    run(["calibrate", "--cal", str(path), "--export"], out)
    doc = load(out / "calibration.json")
    assert doc["sources"][0]["fit"]["width_um"] == pytest.approx(300.0, abs=1e-3)
    assert "rayleigh_limit_um" not in doc
    assert (out / "calibration_src1.csv").exists()


def test_calibrate_missing_file_names_path(tmp_path, capsys):
    run(["calibrate", "--cal", str(tmp_path / "nope.csv")], tmp_path, expect=2)
    assert "nope.csv" in capsys.readouterr().err
    assert not list(tmp_path.glob("*.json"))


def test_calibrate_requires_a_source(tmp_path, capsys):
    run(["calibrate"], tmp_path, expect=2)
    assert "--synthetic" in capsys.readouterr().err


# -- simulate ----------------------------------------------------------------

def test_simulate_requires_seed(tmp_path, capsys):
    run(["simulate"], tmp_path, expect=2)
    assert "seed" in capsys.readouterr().err
    assert not any(tmp_path.iterdir())


def test_simulate_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        run(["simulate", "--seed", "9", "--n", "20", "--scene", "src2"], out)
    assert (a / "dataset.csv").read_bytes() == (b / "dataset.csv").read_bytes()
    meta = load(a / "dataset.json")
    assert meta["params"]["q"] == 0.0 and meta["scene"] == "src2"
    assert len(rows(a / "dataset.csv")) == 20


# -- discriminate ------------------------------------------------------------

def _check_rb_bookkeeping(res):
    hyps = res["hypotheses"]
    post = np.array([h["posterior"] for h in hyps])
    prior = np.array([h["prior"] for h in hyps])
    rb = np.array([h["rb"] for h in hyps])
    assert post.sum() == pytest.approx(1.0, abs=1e-10)
    assert float(prior @ rb) == pytest.approx(1.0, abs=1e-10)
    assert all(0.0 <= h["evidence"] <= 1.0 for h in hyps)


def test_discriminate_with_chunks(dataset, tmp_path):
    run(["discriminate", "--data", str(dataset), "--chunk", "100", "--workers", "2"], tmp_path)
    doc = load(tmp_path / "discrimination.json")
    assert doc["result"]["argmax"] == ["combined"]
    _check_rb_bookkeeping(doc["result"])
    ch = doc["chunks"]
    assert ch["count"] == 4 and len(ch["results"]) == 4
    assert sum(ch["label_counts"].values()) == 4
    for r in ch["results"]:
        _check_rb_bookkeeping(r)
    assert doc["hypothesis_config"]["q0"] == 0.05


def test_discriminate_hypothesis_document(dataset, tmp_path):
    hyp = tmp_path / "h.json"
    hyp.write_text(json.dumps({"priors": {"src1": 0.5, "src2": 0.25, "combined": 0.25}}))
    run(["discriminate", "--data", str(dataset), "--hypotheses", str(hyp)], tmp_path)
    doc = load(tmp_path / "discrimination.json")
    assert doc["hypothesis_config"]["priors"]["src1"] == 0.5
    _check_rb_bookkeeping(doc["result"])


def test_discriminate_rejects_bad_inputs(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("I0,I1,I2,I3\n")
    run(["discriminate", "--data", str(empty)], tmp_path, expect=2)
    assert "no samples" in capsys.readouterr().err
    run(["discriminate"], tmp_path, expect=2)
    assert "--data" in capsys.readouterr().err


# -- sweep -------------------------------------------------------------------

def test_sweep_outputs_and_determinism(tmp_path):
    args = ["sweep", "--seed", "1", "--trials", "200", "--d-range", "0", "8", "5"]
    run(args, tmp_path / "a")
    run(args + ["--workers", "3"], tmp_path / "b")
    a = (tmp_path / "a" / "sweep.csv").read_bytes()
    assert a == (tmp_path / "b" / "sweep.csv").read_bytes()
    table = rows(tmp_path / "a" / "sweep.csv")
    assert len(table) == 5 and float(table[0]["d_um"]) == 0.0
    assert float(table[0]["success_fraction"]) == 0.5
    doc = load(tmp_path / "a" / "sweep.json")
    assert doc["critical_distance_um"] == pytest.approx(presets.TARGET_DC, rel=1e-6)
    assert doc["epsilon"] == presets.EPSILON
    assert doc["rayleigh_limit_um"] == pytest.approx(326.565, abs=1e-3)


def test_sweep_mismatch_has_both_models(tmp_path):
    run(["sweep", "--seed", "2", "--mode", "mismatch", "--trials", "50",
         "--separations", "0", "100", "400"], tmp_path)
    models = {r["model"] for r in rows(tmp_path / "sweep.csv")}
    assert models == {"matched", "mismatched"}
    assert set(load(tmp_path / "sweep.json")["thresholds_um"]) == models


@pytest.mark.parametrize("extra", [["--epsilon", "0.7"], ["--trials", "0"],
                                   ["--d-range", "0", "1", "2.5"]])
def test_sweep_validation(tmp_path, extra):
    run(["sweep", "--seed", "1"] + extra, tmp_path, expect=2)
    assert not any(tmp_path.iterdir())


# -- estimate ----------------------------------------------------------------

def test_estimate_one_axis(dataset, tmp_path):
    run(["estimate", "--data", str(dataset), "--x-grid", "2.5", "3.5", "21"], tmp_path)
    doc = load(tmp_path / "estimate.json")
    assert doc["axes"] == ["x_c"] and doc["shape"] == [21]
    table = rows(tmp_path / "estimate.csv")
    prior = np.array([float(r["prior"]) for r in table])
    rb = np.array([float(r["rb"]) for r in table])
    assert float(prior @ rb) == pytest.approx(1.0, abs=1e-10)
    assert doc["fixed"]["d"] == presets.SEPARATION


def test_estimate_two_axes_gaussian_prior(dataset, tmp_path):
    run(["estimate", "--data", str(dataset), "--d-grid", "18", "22", "5",
         "--x-grid", "2.5", "3.5", "5", "--prior", "gaussian",
         "--prior-variance", "4", "0.25"], tmp_path)
    doc = load(tmp_path / "estimate.json")
    assert doc["shape"] == [5, 5]
    assert len(rows(tmp_path / "estimate.csv")) == 25


def test_estimate_single_point_is_neutral(dataset, tmp_path):
    run(["estimate", "--data", str(dataset), "--x-grid", "3", "3", "1"], tmp_path)
    assert load(tmp_path / "estimate.json")["max_rb"] == pytest.approx(1.0)


@pytest.mark.parametrize("extra, fragment", [
    (["--x-grid", "900", "995", "3"], "calibration domain"),
    ([], "--d-grid"),
    (["--x-grid", "0", "1", "3", "--prior", "gaussian"], "--prior-variance"),
])
def test_estimate_errors_leave_no_files(dataset, tmp_path, capsys, extra, fragment):
    run(["estimate", "--data", str(dataset)] + extra, tmp_path, expect=2)
    assert fragment in capsys.readouterr().err
    assert not any(tmp_path.iterdir())


# -- configuration -----------------------------------------------------------

def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"trials": 30, "separations": [0.0, 5.0], "seed": 4,
                               "name": "fromcfg"}))
    out = tmp_path / "out"
    run(["sweep", "--config", str(cfg), "--trials", "40"], out)
    doc = load(out / "fromcfg.json")
    assert doc["config"]["trials"] == 40
    assert doc["config"]["seed"] == 4
    assert doc["config"]["samples_per_trial"] == 1
    assert "config" not in doc["config"]


def test_config_unknown_field(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"trails": 30}))
    run(["sweep", "--config", str(cfg), "--seed", "1"], tmp_path / "o", expect=2)
    assert "trails" in capsys.readouterr().err


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("RBSPADE_OUTPUT_DIR", str(tmp_path))
    assert main(["calibrate", "--synthetic", "--name", "env"]) == 0
    assert (tmp_path / "env.json").exists()


def test_help_states_units(capsys):
    parser = build_parser()
    for cmd in ("simulate", "sweep", "estimate"):
        with pytest.raises(SystemExit):
            parser.parse_args([cmd, "--help"])
        text = capsys.readouterr().out
        assert "(um)" in text or "um," in text
        assert "default:" in text


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "rbspade", "calibrate", "--synthetic",
                           "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "calibration.json" in proc.stdout
