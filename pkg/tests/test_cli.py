"""Command-line pipeline: sample -> region -> volume, formats and exit codes."""

import json
import os
import subprocess
import sys

import pytest
from click.testing import CliRunner

from roagp.cli import main

RUN_CONFIG = {
    "n_stable": 4,
    "delta": 0.05,
    "sim": {"dt": 0.01, "horizon": 50.0, "convergence_radius": 0.01},
    "kernel": {"kind": "se", "length_scale": 0.5},
    "beta_mode": "theoretical",
    "candidate_count": 128,
    "restarts": 2,
    "r_excl": 0.2,
    "box": {"lower": [-1.0, -1.0], "upper": [1.0, 1.0]},
}


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def run_dir(tmp_path, data_dir, runner):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(RUN_CONFIG))
    out = tmp_path / "out"
    res = runner.invoke(
        main,
        [
            "sample",
            "--system", str(data_dir / "smib.json"),
            "--config", str(cfg),
            "--out", str(out),
            "--seed", "3",
        ],
    )
    assert res.exit_code == 0, res.output
    return out


def test_sample_artifacts(run_dir):
    assert (run_dir / "records.csv").exists()
    assert (run_dir / "model.json").exists()
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["seed"] == 3
    assert manifest["box"]["lower"] == [-1.0, -1.0]
    assert manifest["artifacts"] == {
        "records": "records.csv",
        "model": "model.json",
    }
    header = (run_dir / "records.csv").read_text().splitlines()[0]
    assert header == "iter,stable,x_1,x_2,v_hat,acquisition"


def test_sample_deterministic(tmp_path, data_dir, runner):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(RUN_CONFIG))
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        res = runner.invoke(
            main,
            [
                "sample",
                "--system", str(data_dir / "smib.json"),
                "--config", str(cfg),
                "--out", str(out),
                "--seed", "3",
            ],
        )
        assert res.exit_code == 0, res.output
        outs.append((out / "records.csv").read_text())
    assert outs[0] == outs[1]


def test_region_outputs(run_dir, data_dir, runner, tmp_path):
    out = tmp_path / "region"
    res = runner.invoke(
        main,
        [
            "region",
            "--model", str(run_dir / "model.json"),
            "--records", str(run_dir / "records.csv"),
            "--system", str(data_dir / "smib.json"),
            "--resolution", "20",
            "--out", str(out),
        ],
    )
    assert res.exit_code == 0, res.output
    doc = json.loads((out / "slices.json").read_text())
    assert doc["resolution"] == 20
    assert len(doc["slices"]) == 1  # one machine, one plane
    grid_file = out / doc["slices"][0]["grid"]
    lines = grid_file.read_text().strip().splitlines()
    assert lines[0] == "x,y,member,mu,sigma"
    assert len(lines) == 401
    assert (out / doc["slices"][0]["boundary"]).exists()


def test_region_with_explicit_box(run_dir, data_dir, runner, tmp_path):
    out = tmp_path / "region"
    res = runner.invoke(
        main,
        [
            "region",
            "--model", str(run_dir / "model.json"),
            "--records", str(run_dir / "records.csv"),
            "--system", str(data_dir / "smib.json"),
            "--box", "-2:2,-1:1",
            "--resolution", "10",
            "--beta", "fixed:4",
            "--out", str(out),
        ],
    )
    assert res.exit_code == 0, res.output
    doc = json.loads((out / "slices.json").read_text())
    assert doc["beta"] == 4.0


def test_volume_json(run_dir, data_dir, runner):
    res = runner.invoke(
        main,
        [
            "volume",
            "--model", str(run_dir / "model.json"),
            "--records", str(run_dir / "records.csv"),
            "--system", str(data_dir / "smib.json"),
            "--box", "-4:4,-3:3",
            "--samples", "2000",
            "--seed", "1",
        ],
    )
    assert res.exit_code == 0, res.output
    doc = json.loads(res.output.strip().splitlines()[-1])
    assert doc["n_samples"] == 2000
    assert doc["certified_count"] > 0
    assert doc["seed"] == 1


def test_parse_error_exit_code(tmp_path, data_dir, runner):
    bad = tmp_path / "bad.json"
    bad.write_text("{broken")
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(RUN_CONFIG))
    res = runner.invoke(
        main,
        [
            "sample",
            "--system", str(bad),
            "--config", str(cfg),
            "--out", str(tmp_path / "o"),
        ],
    )
    assert res.exit_code == 2


def test_budget_exhausted_exit_code(tmp_path, data_dir, runner):
    cfg_doc = dict(RUN_CONFIG, max_total_iterations=1, n_stable=50)
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(cfg_doc))
    res = runner.invoke(
        main,
        [
            "sample",
            "--system", str(data_dir / "smib.json"),
            "--config", str(cfg),
            "--out", str(tmp_path / "o"),
        ],
    )
    assert res.exit_code == 5


def test_region_bad_beta_spec(run_dir, data_dir, runner, tmp_path):
    res = runner.invoke(
        main,
        [
            "region",
            "--model", str(run_dir / "model.json"),
            "--records", str(run_dir / "records.csv"),
            "--system", str(data_dir / "smib.json"),
            "--beta", "bogus:1",
            "--out", str(tmp_path / "r"),
        ],
    )
    assert res.exit_code == 2


def test_thread_env_propagates(tmp_path, data_dir):
    code = (
        "import roagp.cli, os; "
        "print(os.environ.get('OMP_NUM_THREADS'))"
    )
    env = dict(os.environ, ROAGP_THREADS="2")
    env.pop("OMP_NUM_THREADS", None)
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True
    )
    assert out.returncode == 0, out.stderr
    assert out.stdout.strip() == "2"


def test_cli_help(runner):
    res = runner.invoke(main, ["--help"])
    assert res.exit_code == 0
    for cmd in ("sample", "region", "volume"):
        assert cmd in res.output
