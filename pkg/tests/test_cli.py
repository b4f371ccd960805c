import io
import json
import os
from contextlib import redirect_stderr, redirect_stdout

import numpy as np
import pytest

from uqim.cli import PipelineReport, main


def run_cli(argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        rc = main([str(a) for a in argv])
    text = out.getvalue()
    report = json.loads(text) if rc == 0 and text.strip() else None
    return rc, report, err.getvalue()


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Zero-bias 1-d synthetic workspace: datasets, surrogate, input draw."""
    ws = tmp_path_factory.mktemp("cliws")
    rc, rep, _ = run_cli([
        "synth", "--system", "mafds", "--bias-scale", "0", "--sigma-obs", "0",
        "--n-exp", "50", "--n-sim", "200", "--seed", "11", "--out-dir", ws,
    ])
    assert rc == 0
    rc, _, _ = run_cli([
        "fit-surrogate", "--sim", ws / "sim.csv", "--family", "spline1d",
        "--size", "8", "--out", "model.json", "--out-dir", ws,
    ])
    assert rc == 0
    rc, _, _ = run_cli([
        "gen-inputs", "--count", "50000", "--dist", "mvn",
        "--from", ws / "sim.csv", "--columns", "x1",
        "--out", "inputs.csv", "--out-dir", ws, "--seed", "5",
    ])
    assert rc == 0
    return {"dir": ws, "true_q": rep["results"]["true_quantile"]}


# ---------------------------------------------------------------------------
# report plumbing


def test_report_shape_and_roundtrip(workspace, tmp_path):
    ws = workspace["dir"]
    rc, rep, _ = run_cli([
        "quantile", "--model", ws / "model.json", "--inputs", ws / "inputs.csv",
        "--alpha", "0.95", "--seed", "7", "--report", tmp_path / "rep.json",
        "--out-dir", tmp_path,
    ])
    assert rc == 0
    for key in ("command", "version", "seed", "settings", "results",
                "timings", "artifacts"):
        assert key in rep
    assert rep["command"] == "quantile"
    assert rep["seed"] == 7
    assert rep["version"] != ""
    written = (tmp_path / "rep.json").read_text()
    assert PipelineReport.from_json(written).to_json() + "\n" == written


def test_quantile_matches_synthetic_oracle(workspace):
    ws = workspace["dir"]
    rc, rep, _ = run_cli([
        "quantile", "--model", ws / "model.json", "--inputs", ws / "inputs.csv",
        "--alpha", "0.95,0.5",
    ])
    assert rc == 0
    entries = rep["results"]["quantiles"]
    assert [e["alpha"] for e in entries] == [0.95, 0.5]
    got = entries[0]["value"]
    assert got == pytest.approx(workspace["true_q"], rel=0.05)
    assert rep["results"]["count"] == 50000


def test_quantile_outputs_route_and_exclusivity(tmp_path, workspace):
    path = tmp_path / "vals.csv"
    path.write_text("y\n" + "\n".join(str(v) for v in range(1, 21)) + "\n")
    rc, rep, _ = run_cli(["quantile", "--outputs", path, "--alpha", "0.5"])
    assert rc == 0
    assert rep["results"]["quantiles"][0]["value"] == 10.0
    rc, _, err = run_cli(["quantile", "--alpha", "0.5"])
    assert rc == 1 and "outputs" in err
    ws = workspace["dir"]
    rc, _, _ = run_cli([
        "quantile", "--outputs", path, "--model", ws / "model.json",
        "--alpha", "0.5",
    ])
    assert rc == 1


# ---------------------------------------------------------------------------
# failure modes


def test_missing_file_names_path(tmp_path):
    missing = tmp_path / "nope.csv"
    rc, _, err = run_cli(["avm", "--exp", missing, "--sim", missing])
    assert rc == 1
    payload = json.loads(err)
    assert "nope.csv" in payload["message"]
    assert payload["error"] != ""


def test_unknown_subcommand_exits_nonzero():
    with redirect_stderr(io.StringIO()):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
    assert exc.value.code != 0


def test_config_errors_list_every_field(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"seed": -1, "threads": 0, "l_n": 0}))
    rc, _, err = run_cli([
        "ci-quantile", "--check-only", "--n", "10",
        "--alpha", "0.95", "--delta", "0.05", "--config", cfg,
    ])
    assert rc == 1
    payload = json.loads(err)
    assert set(payload["fields"]) >= {"seed", "threads", "l_n"}


def test_config_supplies_defaults_flags_win(tmp_path, workspace):
    ws = workspace["dir"]
    cfg = tmp_path / "cfg.json"
    # method blocks sit flat next to the scalar keys in the config file
    cfg.write_text(json.dumps({
        "seed": 99,
        "density": {"kernel": "gauss", "grid-steps": 21},
    }))
    rc, rep, _ = run_cli([
        "density", "--model", ws / "model.json", "--inputs", ws / "inputs.csv",
        "--config", cfg, "--out-dir", tmp_path, "--out", "d1.csv",
    ])
    assert rc == 0
    assert rep["seed"] == 99
    assert rep["results"]["kernel"] == "gauss"
    assert rep["results"]["grid_steps"] == 21
    rc, rep, _ = run_cli([
        "density", "--model", ws / "model.json", "--inputs", ws / "inputs.csv",
        "--config", cfg, "--kernel", "naive", "--seed", "3",
        "--out-dir", tmp_path, "--out", "d2.csv",
    ])
    assert rc == 0
    assert rep["seed"] == 3
    assert rep["results"]["kernel"] == "naive"


# ---------------------------------------------------------------------------
# determinism and artifact hygiene


def test_same_seed_byte_identical_reports(tmp_path, workspace):
    def one(sub):
        out = tmp_path / sub
        rc, rep, _ = run_cli([
            "synth", "--system", "mafds", "--n-exp", "12", "--n-sim", "30",
            "--seed", "42", "--out-dir", out,
        ])
        assert rc == 0
        del rep["timings"]
        rep["artifacts"] = [os.path.basename(a) for a in rep["artifacts"]]
        return json.dumps(rep, sort_keys=True), (out / "exp.csv").read_bytes()

    rep_a, exp_a = one("a")
    rep_b, exp_b = one("b")
    assert rep_a == rep_b
    assert exp_a == exp_b
    rc, rep_c, _ = run_cli([
        "synth", "--system", "mafds", "--n-exp", "12", "--n-sim", "30",
        "--seed", "43", "--out-dir", tmp_path / "c",
    ])
    assert rc == 0
    assert (tmp_path / "c" / "exp.csv").read_bytes() != exp_a


def test_no_writes_outside_out_dir(tmp_path, monkeypatch):
    cwd = tmp_path / "cwd"
    out = tmp_path / "out"
    cwd.mkdir()
    monkeypatch.chdir(cwd)
    rc, rep, _ = run_cli([
        "synth", "--system", "mafds", "--n-exp", "5", "--n-sim", "5",
        "--out-dir", out, "--report", "report.json",
    ])
    assert rc == 0
    assert os.listdir(cwd) == []
    assert sorted(os.listdir(out)) == ["exp.csv", "report.json", "sim.csv"]
    for art in rep["artifacts"]:
        assert os.path.abspath(art).startswith(str(out))


def test_dry_run_skips_computation(tmp_path):
    rc, rep, _ = run_cli([
        "fit-surrogate", "--sim", tmp_path / "never_created.csv",
        "--dry-run", "--out-dir", tmp_path,
    ])
    assert rc == 0
    assert rep["results"] == {}
    assert rep["artifacts"] == []
    assert rep["settings"]["dry_run"] is True
    assert rep["settings"]["sim"].endswith("never_created.csv")
    assert os.listdir(tmp_path) == []


def test_dry_run_still_validates_config(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"threads": -2}))
    rc, _, err = run_cli([
        "synth", "--dry-run", "--config", cfg, "--out-dir", tmp_path,
    ])
    assert rc == 1
    assert "threads" in json.loads(err)["fields"]


# ---------------------------------------------------------------------------
# threads resolution


def test_uq_threads_env_fallback(tmp_path, monkeypatch, workspace):
    ws = workspace["dir"]
    monkeypatch.setenv("UQ_THREADS", "3")
    rc, rep, _ = run_cli([
        "bootstrap-error", "--exp", ws / "exp.csv", "--model", ws / "model.json",
        "--family", "poly", "--size", "1", "--b-reps", "3", "--n-learn", "10",
        "--out-dir", tmp_path,
    ])
    assert rc == 0
    assert rep["settings"]["threads"] == 3
    assert len(rep["results"]["quantiles"]) == 3


def test_uq_threads_bad_value(monkeypatch, tmp_path):
    monkeypatch.setenv("UQ_THREADS", "lots")
    rc, _, err = run_cli(["synth", "--dry-run", "--out-dir", tmp_path])
    assert rc == 1
    payload = json.loads(err)
    assert any("UQ_THREADS" in f for f in payload["fields"])
    # an explicit flag wins before the env var is ever parsed
    rc, _, _ = run_cli(["synth", "--dry-run", "--threads", "2",
                        "--out-dir", tmp_path])
    assert rc == 0


# ---------------------------------------------------------------------------
# flag grammar


def test_gen_inputs_lhs_ranges_from_data(tmp_path):
    data = tmp_path / "data.csv"
    data.write_text("a,b\n0,10\n1,14\n0.5,12\n")
    rc, rep, _ = run_cli([
        "gen-inputs", "--count", "8", "--dist", "lhs", "--from", data,
        "--out", "pts.csv", "--out-dir", tmp_path, "--seed", "1",
    ])
    assert rc == 0
    assert rep["results"]["ranges"] == [[0.0, 1.0], [10.0, 14.0]]
    rows = np.loadtxt(tmp_path / "pts.csv", delimiter=",", skiprows=1)
    assert rows.shape == (8, 2)
    assert rows[:, 0].min() >= 0.0 and rows[:, 0].max() <= 1.0
    assert rows[:, 1].min() >= 10.0 and rows[:, 1].max() <= 14.0


def test_gen_inputs_lhs_explicit_ranges(tmp_path):
    rc, rep, _ = run_cli([
        "gen-inputs", "--count", "6", "--ranges", "0:1,2:5",
        "--out", "pts.csv", "--out-dir", tmp_path,
    ])
    assert rc == 0
    assert rep["results"]["dist"] == "lhs"
    rows = np.loadtxt(tmp_path / "pts.csv", delimiter=",", skiprows=1)
    assert rows.shape == (6, 2)
    rc, _, err = run_cli(["gen-inputs", "--count", "6", "--dist", "lhs",
                          "--out-dir", tmp_path])
    assert rc == 1 and "ranges" in err


def test_density_auto_bandwidth_and_grid(tmp_path, workspace):
    ws = workspace["dir"]
    rc, rep, _ = run_cli([
        "density", "--model", ws / "model.json", "--inputs", ws / "inputs.csv",
        "--bandwidth", "auto", "--grid", "0.05:0.12:11",
        "--out", "den.csv", "--out-dir", tmp_path,
    ])
    assert rc == 0
    assert rep["results"]["bandwidth"] > 0.0
    assert rep["results"]["grid_lo"] == 0.05
    assert rep["results"]["grid_hi"] == 0.12
    table = np.loadtxt(tmp_path / "den.csv", delimiter=",", skiprows=1)
    assert table.shape == (11, 3)
    assert table[0, 0] == 0.05 and table[-1, 0] == 0.12
    assert np.all(table[:, 1] >= 0.0)
    assert np.all(np.diff(table[:, 2]) >= 0.0)


def test_ci_quantile_check_only(tmp_path):
    rc, rep, _ = run_cli([
        "ci-quantile", "--check-only", "--n", "10",
        "--alpha", "0.95", "--delta", "0.05", "--out-dir", tmp_path,
    ])
    assert rc == 0
    assert rep["results"]["feasible"] is False
    assert len(rep["results"]["entries"]) == 9
    rc, rep, _ = run_cli([
        "ci-quantile", "--check-only", "--n", "100",
        "--alpha", "0.5", "--delta", "0.5", "--out-dir", tmp_path,
    ])
    assert rc == 0
    assert rep["results"]["feasible"] is True


def test_fit_surrogate_weighted_improvement(tmp_path, workspace):
    ws = workspace["dir"]
    rc, rep, _ = run_cli([
        "fit-surrogate", "--sim", ws / "sim.csv", "--exp", ws / "exp.csv",
        "--family", "spline1d", "--size", "8",
        "--res-family", "poly", "--res-size", "1", "--weighted",
        "--out", "improved.json", "--out-dir", tmp_path,
    ])
    assert rc == 0
    assert rep["settings"]["weighted"] is True
    assert 0.0 <= rep["results"]["weight"] <= 1.0
    assert rep["results"]["residual_family"] == "poly"
    from uqim.surrogate import load_model

    model = load_model(tmp_path / "improved.json")
    vals = model(np.array([[0.05]]))
    assert np.isfinite(vals).all()
