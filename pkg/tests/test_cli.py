import csv
import json

import pytest

from tabkip.cli import main
from tabkip.config import ConfigError, RunConfig

SMALL = ["--set", "synthetic.n=400", "--set", "synthetic.d=4", "--set", "synthetic.ir=4"]


def run(tmp_path, command, *extra, out="run", force=False):
    argv = [command, "--out", str(tmp_path / out), *SMALL, *extra]
    if force:
        argv.append("--force")
    return main(argv)


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# --- config ----------------------------------------------------------------------------------

def test_config_defaults_and_overrides(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[distill]\nm = 25\n[objective]\nkind = asig\n")
    cfg = RunConfig.load(p, ["objective.gamma=1.5", "run.seed=7"])
    d = cfg.distill_config()
    assert d.m == 25 and d.seed == 7
    assert d.objective.kind == "asig" and d.objective.gamma == 1.5
    assert cfg.kernel_spec() is None
    assert "m = 25" in cfg.to_text()


@pytest.mark.parametrize("text,override", [
    ("[distill]\nbogus = 1\n", []),
    ("[nosuch]\nm = 1\n", []),
    ("", ["distill.m=abc"]),
    ("", ["distill"]),
])
def test_config_rejects_bad_input(tmp_path, text, override):
    p = tmp_path / "c.ini"
    p.write_text(text)
    with pytest.raises(ConfigError):
        RunConfig.load(p, override).distill_config()


def test_config_snapshot_round_trips(tmp_path):
    cfg = RunConfig.load(None, ["sweep.sizes=10,20", "kernel.bandwidth=1.5"])
    p = tmp_path / "snap.ini"
    p.write_text(cfg.to_text())
    again = RunConfig.load(p)
    assert again.to_text() == cfg.to_text()
    assert again.kernel_spec().bandwidth == 1.5


# --- gen / distill ---------------------------------------------------------------------------

def test_gen_writes_dataset(tmp_path):
    assert run(tmp_path, "gen") == 0
    side = json.loads((tmp_path / "run" / "data.json").read_text())
    assert side["n"] == 400 and side["class_counts"]["positive"] == 80
    assert len(rows(tmp_path / "run" / "data.csv")) == 400


def test_distill_writes_artifacts(tmp_path):
    assert run(tmp_path, "distill", "--set", "distill.epochs=3", "--set", "distill.m=12") == 0
    d = tmp_path / "run"
    for name in ("coreset.csv", "coreset.json", "trace.csv", "config.ini", "manifest.json"):
        assert (d / name).is_file()
    assert len(rows(d / "coreset.csv")) == 12
    manifest = json.loads((d / "manifest.json").read_text())
    assert manifest["command"] == "distill"
    assert set(manifest["files"]) >= {"coreset.csv", "coreset.json", "trace.csv", "config.ini"}


def test_distill_rerun_is_byte_identical(tmp_path):
    args = ("--set", "distill.epochs=3", "--set", "distill.m=12", "--seed", "4")
    assert run(tmp_path, "distill", *args, out="a") == 0
    assert run(tmp_path, "distill", *args, out="b") == 0
    for name in ("coreset.csv", "coreset.json", "trace.csv", "config.ini", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_missing_input_is_a_data_error(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    assert run(tmp_path, "distill", "--set", f"data.path={missing}") == 2
    assert str(missing) in capsys.readouterr().err


def test_divergence_exits_3_and_keeps_trace(tmp_path, capsys):
    code = run(tmp_path, "distill", "--set", "distill.lr_x=1e6", "--set", "kernel.kind=linear",
               "--set", "distill.epochs=5", "--set", "distill.m=20")
    assert code == 3
    assert (tmp_path / "run" / "trace.csv").is_file()
    assert not (tmp_path / "run" / "coreset.csv").exists()
    assert "numerical failure" in capsys.readouterr().err


def test_refuses_to_overwrite_without_force(tmp_path):
    assert run(tmp_path, "gen") == 0
    assert run(tmp_path, "gen") == 1
    assert run(tmp_path, "gen", force=True) == 0


def test_unknown_key_exits_1(tmp_path, capsys):
    assert run(tmp_path, "distill", "--set", "distill.nonsense=3") == 1
    assert "nonsense" in capsys.readouterr().err


# --- sweep -----------------------------------------------------------------------------------

SWEEP = ("--set", "sweep.objectives=mse,ce", "--set", "sweep.sizes=6,10,14",
         "--set", "sweep.classifiers=krr,logreg", "--set", "sweep.seeds=0,1",
         "--set", "sweep.random_baseline=false", "--set", "sweep.full_baseline=false",
         "--set", "distill.epochs=2")


def test_sweep_grid_of_24(tmp_path):
    assert run(tmp_path, "sweep", *SWEEP) == 0
    table = rows(tmp_path / "run" / "sweep.csv")
    assert len(table) == 24 and all(r["status"] == "ok" for r in table)
    data = json.loads((tmp_path / "run" / "sweep.json").read_text())
    assert len(data["rows"]) == 24


def test_sweep_rerun_is_byte_identical(tmp_path):
    assert run(tmp_path, "sweep", *SWEEP, out="a") == 0
    assert run(tmp_path, "sweep", *SWEEP, out="b") == 0
    for name in ("sweep.csv", "sweep.json", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_sweep_failing_cell_does_not_abort(tmp_path):
    code = run(tmp_path, "sweep", "--set", "sweep.objectives=ce", "--set", "sweep.sizes=6,5000",
               "--set", "sweep.classifiers=knn", "--set", "sweep.random_baseline=false",
               "--set", "sweep.full_baseline=false", "--set", "distill.epochs=1")
    assert code == 0
    table = rows(tmp_path / "run" / "sweep.csv")
    assert [r["status"] == "ok" for r in table] == [True, False]
    assert table[1]["auc"] == ""


def test_sweep_writes_projections(tmp_path):
    assert run(tmp_path, "sweep", *SWEEP, "--set", "sweep.project_size=10") == 0
    for kind in ("mse", "ce"):
        table = rows(tmp_path / "run" / f"projection_{kind}.csv")
        assert sum(r["source"] == f"{kind}_m10" for r in table) == 10


# --- calibrate -------------------------------------------------------------------------------

def test_calibrate_singleton(tmp_path):
    code = run(tmp_path, "calibrate", "--set", "calibrate.grid_alpha=0",
               "--set", "calibrate.grid_beta=0", "--set", "calibrate.epochs=3")
    assert code == 0
    out = json.loads((tmp_path / "run" / "calibration.json").read_text())
    assert (out["alpha_g"], out["beta_g"]) == (0.0, 0.0) and len(out["grid"]) == 1


def test_calibrate_default_grid_is_deterministic(tmp_path):
    for out in ("a", "b"):
        assert run(tmp_path, "calibrate", "--set", "calibrate.epochs=5", out=out) == 0
    a = (tmp_path / "a" / "calibration.json").read_bytes()
    assert a == (tmp_path / "b" / "calibration.json").read_bytes()
    assert len(json.loads(a)["grid"]) == 25


# --- project ---------------------------------------------------------------------------------

def test_project_original_only(tmp_path):
    assert run(tmp_path, "project") == 0
    table = rows(tmp_path / "run" / "projection.csv")
    assert len(table) == 400 and {r["source"] for r in table} == {"original"}


def test_project_with_two_coresets(tmp_path):
    big = ["--set", "synthetic.n=2000", "--set", "synthetic.d=4", "--set", "synthetic.ir=4"]
    for name in ("c1", "c2"):
        argv = ["distill", "--out", str(tmp_path / name), *big, "--set", "distill.m=700",
                "--set", "distill.epochs=0"]
        assert main(argv) == 0
    spec = f"a={tmp_path / 'c1' / 'coreset.csv'},b={tmp_path / 'c2' / 'coreset.csv'}"
    assert main(["project", "--out", str(tmp_path / "p"), *big, "--set",
                 f"project.coresets={spec}"]) == 0
    table = rows(tmp_path / "p" / "projection.csv")
    assert len(table) == 2000 + 700 + 700
    assert sum(r["source"] == "a" for r in table) == 700


def test_project_width_mismatch_exits_2(tmp_path):
    assert main(["distill", "--out", str(tmp_path / "c"), "--set", "synthetic.n=400",
                 "--set", "synthetic.d=3", "--set", "distill.m=10",
                 "--set", "distill.epochs=0"]) == 0
    code = run(tmp_path, "project", "--set",
               f"project.coresets=x={tmp_path / 'c' / 'coreset.csv'}", out="p")
    assert code == 2
