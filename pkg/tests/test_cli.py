import json

import pandas as pd
import pytest

from stadium_decay import resolvent2d
from stadium_decay.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, build_parser, main, resolve_config
from stadium_decay.config import Task
from stadium_decay.exceptions import SolverError


def _summary(out):
    return json.loads((out / "summary.json").read_text())


def _checks(summary):
    return {check["name"]: check for check in summary["checks"]}


def test_mesh_info_run(tmp_path):
    out = tmp_path / "mesh"
    assert main(["mesh-info", "--out", str(out)]) == EXIT_OK
    summary = _summary(out)
    assert summary["task"] == "mesh-info"
    assert all(check["pass"] for check in summary["checks"])
    assert {"mesh.json", "config.json"} <= set(summary["artifacts"])
    mesh = json.loads((out / "mesh.json").read_text())
    assert mesh["mesh"]["n_interior"] > 0
    assert mesh["damping"]["kind"] == "wing_continuous"


@pytest.mark.parametrize(
    "extra",
    [
        ["--set", "domain.h=-1"],
        ["--set", "domain"],
        ["--set", "damping.colour=1"],
        ["--config", "does-not-exist.json"],
    ],
)
def test_configuration_errors_exit_2(tmp_path, extra):
    out = tmp_path / "bad"
    assert main(["sweep", "--out", str(out), *extra]) == EXIT_CONFIG
    assert not (out / "summary.json").exists()


def test_numerical_failure_exits_3(tmp_path):
    out = tmp_path / "cfl"
    assert main(["evolve", "--out", str(out), "--set", "domain.h=0.2", "--set", "evolve.dt=1"]) == EXIT_NUMERICAL
    assert not (out / "summary.json").exists()


def test_flags_take_precedence_over_the_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"task": "sweep", "jobs": 1, "seed": 3, "domain": {"h": 0.1}}))
    args = build_parser().parse_args(
        ["mesh-info", "--config", str(path), "--jobs", "2", "--set", "domain.h=0.2", "--out", "123"]
    )
    config = resolve_config(args)
    assert config.task is Task.MESH_INFO
    assert config.jobs == 2
    assert config.seed == 3
    assert config.domain.h == 0.2
    assert config.output_dir == "123"


def test_lemma31_run_is_reproducible(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    for out in (first, second):
        assert main(["lemma31", "--out", str(out), "--set", "lemma31.orders=[4,6]"]) == EXIT_OK
    assert (first / "lemma31.csv").read_bytes() == (second / "lemma31.csv").read_bytes()
    summary = _summary(first)
    assert all(check["pass"] for check in summary["checks"])
    table = pd.read_csv(first / "lemma31.csv")
    assert list(table.columns) == ["m", "n", "constant", "constant_refined", "relative_change"]
    assert len(table) == 3 + 5
    assert _summary(first)["config_hash"] != ""


def test_spectrum_run_on_coarse_stadium(tmp_path):
    out = tmp_path / "spectrum"
    assert main(["spectrum", "--out", str(out), "--set", "domain.h=0.2"]) == EXIT_OK
    checks = _checks(_summary(out))
    for name in ["eigen_residual", "spectral_band", "reflection_symmetry",
                 "lower_halfplane_0-1i", "lower_halfplane_0-2i", "lower_halfplane_0-4i"]:
        assert checks[name]["pass"], name
    frame = pd.read_csv(out / "spectrum.csv")
    assert list(frame.columns) == ["re_lambda", "im_lambda", "residual"]
    assert len(pd.read_csv(out / "lower_halfplane.csv")) == 3


def test_constant_damping_spectrum_matches_oracle(tmp_path):
    out = tmp_path / "oracle"
    argv = ["spectrum", "--out", str(out), "--set", 'domain.shape="rectangle"', "--set", "domain.h=0.125",
            "--set", "domain.Ly=1", "--set", 'damping.kind="constant"', "--set", "damping.value=0.5"]
    assert main(argv) == EXIT_OK
    assert _checks(_summary(out))["constant_damping_oracle"]["pass"]


def test_damped_evolution_run(tmp_path):
    out = tmp_path / "evolve"
    argv = ["evolve", "--out", str(out), "--set", "domain.h=0.2", "--set", "evolve.T=6", "--set", "evolve.orders=[1]"]
    assert main(argv) == EXIT_OK
    summary = _summary(out)
    checks = _checks(summary)
    assert checks["energy_monotone"]["pass"]
    assert checks["decay_functional_k1_finite"]["pass"]
    assert "k1" in summary["fits"]["decay_functional"]
    frame = pd.read_csv(out / "evolve.csv")
    assert list(frame.columns) == ["t", "E", "sqrtE", "functional_k1"]


@pytest.mark.slow
def test_undamped_rectangle_conserves_energy(tmp_path):
    out = tmp_path / "undamped"
    argv = ["evolve", "--out", str(out), "--set", 'domain.shape="rectangle"', "--set", "domain.h=0.05",
            "--set", 'damping.kind="constant"', "--set", "damping.value=0", "--set", 'evolve.data="eigenfunction"',
            "--set", "evolve.dt=0.004"]
    assert main(argv) == EXIT_OK
    checks = _checks(_summary(out))
    assert checks["energy_conservation"]["pass"]
    assert checks["collocated_energy_drift"]["pass"]
    assert checks["collocated_energy_dt2_order"]["pass"]


@pytest.mark.slow
def test_sweep_run(tmp_path):
    out = tmp_path / "sweep"
    argv = ["sweep", "--out", str(out), "--jobs", "2", "--set", "domain.h=0.1", "--set", "sweep.lambdas=[5,7,10,14]"]
    assert main(argv) == EXIT_OK
    checks = _checks(_summary(out))
    assert checks["imaginary_identity"]["pass"]
    assert checks["h10_bound"]["pass"]
    frame = pd.read_csv(out / "sweep.csv")
    assert list(frame["lambda"]) == [5, 7, 10, 14]
    assert (frame["norm"] > 0).all()


@pytest.mark.slow
def test_quasimode_run(tmp_path):
    out = tmp_path / "quasimode"
    argv = ["quasimode", "--out", str(out), "--set", "quasimode.ks=[8,16]", "--set", "quasimode.h=0.1"]
    assert main(argv) == EXIT_OK
    summary = _summary(out)
    frame = pd.read_csv(out / "quasimode.csv")
    assert set(frame["k"]) == {8, 16}
    assert (frame["t"] <= frame["k"] / 4 + 1e-12).all()
    assert set(summary["fits"]["defects"]) == {"k8", "k16"}


def test_collocated_drift_fails_at_coarse_step(tmp_path):
    out = tmp_path / "coarse"
    argv = ["evolve", "--out", str(out), "--set", 'domain.shape="rectangle"', "--set", "domain.h=0.1",
            "--set", 'damping.kind="constant"', "--set", "damping.value=0", "--set", 'evolve.data="eigenfunction"',
            "--set", "evolve.T=2"]
    assert main(argv) == EXIT_OK
    checks = _checks(_summary(out))
    assert checks["energy_conservation"]["pass"]
    assert not checks["collocated_energy_drift"]["pass"]
    assert checks["collocated_energy_drift"]["value"] > 1e-3


def test_sweep_csv_does_not_depend_on_jobs(tmp_path):
    outs = []
    for jobs in (1, 3):
        out = tmp_path / f"jobs{jobs}"
        argv = ["sweep", "--out", str(out), "--jobs", str(jobs), "--set", "domain.h=0.2",
                "--set", "sweep.lambdas=[1,1.5,2,2.5]", "--set", "sweep.window_min=1"]
        assert main(argv) == EXIT_OK
        outs.append(out)
    assert (outs[0] / "sweep.csv").read_bytes() == (outs[1] / "sweep.csv").read_bytes()


def test_failed_sweep_entry_exits_3_with_diagnostics(tmp_path, monkeypatch):
    original = resolvent2d._resolvent_entry

    def failing(mesh, damping, lam, tol, **kwargs):
        if lam == 2.0:
            raise SolverError("singular factor")
        return original(mesh, damping, lam, tol, **kwargs)

    monkeypatch.setattr(resolvent2d, "_resolvent_entry", failing)
    out = tmp_path / "failed"
    argv = ["sweep", "--out", str(out), "--set", "domain.h=0.2", "--set", "sweep.lambdas=[1,1.5,2,2.5,3]",
            "--set", "sweep.window_min=1"]
    assert main(argv) == EXIT_NUMERICAL
    summary = _summary(out)
    assert summary["failures"] == [{"sweep": "resolvent", "lambda": 2.0, "message": "singular factor"}]
    assert not _checks(summary)["sweep_failures"]["pass"]
    frame = pd.read_csv(out / "sweep.csv")
    assert frame.loc[frame["lambda"] == 2.0, "message"].item() == "singular factor"
    assert "resolvent_fit_residual" in _checks(summary)
