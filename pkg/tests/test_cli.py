import json

import numpy as np
import pytest

from gaugeflow import functionals, gaugefix, io
from gaugeflow.cli import EXIT_CONFIG, EXIT_GAUGEFIX, EXIT_NUMERIC, EXIT_OK, EXIT_TMAX, EXIT_VERIFY, main
from gaugeflow.fields import FieldConfig, Tangent, gauge_apply, plaquette_traces, random_gauge
from gaugeflow.flow import Trajectory
from gaugeflow.lattice import LatticeSpec
from gaugeflow.lie import GroupKind

SU2 = GroupKind("su2")


def write_cfg(tmp_path, text, name="exp.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run_cli(*args):
    return main([str(a) for a in args])


def test_flow_from_critical_point(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "group = su2\nextents = 4, 4\nstart.kind = trivial\n")
    assert run_cli("flow", "--config", cfg, "--out", tmp_path / "out") == EXIT_OK
    traj = Trajectory.from_csv(tmp_path / "out" / "traj.csv")
    assert len(traj) == 1
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["reason"] == "converged" and summary["steps"] == 0
    assert json.loads(capsys.readouterr().out) == summary


U1_RUN = """group = u1
extents = 16, 16
spacing = 1.0
seed = 42
functional.kind = pure_ym
start.kind = random
start.amplitude = 0.3
flow.dt0 = 0.1
flow.sample_stride = 10
flow.checkpoint_stride = 500
"""


def test_flow_is_byte_deterministic(tmp_path):
    cfg = write_cfg(tmp_path, U1_RUN)
    outs = []
    for run in ("a", "b"):
        assert run_cli("flow", "--config", cfg, "--out", tmp_path / run) == EXIT_OK
        outs.append({p.name: p.read_bytes() for p in (tmp_path / run).iterdir()})
    assert set(outs[0]) == {"traj.csv", "summary.json", "final.gflx", "checkpoint.gflx"}
    assert outs[0] == outs[1]


def test_flow_t_max_exit_code(tmp_path):
    cfg = write_cfg(tmp_path, "extents = 4, 4\nstart.kind = random\nstart.amplitude = 0.3\nflow.t_max = 0.2\n")
    assert run_cli("flow", "--config", cfg, "--out", tmp_path) == EXIT_TMAX
    assert json.loads((tmp_path / "summary.json").read_text())["reason"] == "t_max"


def test_flow_numeric_failure_exit_code(tmp_path):
    # a start whose plaquettes sit on the cut locus cannot be evaluated
    lat = LatticeSpec((4, 4), 1.0)
    cfg = FieldConfig.trivial(lat, SU2)
    cfg.links[:, 0] = -np.eye(2)
    cfg.links[0, 1] = -np.eye(2)
    io.save_checkpoint(tmp_path / "bad.gflx", cfg)
    c = write_cfg(tmp_path, "extents = 4, 4\n")
    assert run_cli("flow", "--config", c, "--input", tmp_path / "bad.gflx", "--out", tmp_path) == EXIT_NUMERIC


def test_unknown_key_exit_2_names_key(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "extents = 4, 4\nflow.speed = 3\n")
    assert run_cli("flow", "--config", cfg, "--out", tmp_path) == EXIT_CONFIG
    assert "flow.speed" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert run_cli("verify", "--config", tmp_path / "nope.cfg") == EXIT_CONFIG


def test_checkpoint_lattice_mismatch(tmp_path):
    io.save_checkpoint(tmp_path / "c.gflx", FieldConfig.trivial(LatticeSpec((3, 3)), SU2))
    cfg = write_cfg(tmp_path, "extents = 4, 4\n")
    assert run_cli("flow", "--config", cfg, "--input", tmp_path / "c.gflx", "--out", tmp_path) == EXIT_CONFIG


def test_threads_validation(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path, "extents = 3, 3\n")
    monkeypatch.delenv("GAUGEFLOW_THREADS", raising=False)
    assert run_cli("verify", "--config", cfg, "--threads", 0, "--out", tmp_path) == EXIT_CONFIG
    monkeypatch.setenv("GAUGEFLOW_THREADS", "1")
    assert run_cli("verify", "--config", cfg, "--threads", 0, "--out", tmp_path) == EXIT_OK


# --- gauge-fix ------------------------------------------------------------


@pytest.fixture
def gauge_setup(tmp_path, rng):
    lat = LatticeSpec((6, 6), 0.5)
    ref = FieldConfig.trivial(lat, SU2).moved(Tangent.random(lat, SU2, rng, 0.3))
    io.save_checkpoint(tmp_path / "ref.gflx", ref)
    cfg = write_cfg(tmp_path, "group = su2\nextents = 6, 6\nspacing = 0.5\n")
    return lat, ref, cfg


def test_gauge_fix_of_reference_is_identity(tmp_path, gauge_setup):
    lat, ref, cfg = gauge_setup
    code = run_cli("gauge-fix", "--config", cfg, "--input", tmp_path / "ref.gflx", "--ref", tmp_path / "ref.gflx",
                   "--out", tmp_path / "o")
    assert code == EXIT_OK
    fixed = io.load_checkpoint(tmp_path / "o" / "fixed.gflx")
    assert np.array_equal(fixed.links, ref.links)
    rep = json.loads((tmp_path / "o" / "gaugefix.json").read_text())
    assert rep["converged"] and rep["continuation_steps"] == 1


def test_gauge_fix_round_trip(tmp_path, gauge_setup, rng):
    lat, ref, cfg = gauge_setup
    moved = gauge_apply(random_gauge(lat, SU2, rng, 0.3), ref)
    io.save_checkpoint(tmp_path / "in.gflx", moved)
    code = run_cli("gauge-fix", "--config", cfg, "--input", tmp_path / "in.gflx", "--ref", tmp_path / "ref.gflx",
                   "--out", tmp_path / "o")
    assert code == EXIT_OK
    fixed = io.load_checkpoint(tmp_path / "o" / "fixed.gflx")
    assert np.abs(plaquette_traces(fixed) - plaquette_traces(ref)).max() <= 1e-10
    assert np.abs(np.linalg.norm(fixed.phi, axis=1) - np.linalg.norm(ref.phi, axis=1)).max() <= 1e-10


def test_gauge_fix_beyond_empirical_zeta_exits_5(tmp_path, rng):
    lat = LatticeSpec((4, 4), 1.0)
    ref = FieldConfig.trivial(lat, SU2)
    direction = Tangent.random(lat, SU2, rng, 1.0, matter=False)
    zeta, _ = gaugefix.estimate_zeta(ref, direction, hi=3.5, iterations=3, min_step=1e-2)
    assert zeta < 3.5
    io.save_checkpoint(tmp_path / "ref.gflx", ref)
    io.save_checkpoint(tmp_path / "in.gflx", ref.moved(direction, 3.5))
    cfg = write_cfg(tmp_path, "extents = 4, 4\n")
    code = run_cli("gauge-fix", "--config", cfg, "--input", tmp_path / "in.gflx", "--ref", tmp_path / "ref.gflx",
                   "--out", tmp_path)
    assert code == EXIT_GAUGEFIX
    assert json.loads((tmp_path / "gaugefix.json").read_text())["converged"] is False


def test_gauge_fix_needs_both_inputs(tmp_path, gauge_setup):
    _, _, cfg = gauge_setup
    assert run_cli("gauge-fix", "--config", cfg, "--input", tmp_path / "ref.gflx") == EXIT_CONFIG


# --- spectrum, ls-estimate, verify, vortex --------------------------------


def test_spectrum_trivial_su2(tmp_path):
    cfg = write_cfg(tmp_path, "group = su2\nextents = 4, 4\nspectrum.count = 5\n")
    assert run_cli("spectrum", "--config", cfg, "--out", tmp_path) == EXIT_OK
    rep = json.loads((tmp_path / "spectrum.json").read_text())
    assert rep["kernel_dim"] == 3 and rep["mu"] == pytest.approx(4 * np.sin(np.pi / 4) ** 2)


def test_slice_hessian_spectrum_off_critical_is_numeric_error(tmp_path):
    cfg = write_cfg(tmp_path, "extents = 4, 4\nstart.kind = random\nspectrum.operator = slice_hessian\n")
    assert run_cli("spectrum", "--config", cfg, "--out", tmp_path) == EXIT_NUMERIC


def test_ls_estimate_on_synthetic_csv(tmp_path):
    t = np.linspace(0, 14, 3000)
    e = np.exp(-2 * t)
    g = np.sqrt(2 * e)
    traj = Trajectory(t, e, g, g, np.zeros_like(t), np.zeros_like(t))
    traj.to_csv(tmp_path / "traj.csv")
    cfg = write_cfg(tmp_path, "ls.e_inf = 0.0\n")
    assert run_cli("ls-estimate", "--config", cfg, "--input", tmp_path / "traj.csv", "--out", tmp_path) == EXIT_OK
    rep = json.loads((tmp_path / "ls.json").read_text())
    assert rep["theta"] == pytest.approx(0.5, abs=1e-3) and rep["rate_class"] == "Exponential"


def test_ls_estimate_too_few_points(tmp_path):
    traj = Trajectory(*(np.array([0.0, 1.0]),) * 2, np.ones(2), np.ones(2), np.zeros(2), np.zeros(2))
    traj.to_csv(tmp_path / "traj.csv")
    cfg = write_cfg(tmp_path, "seed = 1\n")
    assert run_cli("ls-estimate", "--config", cfg, "--input", tmp_path / "traj.csv", "--out", tmp_path) == EXIT_NUMERIC


def test_verify_default_su2_4d(tmp_path):
    cfg = write_cfg(tmp_path, "group = su2\ndims = 4\nextents = 4\nfunctional.kind = boson\nfunctional.m = 0.3\n"
                              "functional.s = -0.1\n")
    assert run_cli("verify", "--config", cfg, "--out", tmp_path) == EXIT_OK
    tally = json.loads((tmp_path / "verify.json").read_text())
    assert all(v["pass"] for v in tally.values())


def test_verify_minimal_lattice(tmp_path):
    cfg = write_cfg(tmp_path, "group = u1\nextents = 3, 3\nfunctional.kind = ymh\nfunctional.tau = 1.0\n")
    assert run_cli("verify", "--config", cfg, "--out", tmp_path) == EXIT_OK


def test_verify_catches_injected_staple_sign_error(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(functionals, "_POSITION_SIGNS", (1, -1, -1, -1))
    cfg = write_cfg(tmp_path, "group = su2\nextents = 4, 4\n")
    assert run_cli("verify", "--config", cfg, "--out", tmp_path) == EXIT_VERIFY
    err = capsys.readouterr().err
    assert "gradient_fd" in err


def test_vortex_below_threshold_reports_normal_branch(tmp_path):
    cfg = write_cfg(tmp_path, "group = u1\nextents = 8, 8\nfunctional.kind = ymh\nfunctional.tau = 0.01\n"
                              "flow.dt0 = 0.2\nflow.sample_stride = 100\n")
    assert run_cli("vortex", "--config", cfg, "--out", tmp_path) == EXIT_OK
    rep = json.loads((tmp_path / "vortex.json").read_text())
    assert rep["branch"] == "normal" and not rep["above_threshold"]
    assert (tmp_path / "vortex.gflx").exists()


def test_vortex_requires_u1_on_two_torus(tmp_path):
    cfg = write_cfg(tmp_path, "group = su2\nextents = 4, 4\n")
    assert run_cli("vortex", "--config", cfg, "--out", tmp_path) == EXIT_CONFIG
