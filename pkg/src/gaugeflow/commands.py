"""Implementations of the CLI subcommands. Each returns a process exit code."""
from __future__ import annotations

import sys
from io import StringIO
from pathlib import Path

import numpy as np

from . import gaugefix, hodge, io, lie, lojasiewicz, verify, vortex
from .cli import EXIT_CONFIG, EXIT_GAUGEFIX, EXIT_NUMERIC, EXIT_OK, EXIT_TMAX, EXIT_VERIFY
from .config import ExperimentConfig
from .errors import (
    ConfigError,
    DimensionMismatch,
    InsufficientData,
    LogBranch,
    NoConvergence,
    NotCritical,
    StepUnderflow,
)
from .fields import FieldConfig, Tangent, gauge_apply, sobolev_norm
from .flow import dissipation_check, run, write_csv


def _fail(code, message):
    print(message, file=sys.stderr)
    return code


def _emit(out_dir, name, payload):
    io.write_json(Path(out_dir) / name, payload)
    sys.stdout.write(io.dumps(payload))


def start_config(cfg: ExperimentConfig) -> FieldConfig:
    """Starting configuration described by the ``start.*`` keys."""
    lat, group, seed = cfg.lattice, cfg.group, cfg.seed
    kind, amp = cfg["start.kind"], cfg["start.amplitude"]
    phi0 = cfg["start.phi"]
    if kind == "flux":
        if group.kind != "u1" or lat.d != 2:
            raise ConfigError("start.kind = flux needs group = u1 on a 2-torus", key="start.kind")
        base = vortex.flux_connection(lat, cfg["start.flux"])
        base = FieldConfig(lat, group, base.links, base.phi)
    else:
        base = FieldConfig.trivial(lat, group)
    if kind == "torus":
        angles = cfg["start.holonomy"]
        if angles is None or len(angles) != lat.d:
            raise ConfigError(f"start.holonomy needs {lat.d} angles", key="start.holonomy")
        for mu, a in enumerate(angles):
            coords = np.zeros(group.dim)
            coords[-1] = a
            base.links[:, mu] = lie.exp_map(lie.from_coords(coords))
    base.phi[:] = phi0
    if kind == "trivial":
        return base
    noise = io.site_normals(seed, "start", lat.volume, lat.d * group.dim + 2 * group.n)
    links = lie.from_coords(noise[:, : lat.d * group.dim].reshape(lat.volume, lat.d, group.dim))
    phi = noise[:, lat.d * group.dim:].reshape(lat.volume, group.n, 2)
    phi = phi[..., 0] + 1j * phi[..., 1]
    if not cfg.functional.has_matter:
        phi = 0 * phi
    return base.moved(Tangent(lat, group, links, phi), amp, reunitarize=True)


def _load_input(cfg, path):
    state = io.load_checkpoint(path)
    if state.lattice != cfg.lattice or state.group != cfg.group:
        raise ConfigError(f"checkpoint {path} does not match the configured lattice/group", key="--input")
    return state


def cmd_flow(cfg: ExperimentConfig, args) -> int:
    out = Path(args.out)
    try:
        start = _load_input(cfg, args.input) if args.input else start_config(cfg)
        spec = cfg.functional
        params = cfg.flow
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, f"config error: {exc} (key: {exc.key})")

    def checkpoint(step, t, state):
        io.save_checkpoint(out / "checkpoint.gflx", state)

    try:
        traj = run(spec, start, params, on_checkpoint=checkpoint)
    except (LogBranch, StepUnderflow, NoConvergence) as exc:
        return _fail(EXIT_NUMERIC, f"numerical failure: {type(exc).__name__}: {exc}")
    out.mkdir(parents=True, exist_ok=True)
    buf = StringIO()
    write_csv(traj, buf)
    io.atomic_write(out / "traj.csv", buf.getvalue())
    io.save_checkpoint(out / "final.gflx", traj.final)
    summary = {
        "reason": traj.reason,
        "steps": traj.steps,
        "rejected_steps": traj.rejected,
        "samples": len(traj),
        "t_final": traj.t[-1],
        "energy_initial": traj.energy[0],
        "energy_final": traj.energy[-1],
        "grad_l2_final": traj.grad_l2[-1],
        "grad_wneg1_final": traj.grad_wneg1[-1],
        "path_length": traj.length[-1],
        "dissipation_defect": dissipation_check(traj),
        "functional": cfg["functional.kind"],
        "seed": cfg.seed,
    }
    _emit(out, "summary.json", summary)
    return EXIT_OK if traj.reason == "converged" else EXIT_TMAX


def cmd_gauge_fix(cfg: ExperimentConfig, args) -> int:
    if not args.input or not args.ref:
        return _fail(EXIT_CONFIG, "config error: gauge-fix needs --input and --ref (key: --input)")
    try:
        state, ref = _load_input(cfg, args.input), _load_input(cfg, args.ref)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, f"config error: {exc} (key: {exc.key})")
    out = Path(args.out)
    tol, max_newton = cfg["gaugefix.tol"], cfg["gaugefix.max_newton"]
    try:
        u, report = gaugefix.continuation_fix(state, ref, tol, max_newton)
    except (NoConvergence, LogBranch) as exc:
        residual = getattr(exc, "residual", None)
        failed = gaugefix.GaugeFixReport(False, np.inf if residual is None else residual)
        _emit(out, "gaugefix.json", failed.to_dict())
        return _fail(EXIT_GAUGEFIX, f"gauge fixing failed: {exc} (last residual {residual})")
    if cfg["gaugefix.zeta_iterations"] > 0:
        direction = gaugefix.relative_difference(state, ref)
        unit = direction * (1.0 / max(sobolev_norm(direction, 1, 2), 1e-300))
        amp, _ = gaugefix.estimate_zeta(ref, unit, hi=cfg["gaugefix.zeta_max"],
                                        iterations=cfg["gaugefix.zeta_iterations"], tol=tol,
                                        max_newton=max_newton)
        report.empirical_zeta = amp
    fixed = gauge_apply(u, state)
    io.save_checkpoint(out / "fixed.gflx", fixed)
    _emit(out, "gaugefix.json", report.to_dict())
    return EXIT_OK


def cmd_spectrum(cfg: ExperimentConfig, args) -> int:
    try:
        state = _load_input(cfg, args.input) if args.input else start_config(cfg)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, f"config error: {exc} (key: {exc.key})")
    which, count = cfg["spectrum.operator"], cfg["spectrum.count"]
    try:
        if which == "slice_hessian":
            from .functionals import slice_hessian_spectrum

            rep = slice_hessian_spectrum(cfg.functional, state, count)
        else:
            op = getattr(hodge, which)(state)
            rep = hodge.spectrum_low(op, count)
    except (NotCritical, NoConvergence, LogBranch) as exc:
        return _fail(EXIT_NUMERIC, f"numerical failure: {type(exc).__name__}: {exc}")
    payload = rep.to_dict()
    payload["operator"] = which
    _emit(args.out, "spectrum.json", payload)
    return EXIT_OK


def cmd_ls_estimate(cfg: ExperimentConfig, args) -> int:
    if not args.input:
        return _fail(EXIT_CONFIG, "config error: ls-estimate needs --input traj.csv (key: --input)")
    from .flow import Trajectory

    try:
        traj = Trajectory.from_csv(args.input)
    except (OSError, ValueError) as exc:
        return _fail(EXIT_CONFIG, f"config error: cannot read trajectory: {exc} (key: --input)")
    try:
        payload = lojasiewicz.report(traj, cfg["ls.e_inf"], cfg.window, cfg["ls.sigma"], cfg["ls.mu"])
    except (InsufficientData, ValueError) as exc:
        return _fail(EXIT_NUMERIC, f"numerical failure: {exc}")
    _emit(args.out, "ls.json", payload)
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig, args) -> int:
    rng = io.generator(cfg.seed, "verify")
    tally = verify.run_all(cfg.functional, cfg.lattice, cfg.group, rng, cfg["verify.samples"])
    _emit(args.out, "verify.json", tally)
    failing = [name for name, r in tally.items() if not r["pass"]]
    if failing:
        return _fail(EXIT_VERIFY, "failing suites: " + ", ".join(failing))
    return EXIT_OK


def cmd_vortex(cfg: ExperimentConfig, args) -> int:
    lat = cfg.lattice
    if cfg.group.kind != "u1" or cfg.group.rep_charge != 1 or lat.d != 2:
        return _fail(EXIT_CONFIG, "config error: vortex needs group = u1, rep_charge = 1, dims = 2 (key: group)")
    tau = cfg["functional.tau"]
    try:
        result = vortex.run_vortex(lat, tau, cfg["vortex.flux"], cfg.seed, cfg.flow)
    except (LogBranch, StepUnderflow, NoConvergence, DimensionMismatch) as exc:
        return _fail(EXIT_NUMERIC, f"numerical failure: {type(exc).__name__}: {exc}")
    io.save_checkpoint(Path(args.out) / "vortex.gflx", result.config)
    report = result.report
    _emit(args.out, "vortex.json", report)
    return EXIT_OK if report["flow_reason"] == "converged" else EXIT_TMAX
