"""Gradient flow ``d/dt (U, Phi) = -grad E`` with energy-dissipation bookkeeping.

Both integrators move links by group exponentials, ``U -> exp(-dt h g) U``, so
unitarity is kept up to round-off; a cheap re-projection after every step
removes even that drift. The RK3 scheme is the low-storage third-order
Lie-group integrator (Williamson tableau lifted to the group):

    W1 = exp(1/4 Z0) W0
    W2 = exp(8/9 Z1 - 17/36 Z0) W1
    W3 = exp(3/4 Z2 - 8/9 Z1 + 17/36 Z0) W2,   Zi = -dt grad(Wi).
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import LogBranch, NoConvergence, StepUnderflow
from .fields import FieldConfig, dual_norm_wneg1, log_difference, sobolev_norm
from .functionals import FunctionalSpec, energy, gradient

log = logging.getLogger(__name__)

MIN_DT = 1e-12
# energy rises smaller than this many ulps of |E| are summation noise, not instability
ROUNDOFF_ULPS = 64
CSV_HEADER = ("t", "energy", "grad_l2", "grad_wneg1", "dist")


@dataclass(frozen=True)
class FlowParams:
    dt0: float = 0.05
    integrator: str = "rk3"
    adaptive: bool = True
    grad_tol: float = 1e-10
    t_max: float = 1e4
    sample_stride: int = 1
    checkpoint_stride: int = 0
    max_steps: int = 10_000_000
    regauge_stride: int = 0

    def __post_init__(self):
        if not self.dt0 > 0:
            raise ValueError("dt0 must be positive")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.integrator not in ("euler", "rk3"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")
        if self.checkpoint_stride < 0 or self.regauge_stride < 0:
            raise ValueError("strides must be non-negative")


@dataclass
class Trajectory:
    t: np.ndarray
    energy: np.ndarray
    grad_l2: np.ndarray
    grad_wneg1: np.ndarray
    dist: np.ndarray
    length: np.ndarray
    final: Optional[FieldConfig] = None
    reason: str = "converged"
    steps: int = 0
    rejected: int = 0
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    def rows(self):
        return zip(self.t, self.energy, self.grad_l2, self.grad_wneg1, self.dist)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            write_csv(self, fh)

    @classmethod
    def from_csv(cls, path):
        """Load a trajectory written by :func:`write_csv`.

        The cumulative path length is rebuilt as a left Riemann sum of
        ``grad_l2`` over the sample times, which is exact for stride-1 output.
        """
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != CSV_HEADER:
                raise ValueError(f"unexpected trajectory header {header}")
            data = np.array([[float(x) for x in row] for row in reader if row], dtype=float)
        data = data.reshape(-1, len(CSV_HEADER))
        t, e, g, gw, dist = data.T
        length = np.concatenate([[0.0], np.cumsum(g[:-1] * np.diff(t))])
        return cls(t, e, g, gw, dist, length, reason="loaded")


def write_csv(traj: Trajectory, fh):
    fh.write(",".join(CSV_HEADER) + "\n")
    for row in traj.rows():
        fh.write(",".join(format(float(x), ".17g") for x in row) + "\n")


def step(spec: FunctionalSpec, cfg: FieldConfig, dt: float, integrator: str = "rk3",
         grad=None) -> FieldConfig:
    """One explicit step of the gradient flow."""
    z0 = -(grad if grad is not None else gradient(spec, cfg))
    if integrator == "euler":
        return cfg.moved(z0, dt, reunitarize=True)
    if integrator != "rk3":
        raise ValueError(f"unknown integrator {integrator!r}")
    w1 = cfg.moved(z0, dt / 4)
    z1 = -gradient(spec, w1)
    w2 = w1.moved(z1 * (8 / 9) - z0 * (17 / 36), dt)
    z2 = -gradient(spec, w2)
    return w2.moved(z2 * (3 / 4) - z1 * (8 / 9) + z0 * (17 / 36), dt, reunitarize=True)


def run(spec: FunctionalSpec, cfg: FieldConfig, params: FlowParams, on_checkpoint=None,
        store_samples: bool = True) -> Trajectory:
    """Integrate until the L2 gradient norm drops to ``grad_tol`` or ``t_max`` is hit.

    In adaptive mode a step that raises the energy (beyond summation
    round-off) is discarded and retried with half the step; after five accepted steps in a row the step doubles
    again, never beyond ``dt0``. ``on_checkpoint(step_index, t, cfg)`` is
    called every ``checkpoint_stride`` accepted steps.
    """
    spec.check(cfg)
    start = cfg
    t, dt = 0.0, params.dt0
    e = energy(spec, cfg)
    g = gradient(spec, cfg)
    gn = g.norm()
    length = 0.0
    rec = {k: [] for k in ("t", "energy", "grad_l2", "grad_wneg1", "length")}
    configs = []
    accepted = rejected = streak = 0
    since_sample = 0

    def record():
        rec["t"].append(t)
        rec["energy"].append(e)
        rec["grad_l2"].append(gn)
        rec["grad_wneg1"].append(dual_norm_wneg1(g))
        rec["length"].append(length)
        configs.append(cfg if store_samples else None)

    record()
    reason = "converged"
    while True:
        if gn <= params.grad_tol:
            reason = "converged"
            break
        if t >= params.t_max or accepted >= params.max_steps:
            reason = "t_max"
            break
        h = min(dt, params.t_max - t)
        trial = step(spec, cfg, h, params.integrator, grad=g)
        e_trial = energy(spec, trial)
        if params.adaptive and not e_trial <= e + ROUNDOFF_ULPS * np.spacing(abs(e)):
            rejected += 1
            streak = 0
            dt = h / 2
            if dt < MIN_DT:
                raise StepUnderflow(f"step fell below {MIN_DT} at t={t:.6g}, energy {e:.17g}")
            continue
        length += gn * h
        t += h
        cfg, e = trial, e_trial
        accepted += 1
        streak += 1
        if params.adaptive and streak >= 5 and dt < params.dt0:
            dt = min(params.dt0, 2 * dt)
            streak = 0
        if params.regauge_stride and accepted % params.regauge_stride == 0:
            cfg = _regauge(cfg, start)
        g = gradient(spec, cfg)
        gn = g.norm()
        since_sample += 1
        if params.checkpoint_stride and on_checkpoint and accepted % params.checkpoint_stride == 0:
            on_checkpoint(accepted, t, cfg)
        if since_sample >= params.sample_stride or gn <= params.grad_tol:
            record()
            since_sample = 0
    if since_sample:
        record()
    dist = np.array([_distance(c, cfg) for c in configs]) if store_samples else np.full(len(configs), np.nan)
    return Trajectory(
        np.array(rec["t"]),
        np.array(rec["energy"]),
        np.array(rec["grad_l2"]),
        np.array(rec["grad_wneg1"]),
        dist,
        np.array(rec["length"]),
        final=cfg,
        reason=reason,
        steps=accepted,
        rejected=rejected,
    )


def _distance(cfg, final):
    try:
        return sobolev_norm(log_difference(cfg, final), 1, 2)
    except LogBranch:
        return np.inf


def _regauge(cfg, ref):
    from .fields import gauge_apply
    from .gaugefix import continuation_fix

    try:
        u, _ = continuation_fix(cfg, ref)
    except (NoConvergence, LogBranch) as exc:
        log.warning("skipping re-gauge: %s", exc)
        return cfg
    return gauge_apply(u, cfg)


def dissipation_check(traj: Trajectory) -> float:
    """Worst relative mismatch between ``-dE/dt`` and ``|grad|^2`` between samples.

    The difference quotient is compared with the trapezoid average of the
    squared gradient norm at the two ends. Intervals whose energy change is
    at the round-off level are skipped.
    """
    if len(traj) < 2:
        return 0.0
    worst = 0.0
    for i in range(len(traj) - 1):
        dt = traj.t[i + 1] - traj.t[i]
        de = traj.energy[i + 1] - traj.energy[i]
        scale = max(abs(traj.energy[i]), abs(traj.energy[i + 1]))
        if dt <= 0 or abs(de) <= 1e3 * np.finfo(float).eps * scale:
            continue
        rate = 0.5 * (traj.grad_l2[i] ** 2 + traj.grad_l2[i + 1] ** 2)
        if rate == 0:
            continue
        worst = max(worst, abs(-de / dt - rate) / rate)
    return float(worst)
