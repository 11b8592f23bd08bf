"""Coulomb gauge fixing relative to a reference pair, by continuation plus Newton.

The unknown is a gauge transformation ``u`` with

    d_{A0,Phi0}^* ( u(A, Phi) - (A0, Phi0) ) = 0.

Starting from ``u = 1`` at the reference, the target configuration is reached
along the path ``U_s = exp(s h a) U0``, ``Phi_s = Phi0 + s phi`` where
``(a, phi)`` is the relative difference. Each path point is corrected by
Newton iterations on the exact linearization
``eta -> d_{A0,Phi0}^* D(relative difference)[d_{B} eta]``, ``B = u(A_s)``,
whose leading part is the perturbed Laplacian ``d_{A0}^* d_{B}``.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import lie
from .errors import LogBranch, NoConvergence
from .fields import FieldConfig, Tangent, d0, gauge_apply, log_difference, site_dot, sobolev_norm
from .hodge import (
    LinearOperatorHandle,
    nonsym_solve,
    pair_dstar,
    pair_kernel,
    site_from_vector,
    site_to_vector,
)

log = logging.getLogger(__name__)


@dataclass
class GaugeFixReport:
    converged: bool
    final_residual: float
    newton_iterations_total: int = 0
    continuation_steps: int = 0
    norm_ratio: Optional[float] = None
    empirical_zeta: Optional[float] = None

    def to_dict(self):
        return asdict(self)


def relative_difference(cfg: FieldConfig, ref: FieldConfig) -> Tangent:
    return log_difference(cfg, ref)


def coulomb_residual(cfg: FieldConfig, ref: FieldConfig) -> np.ndarray:
    return pair_dstar(ref, relative_difference(cfg, ref))


def residual_norm(lattice, field) -> float:
    return float(np.sqrt(max(site_dot(lattice, field, field), 0.0)))


def jacobian(ref: FieldConfig, current: FieldConfig, rel: Tangent) -> LinearOperatorHandle:
    """Derivative of the Coulomb residual under ``current -> exp(eta)(current)``."""
    lat, group, h = ref.lattice, ref.group, ref.lattice.h
    ha = h * rel.links

    def mv(x):
        eta = site_from_vector(ref, x)
        moved = h * d0(current, eta)
        da = lie.dlog_left(ha, moved) / h
        dphi = -lie.rep_algebra(group, eta, current.phi)
        return site_to_vector(pair_dstar(ref, Tangent(lat, group, da, dphi)))

    return LinearOperatorHandle(mv, lat.volume * group.dim, symmetric=False, domain="site")


def newton_fix(cfg: FieldConfig, ref: FieldConfig, tol=1e-10, max_newton=20, u0=None,
               kernel=None, linear_tol=1e-10):
    """Newton iteration for the Coulomb condition, starting from ``u0``.

    Returns ``(u, report)``; raises NoConvergence when the iteration leaves
    its basin (growing residual, cut-locus crossing, or ``max_newton`` hit).
    """
    lat, group = cfg.lattice, cfg.group
    if kernel is None:
        kernel = pair_kernel(ref)
    u = group.identity((lat.volume,)) if u0 is None else u0.copy()
    first = None
    for it in range(max_newton + 1):
        current = gauge_apply(u, cfg)
        try:
            rel = relative_difference(current, ref)
        except LogBranch as exc:
            raise NoConvergence(f"relative difference crossed the cut locus: {exc}") from exc
        res = pair_dstar(ref, rel)
        r = residual_norm(lat, res)
        first = r if first is None else first
        if r <= tol:
            return u, GaugeFixReport(True, r, it, 0)
        if it == max_newton or not np.isfinite(r) or r > 1e3 * max(first, tol):
            raise NoConvergence(f"Newton stopped at residual {r:.3e} after {it} steps", r)
        jac = jacobian(ref, current, rel)
        step = nonsym_solve(jac, -site_to_vector(res), tol=linear_tol, kernel=kernel)
        u = u @ lie.exp_map(site_from_vector(ref, step))
    raise AssertionError("unreachable")


def continuation_fix(cfg: FieldConfig, ref: FieldConfig, tol=1e-10, max_newton=20,
                     min_step=1e-6, initial_step=1.0):
    """Fix ``cfg`` into Coulomb gauge relative to ``ref`` by the method of continuity."""
    if not cfg.compatible(ref):
        raise ValueError("configurations live on different lattices or groups")
    lat, group = cfg.lattice, cfg.group
    full = relative_difference(cfg, ref)
    kernel = pair_kernel(ref)
    u = group.identity((lat.volume,))
    s, ds = 0.0, min(1.0, initial_step)
    steps = newton_total = streak = 0
    last_residual = np.inf
    while s < 1.0:
        target = min(1.0, s + ds)
        path_cfg = ref.moved(full, target)
        try:
            u_new, rep = newton_fix(path_cfg, ref, tol, max_newton, u, kernel)
        except NoConvergence as exc:
            last_residual = exc.residual if exc.residual is not None else last_residual
            ds /= 2
            streak = 0
            log.debug("continuation step failed at s=%.6f, halving to %.3e", target, ds)
            if ds < min_step:
                raise NoConvergence(
                    f"continuation step underflow at s={s:.6f}", last_residual
                ) from exc
            continue
        u, s = u_new, target
        steps += 1
        newton_total += rep.newton_iterations_total
        streak += 1
        if streak >= 2:
            ds = min(1.0, 2 * ds)
            streak = 0
    # polish on the exact input; the path endpoint equals it only up to round-off
    u, rep = newton_fix(cfg, ref, tol, max_newton, u, kernel)
    newton_total += rep.newton_iterations_total
    before = sobolev_norm(full, 1, 2)
    after = sobolev_norm(relative_difference(gauge_apply(u, cfg), ref), 1, 2)
    ratio = after / before if before > 1e-12 else None
    return u, GaugeFixReport(True, rep.final_residual, newton_total, steps, ratio)


def perturbation(ref: FieldConfig, direction: Tangent, amplitude: float) -> FieldConfig:
    return ref.moved(direction, amplitude)


def estimate_zeta(ref: FieldConfig, direction: Tangent, lo=0.0, hi=2.0, iterations=8, tol=1e-10,
                  max_newton=20, min_step=1e-3):
    """Bisect the perturbation amplitude along ``direction`` at which fixing fails.

    Returns ``(amplitude, w12_norm)`` of the largest amplitude that converged.
    Amplitudes whose relative difference already sits on the cut locus count as
    failures.
    """

    def ok(amp):
        try:
            continuation_fix(perturbation(ref, direction, amp), ref, tol, max_newton, min_step)
            return True
        except (NoConvergence, LogBranch):
            return False

    if ok(hi):
        lo = hi
    else:
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
    norm = sobolev_norm(direction * lo, 1, 2)
    return lo, norm
