"""Empirical gradient-inequality analysis of recorded flow trajectories.

Near a limit point ``x_inf`` of the flow one expects

    |grad E(x)| >= Z |E(x) - E(x_inf)|**theta

and, for ``theta < 1``, a finite path length bounded by
``(E0 - E_inf)**(1 - theta) / (Z (1 - theta))``. The helpers here fit
``(theta, Z)`` on a window of the energy gap, check the inequality on the
sampled orbit, compare the path length against the bound and decide between
exponential and power-law convergence.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InsufficientData
from .flow import Trajectory

log = logging.getLogger(__name__)

DEFAULT_WINDOW = (1e-10, 1e-3)
MIN_POINTS = 10
RATE_CLASSES = ("Exponential", "PowerLaw", "Undetermined")


@dataclass
class LSEstimate:
    theta: float
    Z: float
    sigma_window: float
    fit_r2: float
    n_points: int
    rate_class: str = "Undetermined"
    log_z_fit: float = float("nan")

    def to_dict(self):
        return asdict(self)


def _r2(y, fitted):
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)


def window_mask(traj: Trajectory, e_inf: float, window=DEFAULT_WINDOW, sigma=np.inf, norm="grad_l2"):
    gap = traj.energy - e_inf
    grad = getattr(traj, norm)
    lo, hi = window
    mask = (gap >= lo) & (gap <= hi) & (grad > 0)
    if np.isfinite(sigma):
        mask &= traj.dist <= sigma
    return mask


def _checked(traj, e_inf, window, sigma, norm):
    if e_inf > traj.energy.min() + 1e-14:
        raise ValueError(f"e_inf {e_inf!r} lies above the lowest recorded energy")
    mask = window_mask(traj, e_inf, window, sigma, norm)
    n = int(mask.sum())
    if n < MIN_POINTS:
        raise InsufficientData(f"{n} samples in the fit window, need {MIN_POINTS}")
    return mask


def _ratios(traj, mask, e_inf, theta, norm):
    return getattr(traj, norm)[mask] / (traj.energy[mask] - e_inf) ** theta


def estimate(traj: Trajectory, e_inf: float, window=DEFAULT_WINDOW, sigma=np.inf,
             norm: str = "grad_l2") -> LSEstimate:
    """Least-squares fit of ``log|grad| = log Z + theta log(E - e_inf)``.

    ``Z`` is then lowered to the infimum of ``|grad| / gap**theta`` on the
    window, so the inequality holds on every fitted sample with equality at
    the worst one. ``norm`` picks the recorded gradient norm to fit against.
    """
    mask = _checked(traj, e_inf, window, sigma, norm)
    x = np.log(traj.energy[mask] - e_inf)
    y = np.log(getattr(traj, norm)[mask])
    theta, log_z = np.polyfit(x, y, 1)
    r2 = _r2(y, theta * x + log_z)
    if not 0.4 <= theta <= 0.99:
        log.warning("fitted exponent %.4f outside [0.4, 0.99]", theta)
    theta = float(np.clip(theta, 1e-6, 1 - 1e-6))
    z = float(np.min(_ratios(traj, mask, e_inf, theta, norm)))
    return LSEstimate(theta, z, float(sigma), float(r2), int(mask.sum()), log_z_fit=float(log_z))


def verify_inequality(traj: Trajectory, theta: float, Z: float, e_inf: float,
                      window=DEFAULT_WINDOW, sigma=np.inf, norm: str = "grad_l2") -> float:
    """Smallest ratio ``|grad| / (Z gap**theta)`` over the window; >= 1 means it holds."""
    mask = _checked(traj, e_inf, window, sigma, norm)
    # dividing the ratios (not the gradients) by Z keeps margin >= 1 exact when Z is their minimum
    return float(np.min(_ratios(traj, mask, e_inf, theta, norm) / Z))


def path_length_bound(traj: Trajectory, theta: float, Z: float, e_inf: float,
                      window=DEFAULT_WINDOW, sigma=np.inf):
    """``(numeric, bound, numeric / bound)`` from the first in-window sample on."""
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    mask = _checked(traj, e_inf, window, sigma, "grad_l2")
    i0 = int(np.argmax(mask))
    numeric = float(traj.length[-1] - traj.length[i0])
    bound = float((traj.energy[i0] - e_inf) ** (1 - theta) / (Z * (1 - theta)))
    return numeric, bound, numeric / bound


def classify_rate(traj: Trajectory, e_inf: float, mu=None, window=DEFAULT_WINDOW, r2_min=0.99,
                  rel_tol=0.1):
    """Decide between ``gap ~ A exp(-2 lam t)`` and ``gap ~ A t**(-beta)``.

    ``mu`` (smallest nonzero slice-Hessian eigenvalue, or a SpectrumReport)
    must match the fitted ``lam`` within ``rel_tol`` for an exponential
    verdict. Returns ``(rate_class, rate, details)`` where ``rate`` is ``lam``
    or ``beta``.
    """
    if mu is not None and hasattr(mu, "mu"):
        mu = mu.mu
    gap = traj.energy - e_inf
    mask = (gap >= window[0]) & (gap <= window[1]) & (traj.t > 0)
    details = {"n_points": int(mask.sum())}
    if mask.sum() < MIN_POINTS:
        return "Undetermined", float("nan"), details
    t, y = traj.t[mask], np.log(gap[mask])
    slope, icpt = np.polyfit(t, y, 1)
    r2_exp = _r2(y, slope * t + icpt)
    lt = np.log(t)
    pslope, picpt = np.polyfit(lt, y, 1)
    r2_pow = _r2(y, pslope * lt + picpt)
    lam, beta = -slope / 2, -pslope
    details.update(r2_exp=r2_exp, r2_pow=r2_pow, lam=float(lam), beta=float(beta))
    if max(r2_exp, r2_pow) < r2_min:
        return "Undetermined", float("nan"), details
    if r2_exp >= r2_pow and r2_exp >= r2_min:
        if mu is None or abs(lam - mu) <= rel_tol * abs(mu):
            return "Exponential", float(lam), details
        return "Undetermined", float(lam), details
    return "PowerLaw", float(beta), details


def estimate_e_inf(traj: Trajectory):
    """Limit energy from the final sample and from Aitken extrapolation of the tail.

    Returns ``(e_inf, method, final, aitken)``. The extrapolated value is used
    when it exists and does not exceed the lowest recorded energy.
    """
    e = traj.energy
    final = float(e.min())
    aitken = float("nan")
    if len(e) >= 3:
        e0, e1, e2 = e[-3:]
        denom = e2 - 2 * e1 + e0
        if denom > 0:
            aitken = float(e2 - (e2 - e1) ** 2 / denom)
    if np.isfinite(aitken) and aitken <= final:
        return aitken, "aitken", final, aitken
    return final, "final", final, aitken


def report(traj: Trajectory, e_inf=None, window=DEFAULT_WINDOW, sigma=np.inf, mu=None) -> dict:
    """Everything the CLI writes for one trajectory."""
    if e_inf is None:
        e_inf, method, final, aitken = estimate_e_inf(traj)
    else:
        method, final, aitken = "given", float(traj.energy.min()), float("nan")
    est = estimate(traj, e_inf, window, sigma)
    rate_class, rate, _ = classify_rate(traj, e_inf, mu, window)
    out = {
        "theta": est.theta,
        "Z": est.Z,
        "sigma_window": est.sigma_window,
        "fit_r2": est.fit_r2,
        "n_points": est.n_points,
        "rate_class": rate_class,
        "lambda": rate if rate_class == "Exponential" else None,
        "e_inf": e_inf,
        "e_inf_method": method,
        "e_inf_final": final,
        "e_inf_aitken": aitken if np.isfinite(aitken) else None,
        "e_inf_discrepancy": abs(final - aitken) if np.isfinite(aitken) else None,
        "margin": verify_inequality(traj, est.theta, est.Z, e_inf, window, sigma),
        "path_ratio": None,
    }
    if rate_class == "PowerLaw":
        out["beta"] = rate
    try:
        out["path_ratio"] = path_length_bound(traj, est.theta, est.Z, e_inf, window, sigma)[2]
    except (ValueError, InsufficientData):
        pass
    try:
        w = estimate(traj, e_inf, window, sigma, norm="grad_wneg1")
        out.update(theta_wneg1=w.theta, Z_wneg1=w.Z, fit_r2_wneg1=w.fit_r2)
    except InsufficientData:
        out.update(theta_wneg1=None, Z_wneg1=None, fit_r2_wneg1=None)
    return out
