"""Energies, gradients and Hessian-vector products of the lattice functionals.

All three kinds share one lattice action

    E = wF * h**(d-4)/2 * sum_p |log P_p|**2
      + wD * h**d/2 * sum_{x,mu} |D_mu Phi(x)|**2
      + h**d * sum_x V(|Phi(x)|**2)

with ``(wF, wD, V)`` fixed by the kind:

* ``pure_ym``: (1, 0, 0)
* ``boson``:   (1, 1, -(m r + s r**2)/2)
* ``ymh``:     (1/2, 2, (r - tau)**2/2), U(1) on a 2-torus only.

The gradient is the L2 gradient with respect to left-trivialized tangent
vectors (see :mod:`gaugeflow.fields`). The Hessian is the symmetric second
variation along one-parameter curves ``exp(s h a) U``; on the link block it
differs from the plain derivative of the gradient by ``(h/2) [grad, a]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lie
from .errors import DimensionMismatch, NotCritical
from .fields import FieldConfig, Tangent, cov_diff, plaquette_corners
from .lie import commutator, dagger

KINDS = ("pure_ym", "boson", "ymh")

# signs of the four oriented links in the plaquette boundary
_POSITION_SIGNS = (1, 1, -1, -1)


@dataclass
class FunctionalSpec:
    kind: str = "pure_ym"
    m: object = 0.0
    s: object = 0.0
    tau: float = 0.0
    weights: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown functional kind {self.kind!r}")
        self.weights = {"pure_ym": (1.0, 0.0), "boson": (1.0, 1.0), "ymh": (0.5, 2.0)}[self.kind]

    @property
    def has_matter(self) -> bool:
        return self.kind != "pure_ym"

    def check(self, cfg: FieldConfig):
        if self.kind == "ymh" and (cfg.lattice.d != 2 or cfg.group.kind != "u1"):
            raise DimensionMismatch("the Yang-Mills-Higgs functional needs U(1) on a 2-torus")
        for name in ("m", "s"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim and arr.shape != (cfg.lattice.volume,):
                raise DimensionMismatch(f"{name} has {arr.shape[0]} entries, lattice has {cfg.lattice.volume} sites")

    def potential(self, r):
        """``V(r), V'(r), V''(r)`` per site, ``r = |Phi|**2``."""
        if self.kind == "pure_ym":
            z = np.zeros_like(r)
            return z, z, z
        if self.kind == "boson":
            m = np.asarray(self.m, dtype=float)
            s = np.asarray(self.s, dtype=float)
            return -(m * r + s * r**2) / 2, -(m + 2 * s * r) / 2, -s + 0 * r
        return (r - self.tau) ** 2 / 2, r - self.tau, np.ones_like(r)


class _Plaquettes:
    """Corner links, holonomies and their logs for every plane."""

    def __init__(self, cfg: FieldConfig):
        self.corners = []
        self.logs = []
        for plane in range(len(cfg.lattice.planes)):
            u1, u2, u3, u4 = plaquette_corners(cfg, plane)
            p = u1 @ u2 @ dagger(u3) @ dagger(u4)
            self.corners.append((u1, u2, u3, u4, p))
            self.logs.append(lie.log_map(p))


def energy(spec: FunctionalSpec, cfg: FieldConfig) -> float:
    spec.check(cfg)
    lat = cfg.lattice
    w_f, w_d = spec.weights
    logs = _Plaquettes(cfg).logs
    e = w_f * lat.h ** (lat.d - 4) / 2 * sum(lie.inner(l, l).sum() for l in logs)
    if spec.has_matter:
        kin = sum(np.sum(np.abs(cov_diff(cfg, mu)) ** 2) for mu in range(lat.d))
        r = np.sum(np.abs(cfg.phi) ** 2, axis=1)
        pot, _, _ = spec.potential(r)
        e += lat.weight * (w_d / 2 * kin + pot.sum())
    return float(e)


def _curvature_gradient(cfg, plaq, w_f, out):
    lat = cfg.lattice
    c = w_f / lat.h**3
    s1, s2, s3, s4 = _POSITION_SIGNS
    for plane, (mu, nu) in enumerate(lat.planes):
        u1, _, _, u4, _ = plaq.corners[plane]
        l = c * plaq.logs[plane]
        out[:, mu] += s1 * l
        out[:, nu] += s2 * (dagger(u1) @ l @ u1)[lat.bwd[mu]]
        out[:, mu] += s3 * (dagger(u4) @ l @ u4)[lat.bwd[nu]]
        out[:, nu] += s4 * l


def gradient(spec: FunctionalSpec, cfg: FieldConfig, plaq=None) -> Tangent:
    spec.check(cfg)
    lat, group = cfg.lattice, cfg.group
    w_f, w_d = spec.weights
    grad = Tangent.zeros(lat, group)
    _curvature_gradient(cfg, plaq or _Plaquettes(cfg), w_f, grad.links)
    if not spec.has_matter:
        return grad
    phi = cfg.phi
    for mu in range(lat.d):
        u = cfg.links[:, mu]
        v = lie.rep_group(group, u, phi[lat.fwd[mu]])
        dphi = (v - phi) / lat.h
        grad.links[:, mu] += w_d * lie.rep_algebra_dual(group, v, dphi)
        back = lie.rep_group(group, dagger(u), dphi)
        grad.phi += w_d / lat.h * (back[lat.bwd[mu]] - dphi)
    r = np.sum(np.abs(phi) ** 2, axis=1)
    _, dv, _ = spec.potential(r)
    grad.phi += 2 * dv[:, None] * phi
    return grad


def hess_vec(spec: FunctionalSpec, cfg: FieldConfig, t: Tangent, grad=None) -> Tangent:
    """Second variation of the energy applied to ``t``."""
    spec.check(cfg)
    lat, group, h = cfg.lattice, cfg.group, cfg.lattice.h
    w_f, w_d = spec.weights
    plaq = _Plaquettes(cfg)
    if grad is None:
        grad = gradient(spec, cfg, plaq)
    a = t.links
    out = Tangent.zeros(lat, group)
    c = w_f / h**3
    s1, s2, s3, s4 = _POSITION_SIGNS
    for plane, (mu, nu) in enumerate(lat.planes):
        u1, u2, u3, u4, p = plaq.corners[plane]
        l = plaq.logs[plane]
        a1, a2, a3, a4 = a[:, mu], a[lat.fwd[mu], nu], a[lat.fwd[nu], mu], a[:, nu]
        m = u1 @ u2 @ dagger(u3)
        eta = h * (a1 + lie.ad_action(u1, a2) - lie.ad_action(m, a3) - lie.ad_action(p, a4))
        dl = c * lie.dlog_left(l, eta)
        lc = c * l
        out.links[:, mu] += s1 * dl
        out.links[:, nu] += s2 * (dagger(u1) @ (dl + h * commutator(lc, a1)) @ u1)[lat.bwd[mu]]
        out.links[:, mu] += s3 * (dagger(u4) @ (dl + h * commutator(lc, a4)) @ u4)[lat.bwd[nu]]
        out.links[:, nu] += s4 * dl
    if spec.has_matter:
        phi, dphi_dir = cfg.phi, t.phi
        for mu in range(lat.d):
            u = cfg.links[:, mu]
            ud = dagger(u)
            v = lie.rep_group(group, u, phi[lat.fwd[mu]])
            dcov = (v - phi) / h
            dv = h * lie.rep_algebra(group, a[:, mu], v) + lie.rep_group(group, u, dphi_dir[lat.fwd[mu]])
            ddcov = (dv - dphi_dir) / h
            out.links[:, mu] += w_d * (
                lie.rep_algebra_dual(group, dv, dcov) + lie.rep_algebra_dual(group, v, ddcov)
            )
            back = lie.rep_group(group, ud, ddcov - h * lie.rep_algebra(group, a[:, mu], dcov))
            out.phi += w_d / h * (back[lat.bwd[mu]] - ddcov)
        r = np.sum(np.abs(phi) ** 2, axis=1)
        _, dv1, dv2 = spec.potential(r)
        overlap = np.sum(np.conj(phi) * dphi_dir, axis=1).real
        out.phi += 2 * dv1[:, None] * dphi_dir + 4 * (dv2 * overlap)[:, None] * phi
    out.links += 0.5 * h * commutator(grad.links, a)
    return out


def vortex_residual(cfg: FieldConfig, tau: float):
    """Pointwise residuals of the first-order vortex equations on a 2-torus.

    Returns ``(-i F_12 - (|Phi|**2 - tau), (D_1 Phi + i D_2 Phi) / 2)``.
    """
    if cfg.lattice.d != 2 or cfg.group.kind != "u1" or cfg.group.rep_charge != 1:
        raise DimensionMismatch("vortex equations need U(1), charge 1, on a 2-torus")
    lat = cfg.lattice
    u1, u2, u3, u4 = plaquette_corners(cfg, 0)
    p = u1 @ u2 @ dagger(u3) @ dagger(u4)
    f12 = lie.log_map(p)[:, 0, 0].imag / lat.h**2
    r = np.sum(np.abs(cfg.phi) ** 2, axis=1)
    curvature = f12 - (r - tau)
    dbar = 0.5 * (cov_diff(cfg, 0) + 1j * cov_diff(cfg, 1))[:, 0]
    return curvature, dbar


def vortex_residual_norm(cfg: FieldConfig, tau: float) -> float:
    curvature, dbar = vortex_residual(cfg, tau)
    return float(np.sqrt(cfg.lattice.weight * (np.sum(curvature**2) + np.sum(np.abs(dbar) ** 2))))


def slice_hessian_spectrum(spec: FunctionalSpec, cfg: FieldConfig, count: int, crit_tol: float = 1e-8):
    """Low spectrum of the Hessian restricted to the Coulomb slice through ``cfg``."""
    from .hodge import slice_hessian_operator, spectrum_low

    g = gradient(spec, cfg)
    gnorm = g.norm()
    if gnorm > crit_tol:
        raise NotCritical(f"gradient norm {gnorm:.3e} exceeds {crit_tol:.1e}")
    op = slice_hessian_operator(spec, cfg, grad=g)
    return spectrum_low(op, count)
