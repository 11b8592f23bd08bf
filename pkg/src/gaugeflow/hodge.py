"""Covariant Laplacians, linear solvers, slice projection and low spectra.

Operators act on flat real coordinate vectors (see ``Tangent.to_vector`` and
:func:`site_to_vector`). The coordinate basis is orthonormal for the discrete
L2 product up to the uniform factor ``h**d``, so L2-adjoint operators are
plain symmetric matrices in these coordinates.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse.linalg as spla

from . import lie
from .errors import NoConvergence
from .fields import FieldConfig, Tangent, d0, d0_star

log = logging.getLogger(__name__)


@dataclass
class LinearOperatorHandle:
    matvec: Callable[[np.ndarray], np.ndarray]
    n: int
    symmetric: bool = True
    domain: str = "site"
    kernel: Optional[np.ndarray] = None

    def __call__(self, x):
        return self.matvec(x)

    def as_scipy(self):
        return spla.LinearOperator((self.n, self.n), matvec=self.matvec, dtype=float)


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    kernel_dim: int
    mu: Optional[float]
    threshold: float = 0.0
    vectors: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self):
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "kernel_dim": int(self.kernel_dim),
            "mu": None if self.mu is None else float(self.mu),
            "threshold": float(self.threshold),
        }


def site_to_vector(xi) -> np.ndarray:
    return lie.to_coords(xi).ravel()


def site_from_vector(cfg: FieldConfig, vec) -> np.ndarray:
    return lie.from_coords(vec.reshape(cfg.lattice.volume, cfg.group.dim))


def dense_matrix(op: LinearOperatorHandle) -> np.ndarray:
    eye = np.eye(op.n)
    return np.column_stack([op.matvec(eye[:, i]) for i in range(op.n)])


def shifted(op: LinearOperatorHandle, shift: float) -> LinearOperatorHandle:
    return LinearOperatorHandle(lambda x: op.matvec(x) + shift * x, op.n, op.symmetric, op.domain)


# --- first-order operators ------------------------------------------------


def pair_d(cfg: FieldConfig, xi) -> Tangent:
    """Infinitesimal gauge action ``(d_A xi, -xi Phi)``."""
    return Tangent(cfg.lattice, cfg.group, d0(cfg, xi), -lie.rep_algebra(cfg.group, xi, cfg.phi))


def pair_dstar(cfg: FieldConfig, t: Tangent) -> np.ndarray:
    return d0_star(cfg, t.links) + lie.rep_algebra_dual(cfg.group, t.phi, cfg.phi)


def d1(cfg: FieldConfig, a) -> np.ndarray:
    """Plaquette-based covariant exterior derivative of a link field."""
    lat, h = cfg.lattice, cfg.lattice.h
    out = []
    for plane, (mu, nu) in enumerate(lat.planes):
        u = cfg.links
        u1, u2, u3 = u[:, mu], u[lat.fwd[mu], nu], u[lat.fwd[nu], mu]
        m = u1 @ u2 @ lie.dagger(u3)
        p = m @ lie.dagger(u[:, nu])
        out.append(
            (a[:, mu] + lie.ad_action(u1, a[lat.fwd[mu], nu]) - lie.ad_action(m, a[lat.fwd[nu], mu])
             - lie.ad_action(p, a[:, nu])) / h
        )
    return np.stack(out, axis=1)


def d1_star(cfg: FieldConfig, f) -> np.ndarray:
    lat, h = cfg.lattice, cfg.lattice.h
    out = np.zeros((lat.volume, lat.d) + f.shape[-2:], dtype=complex)
    for plane, (mu, nu) in enumerate(lat.planes):
        u = cfg.links
        u1, u2, u3 = u[:, mu], u[lat.fwd[mu], nu], u[lat.fwd[nu], mu]
        m = u1 @ u2 @ lie.dagger(u3)
        p = m @ lie.dagger(u[:, nu])
        g = f[:, plane] / h
        out[:, mu] += g
        out[:, nu] += (lie.dagger(u1) @ g @ u1)[lat.bwd[mu]]
        out[:, mu] -= (lie.dagger(m) @ g @ m)[lat.bwd[nu]]
        out[:, nu] -= lie.dagger(p) @ g @ p
    return out


# --- Laplacians -----------------------------------------------------------


def laplacian0(cfg: FieldConfig) -> LinearOperatorHandle:
    """``d_A^* d_A`` on per-site algebra fields."""

    def mv(x):
        xi = site_from_vector(cfg, x)
        return site_to_vector(d0_star(cfg, d0(cfg, xi)))

    return LinearOperatorHandle(mv, cfg.lattice.volume * cfg.group.dim, True, "site")


def pair_laplacian(cfg: FieldConfig) -> LinearOperatorHandle:
    """``d_{A,Phi}^* d_{A,Phi}`` on per-site algebra fields."""

    def mv(x):
        xi = site_from_vector(cfg, x)
        return site_to_vector(pair_dstar(cfg, pair_d(cfg, xi)))

    return LinearOperatorHandle(mv, cfg.lattice.volume * cfg.group.dim, True, "site")


def laplacian1(cfg: FieldConfig) -> LinearOperatorHandle:
    """``d_A^* d_A + d_A d_A^*`` on link fields (plaquette discretization)."""
    lat, group = cfg.lattice, cfg.group

    def mv(x):
        a = lie.from_coords(x.reshape(lat.volume, lat.d, group.dim))
        out = d1_star(cfg, d1(cfg, a)) + d0(cfg, d0_star(cfg, a))
        return lie.to_coords(out).ravel()

    return LinearOperatorHandle(mv, lat.n_links * group.dim, True, "link")


# --- solvers --------------------------------------------------------------


def _deflate(kernel, x):
    if kernel is None or kernel.shape[1] == 0:
        return x
    return x - kernel @ (kernel.T @ x)


def cg_solve(op: LinearOperatorHandle, rhs, tol=1e-12, max_iter=10000, kernel=None):
    """Conjugate gradients on the orthogonal complement of the kernel."""
    kernel = op.kernel if kernel is None else kernel
    b = _deflate(kernel, np.asarray(rhs, dtype=float))
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return x
    r = b.copy()
    p = r.copy()
    rr = r @ r
    for _ in range(max_iter):
        ap = _deflate(kernel, op.matvec(p))
        pap = p @ ap
        if pap <= 0:
            raise NoConvergence("operator is not positive on the search space", np.sqrt(rr) / bnorm)
        alpha = rr / pap
        x += alpha * p
        r -= alpha * ap
        rr_new = r @ r
        if np.sqrt(rr_new) <= tol * bnorm:
            true = np.linalg.norm(b - _deflate(kernel, op.matvec(x)))
            if true <= tol * bnorm:
                return _deflate(kernel, x)
            r = b - _deflate(kernel, op.matvec(x))
            rr_new = r @ r
            p = r.copy()
            rr = rr_new
            continue
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise NoConvergence(f"CG did not converge in {max_iter} iterations", np.sqrt(rr) / bnorm)


def nonsym_solve(op: LinearOperatorHandle, rhs, tol=1e-12, max_iter=2000, kernel=None):
    """Restarted GMRES on the kernel complement; the final residual is verified."""
    kernel = op.kernel if kernel is None else kernel
    b = _deflate(kernel, np.asarray(rhs, dtype=float))
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    restart = min(op.n, 80)
    proj = spla.LinearOperator(
        (op.n, op.n), matvec=lambda v: _deflate(kernel, op.matvec(_deflate(kernel, v))), dtype=float
    )
    x, _ = spla.gmres(proj, b, rtol=tol / 10, atol=0.0, restart=restart,
                      maxiter=max(1, max_iter // restart))
    x = _deflate(kernel, x)
    res = np.linalg.norm(b - _deflate(kernel, op.matvec(x))) / bnorm
    if not np.isfinite(res) or res > tol:
        raise NoConvergence(f"GMRES residual {res:.3e} above {tol:.1e}", res)
    return x


# --- slice projection -----------------------------------------------------


def _matter_view(cfg: FieldConfig, matter: bool) -> FieldConfig:
    if matter:
        return cfg
    return FieldConfig(cfg.lattice, cfg.group, cfg.links, np.zeros_like(cfg.phi))


def pair_kernel(cfg: FieldConfig) -> np.ndarray:
    """Orthonormal basis of ``ker d_{A,Phi}`` (the stabilizer algebra)."""
    return kernel_basis(pair_laplacian(cfg), cfg.group.dim)


def green(cfg: FieldConfig, rhs_field, tol=1e-13, kernel=None):
    """Green's operator of the pair Laplacian applied to a site field."""
    if kernel is None:
        kernel = pair_kernel(cfg)
    x = cg_solve(pair_laplacian(cfg), site_to_vector(rhs_field), tol=tol, kernel=kernel)
    return site_from_vector(cfg, x)


def slice_project(cfg: FieldConfig, t: Tangent, tol=1e-13, matter=True, kernel=None) -> Tangent:
    """L2-orthogonal projection onto ``ker d_{A,Phi}^*``: ``t - d G d^* t``."""
    c = _matter_view(cfg, matter)
    if not matter:
        t = Tangent(t.lattice, t.group, t.links, np.zeros_like(t.phi))
    xi = green(c, pair_dstar(c, t), tol, kernel)
    return t - pair_d(c, xi)


def slice_hessian_operator(spec, cfg: FieldConfig, grad=None, tol=1e-13, penalty=None):
    """``P H P + penalty (1 - P)`` where ``P`` projects onto the slice.

    Gauge directions are lifted to ``penalty`` so the low spectrum of the
    handle is the spectrum of the Hessian restricted to the slice.
    """
    from .functionals import gradient, hess_vec

    lat, group = cfg.lattice, cfg.group
    matter = spec.has_matter
    if grad is None:
        grad = gradient(spec, cfg)
    kernel = pair_kernel(_matter_view(cfg, matter))

    def proj(v):
        t = Tangent.from_vector(lat, group, v, matter)
        return slice_project(cfg, t, tol, matter, kernel).to_vector(matter)

    def hess(v):
        t = Tangent.from_vector(lat, group, v, matter)
        return hess_vec(spec, cfg, t, grad).to_vector(matter)

    n = Tangent.zeros(lat, group).size(matter)
    if penalty is None:
        bound = spla.eigsh(spla.LinearOperator((n, n), matvec=hess, dtype=float), k=1,
                           which="LM", tol=1e-4, return_eigenvectors=False)
        penalty = 2.0 * float(np.abs(bound).max()) + 1.0

    def mv(v):
        pv = proj(v)
        return proj(hess(pv)) + penalty * (v - pv)

    return LinearOperatorHandle(mv, n, True, "tangent")


# --- spectra --------------------------------------------------------------


def _largest_eigenvalue(op: LinearOperatorHandle) -> float:
    if op.n <= 2:
        return float(np.abs(np.linalg.eigvalsh(dense_matrix(op))).max())
    w = spla.eigsh(op.as_scipy(), k=1, which="LM", tol=1e-6, return_eigenvectors=False)
    return float(np.abs(w).max())


def spectrum_low(op: LinearOperatorHandle, count: int, tol=1e-12, vectors=False,
                 kernel_rtol=1e-10) -> SpectrumReport:
    """The ``count`` smallest eigenvalues of a symmetric handle (Lanczos)."""
    n = op.n
    count = min(count, n)
    if count >= n - 1:
        m = dense_matrix(op)
        w, v = np.linalg.eigh(0.5 * (m + m.T))
        w, v = w[:count], v[:, :count]
        top = float(np.abs(np.linalg.eigvalsh(0.5 * (m + m.T))).max())
    else:
        ncv = min(n - 1, max(4 * count + 20, 60))
        try:
            w, v = spla.eigsh(op.as_scipy(), k=count, which="SA", tol=tol, ncv=ncv,
                              maxiter=50 * n)
        except spla.ArpackNoConvergence as exc:
            raise NoConvergence(f"Lanczos did not converge: {exc}") from exc
        order = np.argsort(w)
        w, v = w[order], v[:, order]
        top = max(_largest_eigenvalue(op), float(np.abs(w).max()))
    threshold = kernel_rtol * top
    kernel_dim = int(np.count_nonzero(w <= threshold))
    positive = w[w > threshold]
    mu = float(positive[0]) if positive.size else None
    return SpectrumReport(w, kernel_dim, mu, threshold, v if vectors else None)


def kernel_basis(op: LinearOperatorHandle, max_dim: int) -> np.ndarray:
    """Orthonormal basis of the numerical kernel (at most ``max_dim`` vectors)."""
    rep = spectrum_low(op, max_dim + 1, vectors=True)
    basis = rep.vectors[:, : rep.kernel_dim]
    if basis.shape[1]:
        basis, _ = np.linalg.qr(basis)
    return basis
