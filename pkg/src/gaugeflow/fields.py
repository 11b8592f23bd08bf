"""Gauge and matter configurations and the discrete covariant operators.

Conventions
-----------
* ``links[x, mu]`` is the parallel transporter ``U_mu(x) ~ exp(h A_mu(x))``.
* Tangent vectors are left-trivialized: moving along ``(a, phi)`` sends
  ``U_e -> exp(h a_e) U_e`` and ``Phi -> Phi + phi``, so ``a`` carries the units
  of a connection.
* Gauge transformations act by ``U_mu(x) -> u(x)^-1 U_mu(x) u(x + mu)`` and
  ``Phi(x) -> rho(u(x)^-1) Phi(x)``.
* Discrete L2 products carry the cell weight ``h**d``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lie
from .errors import UnsupportedExponent
from .lattice import LatticeSpec
from .lie import GroupKind, dagger


@dataclass
class FieldConfig:
    """A connection (one group element per link) and a matter section."""

    lattice: LatticeSpec
    group: GroupKind
    links: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        lat, n = self.lattice, self.group.n
        self.links = np.asarray(self.links, dtype=complex)
        self.phi = np.asarray(self.phi, dtype=complex)
        if self.links.shape != (lat.volume, lat.d, n, n):
            raise ValueError(f"links have shape {self.links.shape}")
        if self.phi.shape != (lat.volume, n):
            raise ValueError(f"phi has shape {self.phi.shape}")

    @classmethod
    def trivial(cls, lattice, group, phi=None):
        links = group.identity((lattice.volume, lattice.d))
        if phi is None:
            phi = np.zeros((lattice.volume, group.n), dtype=complex)
        else:
            phi = np.broadcast_to(np.asarray(phi, dtype=complex), (lattice.volume, group.n))
        return cls(lattice, group, links, phi.copy())

    def copy(self):
        return FieldConfig(self.lattice, self.group, self.links.copy(), self.phi.copy())

    def moved(self, t: "Tangent", scale: float = 1.0, reunitarize: bool = False):
        """Configuration ``(exp(scale h a) U, Phi + scale phi)``."""
        step = lie.exp_map(scale * self.lattice.h * t.links)
        links = step @ self.links
        if reunitarize:
            links = lie.reunitarize(links)
        return FieldConfig(self.lattice, self.group, links, self.phi + scale * t.phi)

    def compatible(self, other) -> bool:
        return self.lattice == other.lattice and self.group == other.group


@dataclass
class Tangent:
    """A pair ``(a, phi)``: algebra element per link plus matter vector per site."""

    lattice: LatticeSpec
    group: GroupKind
    links: np.ndarray
    phi: np.ndarray

    @classmethod
    def zeros(cls, lattice, group):
        n = group.n
        return cls(
            lattice,
            group,
            np.zeros((lattice.volume, lattice.d, n, n), dtype=complex),
            np.zeros((lattice.volume, n), dtype=complex),
        )

    @classmethod
    def random(cls, lattice, group, rng, scale=1.0, matter=True):
        links = group.random_algebra(rng, (lattice.volume, lattice.d), scale)
        shape = (lattice.volume, group.n)
        phi = scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        return cls(lattice, group, links, phi if matter else 0 * phi)

    def _new(self, links, phi):
        return Tangent(self.lattice, self.group, links, phi)

    def __add__(self, other):
        return self._new(self.links + other.links, self.phi + other.phi)

    def __sub__(self, other):
        return self._new(self.links - other.links, self.phi - other.phi)

    def __neg__(self):
        return self._new(-self.links, -self.phi)

    def __mul__(self, c):
        return self._new(c * self.links, c * self.phi)

    __rmul__ = __mul__

    def dot(self, other) -> float:
        s = lie.inner(self.links, other.links).sum()
        s += np.vdot(self.phi, other.phi).real
        return float(self.lattice.weight * s)

    def norm(self) -> float:
        return float(np.sqrt(max(self.dot(self), 0.0)))

    def size(self, matter=True) -> int:
        lat, g = self.lattice, self.group
        return lat.n_links * g.dim + (2 * lat.volume * g.n if matter else 0)

    def to_vector(self, matter=True) -> np.ndarray:
        """Flat real coordinates; Euclidean dot equals ``dot`` divided by ``h**d``."""
        parts = [lie.to_coords(self.links).ravel()]
        if matter:
            parts.append(self.phi.view(float).ravel())
        return np.concatenate(parts)

    @classmethod
    def from_vector(cls, lattice, group, vec, matter=True):
        nl = lattice.n_links * group.dim
        links = lie.from_coords(vec[:nl].reshape(lattice.volume, lattice.d, group.dim))
        if matter:
            phi = np.ascontiguousarray(vec[nl:]).view(complex).reshape(lattice.volume, group.n)
        else:
            phi = np.zeros((lattice.volume, group.n), dtype=complex)
        return cls(lattice, group, links, phi)


def site_dot(lattice, xi, eta) -> float:
    """L2 product of two per-site algebra fields."""
    return float(lattice.weight * lie.inner(xi, eta).sum())


# --- gauge action ---------------------------------------------------------


def random_gauge(lattice, group, rng, scale=1.0) -> np.ndarray:
    return group.random_group(rng, (lattice.volume,), scale)


def gauge_apply(u, cfg: FieldConfig) -> FieldConfig:
    lat = cfg.lattice
    ud = dagger(u)
    links = ud[:, None] @ cfg.links @ u[lat.fwd.T]
    phi = lie.rep_group(cfg.group, ud, cfg.phi)
    return FieldConfig(lat, cfg.group, links, phi)


def compose_gauge(u, v) -> np.ndarray:
    """Sitewise product with ``gauge_apply(v, gauge_apply(u, c)) == gauge_apply(compose(u, v), c)``."""
    return u @ v


def gauge_transport(u, t: Tangent) -> Tangent:
    """Push a tangent vector at ``c`` forward to ``gauge_apply(u, c)``."""
    ud = dagger(u)
    links = ud[:, None] @ t.links @ u[:, None]
    return Tangent(t.lattice, t.group, links, lie.rep_group(t.group, ud, t.phi))


# --- curvature ------------------------------------------------------------


def plaquette_corners(cfg: FieldConfig, plane: int):
    """The four link matrices ``U_mu(x), U_nu(x+mu), U_mu(x+nu), U_nu(x)`` for all x."""
    lat = cfg.lattice
    mu, nu = lat.planes[plane]
    u = cfg.links
    return (
        u[:, mu],
        u[lat.fwd[mu], nu],
        u[lat.fwd[nu], mu],
        u[:, nu],
    )


def plaquette(cfg: FieldConfig, plane: int) -> np.ndarray:
    u1, u2, u3, u4 = plaquette_corners(cfg, plane)
    return u1 @ u2 @ dagger(u3) @ dagger(u4)


def plaquettes(cfg: FieldConfig) -> np.ndarray:
    """Plaquette holonomies, shape ``(V, n_planes, n, n)``."""
    return np.stack([plaquette(cfg, p) for p in range(len(cfg.lattice.planes))], axis=1)


def field_strength(cfg: FieldConfig, p=None) -> np.ndarray:
    """``log(P_p) / h**2`` for one plaquette index ``p`` or for all of them."""
    h2 = cfg.lattice.h**2
    if p is None:
        return lie.log_map(plaquettes(cfg)) / h2
    site, plane = divmod(p, len(cfg.lattice.planes))
    return lie.log_map(plaquette(cfg, plane)[site]) / h2


def plaquette_traces(cfg: FieldConfig) -> np.ndarray:
    return np.einsum("...ii->...", plaquettes(cfg))


# --- covariant differences ------------------------------------------------


def transported(cfg: FieldConfig, mu: int, field=None) -> np.ndarray:
    """``rho(U_mu(x)) Phi(x + mu)`` for all x."""
    field = cfg.phi if field is None else field
    return lie.rep_group(cfg.group, cfg.links[:, mu], field[cfg.lattice.fwd[mu]])


def cov_diff(cfg: FieldConfig, mu: int, field=None) -> np.ndarray:
    field = cfg.phi if field is None else field
    return (transported(cfg, mu, field) - field) / cfg.lattice.h


def d0(cfg: FieldConfig, xi) -> np.ndarray:
    """Covariant difference of a per-site algebra field, one value per link."""
    lat, u = cfg.lattice, cfg.links
    ahead = xi[lat.fwd.T]
    return (u @ ahead @ dagger(u) - xi[:, None]) / lat.h


def d0_star(cfg: FieldConfig, a) -> np.ndarray:
    """Exact L2 adjoint of :func:`d0`."""
    lat, u = cfg.lattice, cfg.links
    pulled = dagger(u) @ a @ u
    out = -a.sum(axis=1)
    for mu in range(lat.d):
        out += pulled[lat.bwd[mu], mu]
    return out / lat.h


def log_difference(cfg: FieldConfig, ref: FieldConfig) -> Tangent:
    """Tangent ``t`` at ``ref`` with ``ref.moved(t) == cfg`` (principal branch)."""
    a = lie.log_map(cfg.links @ dagger(ref.links)) / cfg.lattice.h
    return Tangent(cfg.lattice, cfg.group, a, cfg.phi - ref.phi)


# --- norms ----------------------------------------------------------------


def _component_field(t: Tangent) -> np.ndarray:
    lat = t.lattice
    links = lie.to_coords(t.links).reshape(lat.volume, -1)
    return np.concatenate([links, t.phi.view(float).reshape(lat.volume, -1)], axis=1)


def _forward_differences(lat: LatticeSpec, f: np.ndarray) -> np.ndarray:
    # f: (V, C) -> (V, d * C)
    parts = [(f[lat.fwd[mu]] - f) / lat.h for mu in range(lat.d)]
    return np.concatenate(parts, axis=1)


def sobolev_norm(t: Tangent, k: int = 1, p: float = 2.0) -> float:
    """``W^{k,p}`` norm built from forward differences (trivial reference connection)."""
    if k not in (0, 1, 2):
        raise ValueError("k must be 0, 1 or 2")
    if p < 1:
        raise ValueError("p must be >= 1")
    lat = t.lattice
    f = _component_field(t)
    total = 0.0
    for j in range(k + 1):
        mag = np.linalg.norm(f, axis=1)
        if np.isinf(p):
            total += mag.max()
        else:
            total += lat.weight * np.sum(mag**p)
        if j < k:
            f = _forward_differences(lat, f)
    return float(total if np.isinf(p) else total ** (1.0 / p))


def lp_norm(lattice: LatticeSpec, values, p: float = 2.0) -> float:
    """Discrete L^p norm of a pointwise magnitude array."""
    values = np.abs(values)
    if np.isinf(p):
        return float(values.max())
    return float((lattice.weight * np.sum(values**p)) ** (1.0 / p))


def dual_norm_wneg1(t: Tangent, p: float = 2.0) -> float:
    """``<t, (Delta + 1)^-1 t>^(1/2)`` with the reference Laplacian, via FFT."""
    if p != 2:
        raise UnsupportedExponent("the W^{-1,p} norm is implemented for p = 2 only")
    lat = t.lattice
    f = _component_field(t).reshape(lat.extents + (-1,))
    axes = tuple(range(lat.d))
    fhat = np.fft.fftn(f, axes=axes)
    weight = 1.0 / (1.0 + lat.wave_numbers())
    s = np.sum(np.abs(fhat) ** 2 * weight[..., None])
    return float(np.sqrt(lat.weight * s / lat.volume))
