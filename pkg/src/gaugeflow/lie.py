"""Small-matrix kernels for U(1) and SU(2), their Lie algebras and representations.

Every function is batched over leading axes: a group or algebra element is the
trailing ``(n, n)`` block of a complex array, a representation vector the
trailing ``(n,)`` block. ``n == 1`` means U(1), ``n == 2`` means SU(2).

The algebra metric is ``inner(x, y) = -2 Re tr(x y)``. ``GroupKind.basis`` is
orthonormal for it, so algebra coordinates can be fed to plain Euclidean
linear algebra.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import LogBranch

CUT_MARGIN = 0.1

_SIGMA = np.array(
    [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex
)
U1_BASIS = np.array([[[1j / np.sqrt(2.0)]]])
SU2_BASIS = 0.5j * _SIGMA


@dataclass(frozen=True)
class GroupKind:
    """Structure group plus the charge of the U(1) matter representation."""

    kind: str = "su2"
    rep_charge: int = 1

    def __post_init__(self):
        if self.kind not in ("u1", "su2"):
            raise ValueError(f"unknown group {self.kind!r}")
        if self.kind == "su2" and self.rep_charge != 1:
            raise ValueError("SU(2) only supports the fundamental representation")

    @property
    def n(self) -> int:
        return 1 if self.kind == "u1" else 2

    @property
    def dim(self) -> int:
        return 1 if self.kind == "u1" else 3

    @cached_property
    def basis(self) -> np.ndarray:
        return U1_BASIS if self.kind == "u1" else SU2_BASIS

    def identity(self, shape=()) -> np.ndarray:
        out = np.zeros(tuple(shape) + (self.n, self.n), dtype=complex)
        out[..., range(self.n), range(self.n)] = 1.0
        return out

    def random_algebra(self, rng, shape=(), scale=1.0) -> np.ndarray:
        coords = scale * rng.standard_normal(tuple(shape) + (self.dim,))
        return from_coords(coords)

    def random_group(self, rng, shape=(), scale=1.0) -> np.ndarray:
        return exp_map(self.random_algebra(rng, shape, scale))


def _basis_for(n: int) -> np.ndarray:
    return U1_BASIS if n == 1 else SU2_BASIS


def dagger(m):
    return np.conj(np.swapaxes(m, -1, -2))


def commutator(x, y):
    return x @ y - y @ x


def inner(xi, eta):
    """Killing-type metric ``-2 Re tr(xi eta)``, batched."""
    return -2.0 * np.einsum("...ij,...ji->...", xi, eta).real


def to_coords(xi) -> np.ndarray:
    """Coordinates of ``xi`` in the orthonormal algebra basis.

    For a matrix outside the algebra this returns the coordinates of its
    orthogonal projection (anti-Hermitian, traceless part).
    """
    basis = _basis_for(xi.shape[-1])
    return -2.0 * np.einsum("aij,...ji->...a", basis, xi).real


def from_coords(coords) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    basis = U1_BASIS if coords.shape[-1] == 1 else SU2_BASIS
    return np.einsum("...a,aij->...ij", coords, basis)


def real_trace_dual(m) -> np.ndarray:
    """Algebra element ``X`` with ``inner(X, xi) == Re tr(xi m)`` for every ``xi``."""
    return from_coords(-0.5 * to_coords(m))


def exp_map(xi) -> np.ndarray:
    xi = np.asarray(xi)
    if xi.shape[-1] == 1:
        return np.exp(1j * xi.imag)
    c = to_coords(xi)
    r = np.linalg.norm(c, axis=-1)
    x = from_coords(c)
    out = np.sinc(r / (2 * np.pi))[..., None, None] * x
    cos = np.cos(r / 2)
    out[..., 0, 0] += cos
    out[..., 1, 1] += cos
    return out


def log_angle(u) -> np.ndarray:
    """Largest eigen-angle of ``u`` in ``[0, pi]`` (distance from the identity)."""
    u = np.asarray(u)
    if u.shape[-1] == 1:
        return np.abs(np.angle(u[..., 0, 0]))
    a0 = 0.5 * (u[..., 0, 0] + u[..., 1, 1]).real
    s = 0.5 * np.linalg.norm(to_coords(0.5 * (u - dagger(u))), axis=-1)
    return np.arctan2(s, a0)


def log_map(u, margin: float = CUT_MARGIN) -> np.ndarray:
    """Principal logarithm; raises LogBranch within ``margin`` of the cut locus."""
    u = np.asarray(u)
    phi = log_angle(u)
    bad = phi > np.pi - margin
    if np.any(bad):
        raise LogBranch(
            f"{int(np.count_nonzero(bad))} element(s) within {margin} rad of -1"
        )
    if u.shape[-1] == 1:
        return 1j * np.angle(u)
    y = to_coords(0.5 * (u - dagger(u)))
    return from_coords(y / np.sinc(phi / np.pi)[..., None])


def ad_action(u, xi):
    return u @ xi @ dagger(u)


def rep_group(group: GroupKind, u, v):
    if group.n == 1:
        return (u[..., 0, 0] ** group.rep_charge)[..., None] * v
    return np.einsum("...ij,...j->...i", u, v)


def rep_algebra(group: GroupKind, xi, v):
    if group.n == 1:
        return group.rep_charge * xi[..., 0, 0][..., None] * v
    return np.einsum("...ij,...j->...i", xi, v)


def rep_algebra_dual(group: GroupKind, v, w):
    """Algebra element ``X`` with ``inner(X, xi) == Re <w, rep_algebra(xi) v>``."""
    outer = v[..., :, None] * np.conj(w)[..., None, :]
    if group.n == 1:
        outer = group.rep_charge * outer
    return real_trace_dual(outer)


def _dlog_coeff(theta):
    theta = np.asarray(theta, dtype=float)
    small = theta < 1e-3
    t = np.where(small, 1.0, theta)
    half = t / 2
    exact = (1.0 - half / np.tan(half)) / t**2
    series = 1.0 / 12.0 + theta**2 / 720.0
    return np.where(small, series, exact)


def dlog_left(x, eta):
    """Derivative of ``log(exp(s * eta) exp(x))`` in ``s`` at ``s = 0``."""
    if x.shape[-1] == 1:
        return eta
    theta = np.linalg.norm(to_coords(x), axis=-1)
    c = _dlog_coeff(theta)[..., None, None]
    xe = commutator(x, eta)
    return eta - 0.5 * xe + c * commutator(x, xe)


def reunitarize(u):
    """Nearest-group projection, used to stop round-off drift in long updates."""
    if u.shape[-1] == 1:
        return u / np.abs(u)
    a = 0.5 * (u[..., 0, 0] + np.conj(u[..., 1, 1]))
    b = 0.5 * (u[..., 0, 1] - np.conj(u[..., 1, 0]))
    norm = np.sqrt(np.abs(a) ** 2 + np.abs(b) ** 2)
    a, b = a / norm, b / norm
    out = np.empty_like(u)
    out[..., 0, 0] = a
    out[..., 0, 1] = b
    out[..., 1, 0] = -np.conj(b)
    out[..., 1, 1] = np.conj(a)
    return out
