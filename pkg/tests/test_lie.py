import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from oracles import expm_series

from gaugeflow import lie
from gaugeflow.errors import LogBranch
from gaugeflow.lie import GroupKind

# magnitudes below 1e-100 would underflow when squared
finite = st.floats(-1.0, 1.0, allow_nan=False).filter(lambda x: x == 0 or abs(x) > 1e-100)
coords3 = arrays(float, 3, elements=finite)


def _su2(c):
    return lie.from_coords(np.asarray(c, dtype=float))


def test_exp_of_zero_is_identity(su2, u1):
    for g in (su2, u1):
        assert np.array_equal(lie.exp_map(np.zeros((g.n, g.n), complex)), g.identity())


def test_u1_exponential_of_i_pi_over_3():
    got = lie.exp_map(np.array([[1j * np.pi / 3]]))
    assert got[0, 0] == pytest.approx(np.exp(1j * np.pi / 3), abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(coords3)
def test_su2_exp_unitary_and_matches_power_series(c):
    xi = _su2(c)
    u = lie.exp_map(xi)
    assert np.abs(lie.dagger(u) @ u - np.eye(2)).max() <= 1e-14
    assert np.abs(u - expm_series(xi)).max() <= 1e-12
    assert np.linalg.det(u) == pytest.approx(1.0, abs=1e-14)


def test_log_of_identity_is_zero(su2, u1):
    for g in (su2, u1):
        assert np.abs(lie.log_map(g.identity())).max() == 0.0


@settings(max_examples=80, deadline=None)
@given(arrays(float, 3, elements=st.floats(-3.0, 3.0, allow_nan=False)))
def test_log_inverts_exp_inside_the_ball(c):
    r = np.linalg.norm(c)
    if r > np.pi - 0.2:
        c = c * (np.pi - 0.2) / r
    xi = _su2(c)
    back = lie.log_map(lie.exp_map(xi))
    assert np.abs(back - xi).max() <= 1e-12


def test_log_matches_eigendecomposition(rng):
    xi = _su2(rng.normal(size=3))
    u = lie.exp_map(xi)
    w, v = np.linalg.eig(u)
    oracle = v @ np.diag(np.log(w)) @ np.linalg.inv(v)
    assert np.abs(lie.log_map(u) - oracle).max() <= 1e-12


def test_log_of_minus_identity_raises():
    with pytest.raises(LogBranch):
        lie.log_map(-np.eye(2, dtype=complex))
    with pytest.raises(LogBranch):
        lie.log_map(np.array([[-1.0 + 0j]]))


def test_inner_examples():
    z = np.zeros((2, 2), complex)
    assert lie.inner(z, z) == 0.0
    i = np.array([[1j]])
    assert lie.inner(i, i) == pytest.approx(2.0)


@settings(max_examples=40, deadline=None)
@given(coords3)
def test_inner_positive_definite_and_basis_orthonormal(c):
    xi = _su2(c)
    assert lie.inner(xi, xi) == pytest.approx(np.dot(c, c), rel=1e-13, abs=1e-300)
    if np.any(c != 0):
        assert lie.inner(xi, xi) > 0


@pytest.mark.parametrize("kind", ["u1", "su2"])
def test_basis_orthonormal(kind):
    b = GroupKind(kind).basis
    gram = np.array([[lie.inner(x, y) for y in b] for x in b])
    assert np.allclose(gram, np.eye(len(b)), atol=1e-15)


def test_coordinates_round_trip(rng):
    c = rng.normal(size=(5, 3))
    assert np.allclose(lie.to_coords(lie.from_coords(c)), c, atol=1e-15)


def test_adjoint_action_of_identity_and_invariance(rng, su2):
    xi, eta = su2.random_algebra(rng), su2.random_algebra(rng)
    assert np.allclose(lie.ad_action(np.eye(2), xi), xi)
    u = su2.random_group(rng)
    assert lie.inner(lie.ad_action(u, xi), lie.ad_action(u, eta)) == pytest.approx(lie.inner(xi, eta), abs=1e-14)


@pytest.mark.parametrize("k", [1, 2, -3])
def test_u1_charge_k_representation(k):
    g = GroupKind("u1", k)
    theta = 0.37
    v = np.array([0.3 - 0.2j])
    got = lie.rep_group(g, np.array([[np.exp(1j * theta)]]), v)
    assert np.allclose(got, np.exp(1j * k * theta) * v, atol=1e-15)


@pytest.mark.parametrize("kind,charge", [("u1", 2), ("su2", 1)])
def test_representation_derivative_is_second_order(rng, kind, charge):
    g = GroupKind(kind, charge)
    xi = g.random_algebra(rng)
    v = rng.normal(size=g.n) + 1j * rng.normal(size=g.n)
    errs = []
    for eps in (1e-2, 1e-3, 1e-4):
        lhs = lie.rep_group(g, lie.exp_map(eps * xi), v)
        errs.append(np.linalg.norm(lhs - v - eps * lie.rep_algebra(g, xi, v)))
    assert errs[1] / errs[0] == pytest.approx(1e-2, rel=0.05)
    assert errs[2] / errs[1] == pytest.approx(1e-2, rel=0.05)


def test_rep_algebra_dual_is_adjoint(rng, su2):
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    w = rng.normal(size=2) + 1j * rng.normal(size=2)
    xi = su2.random_algebra(rng)
    lhs = lie.inner(lie.rep_algebra_dual(su2, v, w), xi)
    rhs = np.vdot(w, lie.rep_algebra(su2, xi, v)).real
    assert lhs == pytest.approx(rhs, abs=1e-14)


def test_dlog_left_matches_finite_difference(rng, su2):
    x, eta = su2.random_algebra(rng, scale=1.2), su2.random_algebra(rng)
    eps = 1e-6
    fd = (lie.log_map(lie.exp_map(eps * eta) @ lie.exp_map(x))
          - lie.log_map(lie.exp_map(-eps * eta) @ lie.exp_map(x))) / (2 * eps)
    assert np.abs(fd - lie.dlog_left(x, eta)).max() <= 1e-8


def test_reunitarize_projects_back(rng, su2):
    u = su2.random_group(rng, (10,))
    noisy = u + 1e-9 * rng.normal(size=u.shape)
    fixed = lie.reunitarize(noisy)
    assert np.abs(lie.dagger(fixed) @ fixed - np.eye(2)).max() <= 1e-15
    assert np.abs(fixed - u).max() <= 1e-8
