import numpy as np
import pytest

from gaugeflow import gaugefix as gf
from gaugeflow import hodge
from gaugeflow.errors import LogBranch, NoConvergence
from gaugeflow.fields import (
    FieldConfig,
    Tangent,
    gauge_apply,
    plaquette_traces,
    random_gauge,
    site_dot,
)
from gaugeflow.functionals import FunctionalSpec, energy
from gaugeflow.lattice import LatticeSpec
from gaugeflow.lie import GroupKind, exp_map

SU2 = GroupKind("su2")


@pytest.fixture
def ref(rng):
    lat = LatticeSpec((6, 6), 0.5)
    return FieldConfig.trivial(lat, SU2).moved(Tangent.random(lat, SU2, rng, 0.3))


def test_relative_difference_of_identical_configs_is_zero(ref):
    # U U^dagger equals the identity only up to round-off
    assert gf.relative_difference(ref, ref).norm() <= 1e-14
    assert gf.residual_norm(ref.lattice, gf.coulomb_residual(ref, ref)) <= 1e-14


def test_relative_difference_recovers_small_moves(ref, rng):
    t = Tangent.random(ref.lattice, SU2, rng, 1e-3)
    back = gf.relative_difference(ref.moved(t), ref)
    assert (back - t).norm() <= 1e-12


def test_relative_difference_raises_on_antipodal_link(ref):
    bad = ref.copy()
    bad.links[3, 1] = -ref.links[3, 1]
    with pytest.raises(LogBranch):
        gf.relative_difference(bad, ref)


def test_residual_linearizes_to_pair_laplacian(ref, rng):
    chi = SU2.random_algebra(rng, (ref.lattice.volume,))
    lap = hodge.pair_laplacian(ref)
    errs = []
    for eps in (1e-3, 5e-4):
        res = gf.coulomb_residual(gauge_apply(exp_map(eps * chi), ref), ref)
        lin = eps * hodge.site_from_vector(ref, lap(hodge.site_to_vector(chi)))
        errs.append(np.abs(res - lin).max())
    assert errs[1] / errs[0] == pytest.approx(0.25, rel=0.05)


def test_residual_orthogonal_to_stabilizer(rng):
    lat = LatticeSpec((4, 4), 1.0)
    ref = FieldConfig.trivial(lat, SU2)
    cfg = ref.moved(Tangent.random(lat, SU2, rng, 0.3, matter=False))
    res = gf.coulomb_residual(cfg, ref)
    kernel = hodge.pair_kernel(ref)
    assert kernel.shape[1] == 3
    assert np.abs(kernel.T @ hodge.site_to_vector(res)).max() <= 1e-10 * max(1.0, np.abs(res).max())


def test_config_in_gauge_needs_no_newton_steps(ref):
    u, rep = gf.newton_fix(ref, ref)
    assert rep.converged and rep.newton_iterations_total == 0
    assert np.array_equal(u, SU2.identity((ref.lattice.volume,)))


def test_round_trip_recovers_gauge_invariants(ref, rng):
    u = random_gauge(ref.lattice, SU2, rng, 0.2)
    cfg = gauge_apply(u, ref)
    w, rep = gf.continuation_fix(cfg, ref)
    fixed = gauge_apply(w, cfg)
    assert rep.converged and rep.final_residual <= 1e-10
    assert gf.residual_norm(ref.lattice, gf.coulomb_residual(fixed, ref)) <= 1e-10
    assert np.abs(plaquette_traces(fixed) - plaquette_traces(cfg)).max() <= 1e-10
    spec = FunctionalSpec("boson", m=0.4, s=-0.1)
    assert energy(spec, fixed) == pytest.approx(energy(spec, cfg), abs=1e-10)


def test_reference_to_itself_takes_one_continuation_step(ref):
    u, rep = gf.continuation_fix(ref, ref)
    assert rep.continuation_steps == 1 and rep.newton_iterations_total == 0
    assert rep.norm_ratio is None
    assert np.abs(u - np.eye(2)).max() == 0.0


def test_small_perturbation_reports_finite_norm_ratio(ref, rng):
    d = Tangent.random(ref.lattice, SU2, rng, 1.0)
    _, rep = gf.continuation_fix(gf.perturbation(ref, d, 0.05), ref)
    assert rep.converged and rep.norm_ratio is not None and np.isfinite(rep.norm_ratio)
    assert rep.norm_ratio <= 1.0 + 1e-12  # the slice point is the closest orbit point to first order


def test_jacobian_matches_finite_difference(ref, rng):
    cfg = ref.moved(Tangent.random(ref.lattice, SU2, rng, 0.1))
    rel = gf.relative_difference(cfg, ref)
    eta = SU2.random_algebra(rng, (ref.lattice.volume,))
    jac = gf.jacobian(ref, cfg, rel)
    eps = 1e-6
    plus = gf.coulomb_residual(gauge_apply(exp_map(eps * eta), cfg), ref)
    minus = gf.coulomb_residual(gauge_apply(exp_map(-eps * eta), cfg), ref)
    fd = hodge.site_to_vector((plus - minus) / (2 * eps))
    assert np.abs(jac(hodge.site_to_vector(eta)) - fd).max() <= 1e-7 * np.abs(fd).max()


def test_adversarial_perturbation_fails_loudly(rng):
    lat = LatticeSpec((4, 4), 1.0)
    ref = FieldConfig.trivial(lat, SU2)
    # links a quarter turn from the cut locus: either an honest failure or a verified fixed point
    cfg = ref.moved(Tangent.random(lat, SU2, rng, 2.5, matter=False))
    try:
        u, rep = gf.continuation_fix(cfg, ref, max_newton=8, min_step=1e-3)
    except (NoConvergence, LogBranch):
        return
    res = gf.coulomb_residual(gauge_apply(u, cfg), ref)
    assert np.sqrt(site_dot(lat, res, res)) <= 1e-10


def test_newton_alone_gives_up_on_large_move(rng):
    lat = LatticeSpec((4, 4), 1.0)
    ref = FieldConfig.trivial(lat, SU2)
    u = random_gauge(lat, SU2, rng, 2.0)
    with pytest.raises(NoConvergence) as info:
        gf.newton_fix(gauge_apply(u, ref.moved(Tangent.random(lat, SU2, rng, 0.5, False))), ref, max_newton=2)
    assert info.value.residual is not None


def test_incompatible_inputs_rejected(ref):
    other = FieldConfig.trivial(LatticeSpec((4, 4), 0.5), SU2)
    with pytest.raises(ValueError):
        gf.continuation_fix(other, ref)


def test_report_serializes(ref):
    _, rep = gf.continuation_fix(ref, ref)
    d = rep.to_dict()
    assert set(d) == {"converged", "final_residual", "newton_iterations_total", "continuation_steps",
                      "norm_ratio", "empirical_zeta"}
