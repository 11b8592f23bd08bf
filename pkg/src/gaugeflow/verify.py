"""Self-consistency suites: invariances, derivatives, adjoint pairs, projectors.

Each suite returns its worst defect; :func:`run_all` compares them against
fixed thresholds.
"""
from __future__ import annotations

import numpy as np

from . import hodge
from .fields import FieldConfig, Tangent, d0, d0_star, gauge_apply, random_gauge, site_dot
from .functionals import FunctionalSpec, energy, gradient, hess_vec

THRESHOLDS = {
    "gauge_invariance": 1e-12,
    "gradient_fd": 1e-6,
    "hessian_symmetry": 1e-8,
    "hessian_fd": 1e-5,
    "adjointness": 1e-12,
    "projector": 1e-10,
}


def random_config(lat, group, rng, scale=0.3, matter=True) -> FieldConfig:
    cfg = FieldConfig.trivial(lat, group).moved(Tangent.random(lat, group, rng, scale, matter))
    return cfg


def gauge_invariance(spec, cfgs, rng):
    worst = 0.0
    for cfg in cfgs:
        e = energy(spec, cfg)
        u = random_gauge(cfg.lattice, cfg.group, rng, 1.0)
        worst = max(worst, abs(energy(spec, gauge_apply(u, cfg)) - e) / (1 + abs(e)))
    return worst


def gradient_fd(spec, cfgs, rng, directions=3, eps=1e-5):
    """Relative mismatch of ``<grad, t>`` against a central difference of the energy."""
    worst = 0.0
    for cfg in cfgs:
        g = gradient(spec, cfg)
        for _ in range(directions):
            t = Tangent.random(cfg.lattice, cfg.group, rng, 1.0, spec.has_matter)
            fd = (energy(spec, cfg.moved(t, eps)) - energy(spec, cfg.moved(t, -eps))) / (2 * eps)
            exact = g.dot(t)
            worst = max(worst, abs(fd - exact) / max(abs(exact), g.norm() * t.norm(), 1e-300))
    return worst


def hessian_symmetry(spec, cfgs, rng):
    worst = 0.0
    for cfg in cfgs:
        g = gradient(spec, cfg)
        s = Tangent.random(cfg.lattice, cfg.group, rng, 1.0, spec.has_matter)
        t = Tangent.random(cfg.lattice, cfg.group, rng, 1.0, spec.has_matter)
        hs, ht = hess_vec(spec, cfg, s, g), hess_vec(spec, cfg, t, g)
        scale = max(hs.norm() * t.norm(), ht.norm() * s.norm(), 1e-300)
        worst = max(worst, abs(hs.dot(t) - s.dot(ht)) / scale)
    return worst


def hessian_fd(spec, cfgs, rng, eps=1e-4):
    """Second central difference of the energy along ``t`` against ``<H t, t>``."""
    worst = 0.0
    for cfg in cfgs:
        t = Tangent.random(cfg.lattice, cfg.group, rng, 1.0, spec.has_matter)
        e0 = energy(spec, cfg)
        e_plus, e_minus = energy(spec, cfg.moved(t, eps)), energy(spec, cfg.moved(t, -eps))
        fd = (e_plus - 2 * e0 + e_minus) / eps**2
        exact = hess_vec(spec, cfg, t).dot(t)
        worst = max(worst, abs(fd - exact) / max(abs(exact), 1.0))
    return worst


def adjointness(cfgs, rng):
    worst = 0.0
    for cfg in cfgs:
        lat, group = cfg.lattice, cfg.group
        xi = group.random_algebra(rng, (lat.volume,))
        t = Tangent.random(lat, group, rng)
        lhs = hodge.pair_d(cfg, xi).dot(t)
        rhs = site_dot(lat, xi, hodge.pair_dstar(cfg, t))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1.0))
        lhs0 = Tangent(lat, group, d0(cfg, xi), 0 * t.phi).dot(t)
        rhs0 = site_dot(lat, xi, d0_star(cfg, t.links))
        worst = max(worst, abs(lhs0 - rhs0) / max(abs(lhs0), 1.0))
        if len(lat.planes):
            f = group.random_algebra(rng, (lat.volume, len(lat.planes)))
            curl = hodge.d1(cfg, t.links)
            lhs1 = sum(site_dot(lat, curl[:, p], f[:, p]) for p in range(len(lat.planes)))
            rhs1 = Tangent(lat, group, hodge.d1_star(cfg, f), 0 * t.phi).dot(t)
            worst = max(worst, abs(lhs1 - rhs1) / max(abs(lhs1), 1.0))
    return worst


def projector(cfgs, rng):
    """Idempotence of the slice projection and ``d^* P = 0``."""
    worst = 0.0
    for cfg in cfgs:
        t = Tangent.random(cfg.lattice, cfg.group, rng)
        kernel = hodge.pair_kernel(cfg)
        p = hodge.slice_project(cfg, t, kernel=kernel)
        pp = hodge.slice_project(cfg, p, kernel=kernel)
        worst = max(worst, (pp - p).norm() / max(t.norm(), 1e-300))
        res = hodge.pair_dstar(cfg, p)
        worst = max(worst, np.sqrt(site_dot(cfg.lattice, res, res)) / max(t.norm(), 1e-300))
    return worst


def run_all(spec: FunctionalSpec, lat, group, rng, samples=3) -> dict:
    """Worst defect per suite plus pass flags: ``{suite: {"defect": x, "pass": b}}``."""
    cfgs = [random_config(lat, group, rng, matter=spec.has_matter) for _ in range(samples)]
    defects = {
        "gauge_invariance": gauge_invariance(spec, cfgs, rng),
        "gradient_fd": gradient_fd(spec, cfgs, rng),
        "hessian_symmetry": hessian_symmetry(spec, cfgs, rng),
        "hessian_fd": hessian_fd(spec, cfgs, rng),
        "adjointness": adjointness(cfgs, rng),
        "projector": projector(cfgs[:1], rng),
    }
    return {
        name: {"defect": float(x), "threshold": THRESHOLDS[name], "pass": bool(x <= THRESHOLDS[name])}
        for name, x in defects.items()
    }
