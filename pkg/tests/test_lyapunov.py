import math

import numpy as np
import pytest

from prodstab.discretization import SimState, step
from prodstab.feedback import Linear, Mixed, control
from prodstab.lyapunov import (
    LyapunovWeights,
    analytic_decay_rate,
    decay_convergence,
    decay_rate,
    discrete_norm,
    discrete_V,
    norm_constants,
    proof_terms,
    residual_tolerance,
    stability_residual,
    upper_bound,
)
from prodstab.network import NetworkSpec

from conftest import make_config

NONUNIFORM = LyapunovWeights((1.0, 2.0), (0.3, 0.7), (1.5, 1.0), (0.4, 0.2))


def _random_state(rng, cfg, k=None):
    f = rng.uniform(0, 5, size=(cfg.m, cfg.N))
    q = rng.uniform(0, 3, size=cfg.m)
    q[0] = 0.0
    if rng.uniform() < 0.3:
        q[1:] = 0.0
    return SimState(f, q, int(rng.integers(0, 100)) if k is None else k)


def test_weights_must_be_positive():
    with pytest.raises(ValueError):
        LyapunovWeights((1.0,), (0.0,), (1.0,), (1.0,))
    with pytest.raises(ValueError):
        LyapunovWeights.uniform(2, 0.5, p=-1.0)
    w = LyapunovWeights.uniform(3, 0.4)
    assert w.eta_tilde == (0.4, 0.4, 0.4) and w.m == 3


def test_V_on_constant_state(cfg2, weights2):
    # closed form for constant flux: sum_j exp(-eta x_j) h is a geometric sum
    s = SimState.constant(cfg2, (2.0, 3.0), (0.0, 1.5))
    x = (np.arange(cfg2.N) + 0.5) * cfg2.h
    geo = np.sum(np.exp(-0.5 * x)) * cfg2.h
    V1 = 4.0 * geo + 9.0 * geo * math.exp(-0.5 * 0.5)
    out = discrete_V(s, weights2, cfg2)
    assert out.V1 == pytest.approx(V1, rel=1e-14)
    assert out.V2 == pytest.approx(2.25, rel=1e-15)
    later = discrete_V(s, weights2, cfg2, t_k=2.0)
    assert later.V2 == pytest.approx(2.25 * math.exp(-0.5 * 2.0), rel=1e-14)


def test_sandwich_inequality(rng, mixed_speed_cfg):
    cfg = mixed_speed_cfg
    for _ in range(500):
        s = _random_state(rng, cfg)
        t = s.k * cfg.tau
        lo, hi = norm_constants(NONUNIFORM, cfg, t)
        V = discrete_V(s, NONUNIFORM, cfg).V
        n2 = discrete_norm(s, cfg.h) ** 2
        assert lo * n2 <= V * (1 + 1e-14)
        assert V <= hi * n2 * (1 + 1e-14)
        assert 0 < lo <= hi


@pytest.mark.parametrize("law", [Linear(0.4), Mixed(), Mixed(0.2)], ids=["linear", "mixed", "mixed-low-gain"])
def test_proof_term_identity(rng, mixed_speed_cfg, law):
    cfg = mixed_speed_cfg
    for _ in range(300):
        s = _random_state(rng, cfg)
        u = control(law, s, NONUNIFORM, cfg)
        s1, rep = step(s, u, cfg)
        pt = proof_terms(s, rep.u, NONUNIFORM, cfg)
        dV = (discrete_V(s1, NONUNIFORM, cfg).V - discrete_V(s, NONUNIFORM, cfg).V) / cfg.tau
        scale = max(abs(dV), abs(pt.C1), abs(pt.C2), 1.0)
        assert abs(dV - (pt.C1 + pt.C2)) <= 1e-10 * scale
        # flux estimate and exact queue split
        assert pt.C1 <= pt.S1 + pt.S2 + 1e-10 * scale
        if not pt.queue_clamped:
            assert pt.C2 == pytest.approx(pt.Z1 + pt.Z2, rel=1e-10, abs=1e-10)
        else:
            assert pt.C2 <= pt.Z1 + pt.Z2 + 1e-10 * scale


def test_flux_estimate_equality_at_cfl_one(rng, cfg2, weights2):
    # with v*tau = h the flux term is an identity, not just a bound
    for _ in range(100):
        s = _random_state(rng, cfg2)
        u = rng.uniform(0, 6)
        pt = proof_terms(s, u, weights2, cfg2)
        assert pt.C1 == pytest.approx(pt.S1 + pt.S2, rel=1e-10, abs=1e-10)


def test_guaranteed_decay_when_residual_passes(rng, mixed_speed_cfg):
    cfg = mixed_speed_cfg
    nu = decay_rate(cfg, NONUNIFORM).nu
    checked = 0
    for _ in range(300):
        s = _random_state(rng, cfg)
        u = control(Mixed(), s, NONUNIFORM, cfg)
        r = stability_residual(s, u, NONUNIFORM, cfg)
        if not r.passed:
            continue
        s1, _ = step(s, u, cfg)
        V0 = discrete_V(s, NONUNIFORM, cfg).V
        V1 = discrete_V(s1, NONUNIFORM, cfg).V
        assert V1 <= (1 - cfg.tau * nu) * V0 + 1e-10 * max(1.0, V0)
        checked += 1
    assert checked > 100


def test_residual_conventions_differ(rng, cfg2, weights2):
    s = _random_state(rng, cfg2)
    vals = {c: stability_residual(s, 1.0, weights2, cfg2.with_coords(c)).S2 for c in ("interface", "center", "local")}
    assert len(set(vals.values())) == 3


def test_residual_tolerance():
    assert residual_tolerance(0.5) == 1e-10
    assert residual_tolerance(1e4) == pytest.approx(1e-6)


def test_decay_rate_formula(cfg2, weights2):
    h, tau, eta = cfg2.h, cfg2.tau, 0.5
    expected = (1 - math.exp(-eta * h)) / h
    d = decay_rate(cfg2, weights2)
    assert d.nu1 == pytest.approx(expected, rel=1e-14)
    assert d.nu2 == pytest.approx((1 - math.exp(-eta * tau)) / h, rel=1e-14)
    assert d.nu == min(d.nu1, d.nu2)


def test_decay_rate_unequal_speeds(mixed_speed_cfg):
    d = decay_rate(mixed_speed_cfg, NONUNIFORM)
    h, tau = mixed_speed_cfg.h, mixed_speed_cfg.tau
    nu1 = min(0.8 * (1 - math.exp(-0.3 * h)), 0.5 * (1 - math.exp(-0.7 * h))) / h
    nu2 = 0.8 * min(1 - math.exp(-0.4 * 0.8 * tau), 1 - math.exp(-0.2 * 0.5 * tau)) / h
    assert d.nu1 == pytest.approx(nu1, rel=1e-13)
    assert d.nu2 == pytest.approx(nu2, rel=1e-13)
    assert 0 < tau * d.nu <= 1


def test_decay_convergence_ratio():
    w = LyapunovWeights.uniform(2, 0.575)
    spec = NetworkSpec((1.0, 1.0), (6.0, 4.0), 0.5)
    rows = decay_convergence(w, spec, [0.05 / 2 ** i for i in range(6)])
    limit = analytic_decay_rate(w, spec)
    assert limit == pytest.approx(0.575)
    for a, b in zip(rows, rows[1:]):
        assert a.error > b.error > 0
        assert b.error / a.error == pytest.approx(0.5, abs=0.1)


def test_upper_bound():
    k = np.arange(5)
    np.testing.assert_allclose(upper_bound(2.0, 0.5, 0.1, k), 2.0 * np.exp(-0.05 * k), rtol=1e-15)


def test_weights_shape_mismatch(cfg2):
    with pytest.raises(ValueError):
        discrete_V(SimState.zeros(cfg2), LyapunovWeights.uniform(3, 0.5), cfg2)


def test_three_stage_residual_runs():
    cfg = make_config(v=(1.0, 1.0, 1.0), mu=(10.0, 9.0, 8.0), l=1.0, h=0.1, T=1.0)
    w = LyapunovWeights.uniform(3, 0.1)
    s = SimState.constant(cfg, (10.0, 9.0, 8.0), (0.0, 0.5, 0.5))
    u = control(Mixed(0.1), s, w, cfg)
    assert stability_residual(s, u, w, cfg).passed
