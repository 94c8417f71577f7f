import math
import warnings

import numpy as np
import pytest

from prodstab.discretization import SimState, smoothed, step
from prodstab.errors import AssumptionViolated, UnsupportedShape
from prodstab.feedback import (
    Linear,
    Mixed,
    OpenLoop,
    admissible_gain,
    check_gain,
    continuous_bound_X,
    control,
    inflow_matrix,
    kappa_bound,
    mixed_bound_Y,
    mixed_control,
    resolved_kappa,
    semidefinite_check,
)
from prodstab.lyapunov import LyapunovWeights, stability_residual

from conftest import make_config


def test_kappa_bound_values():
    assert kappa_bound(0.5, 0.5) == pytest.approx(math.exp(-0.25), abs=0)
    assert round(kappa_bound(0.5, 0.5), 4) == 0.7788
    assert round(kappa_bound(0.2, 0.5), 4) == 0.9048
    with pytest.raises(ValueError):
        kappa_bound(-1.0, 0.5)


def test_admissible_gain_matches_bound_for_two_stages(cfg2, weights2):
    assert admissible_gain(weights2, cfg2) == pytest.approx(kappa_bound(0.5, 0.5), rel=1e-14)
    assert resolved_kappa(Mixed(), weights2, cfg2) == admissible_gain(weights2, cfg2)
    assert resolved_kappa(Mixed(0.3), weights2, cfg2) == 0.3


def test_admissible_gain_zeroes_lambda2(mixed_speed_cfg):
    w = LyapunovWeights((1.0, 2.0), (0.3, 0.7), (1.0, 1.0), (0.3, 0.7))
    k = admissible_gain(w, mixed_speed_cfg)
    lam1, lam2, nsd = semidefinite_check(inflow_matrix(k), w, mixed_speed_cfg)
    assert abs(lam2) <= 1e-12
    assert lam1 < 0 and nsd


def test_semidefinite_above_bound(cfg2, weights2):
    lam1, lam2, nsd = semidefinite_check(inflow_matrix(0.9), weights2, cfg2)
    assert lam2 > 0 and not nsd
    G = np.array([[0.2, 0.5], [1.0, 0.1]])  # non-diagonal product
    lam1, lam2, _ = semidefinite_check(G, weights2, cfg2)
    assert lam1 <= lam2


def test_semidefinite_needs_two_processors():
    cfg = make_config(v=(1.0, 1.0, 1.0), mu=(3.0, 3.0, 3.0))
    with pytest.raises(UnsupportedShape):
        semidefinite_check(inflow_matrix(0.5, 3), LyapunovWeights.uniform(3, 0.5), cfg)


def test_inflow_matrix_shape():
    G = inflow_matrix(0.4, 3)
    np.testing.assert_array_equal(G, [[0, 0, 0.4], [1, 0, 0], [0, 1, 0]])


def test_check_gain_warns(cfg2, weights2):
    with pytest.warns(UserWarning):
        check_gain(Linear(0.9), weights2, cfg2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        check_gain(Linear(0.5), weights2, cfg2)
        check_gain(OpenLoop.constant(1.0), weights2, cfg2)


def test_open_loop_profile():
    law = OpenLoop(((0.0, 2.0), (1.0, 0.5), (3.0, 0.0)))
    np.testing.assert_array_equal(law.values([0.0, 0.99, 1.0, 2.5, 3.0, 10.0]), [2, 2, 0.5, 0.5, 0, 0])
    with pytest.raises(ValueError):
        OpenLoop(((0.5, 1.0),))
    with pytest.raises(ValueError):
        OpenLoop(((0.0, -1.0),))


def test_gain_validation():
    with pytest.raises(ValueError):
        Linear(-0.1)
    with pytest.raises(ValueError):
        Mixed(float("nan"))


def test_mixed_equals_linear_at_zero_queues(rng, cfg2, weights2):
    for _ in range(200):
        f = rng.uniform(0, 4, size=(2, cfg2.N))
        s = SimState(f, np.zeros(2), int(rng.integers(0, 50)))
        kappa = rng.uniform(0.0, 0.77)
        assert control(Mixed(kappa), s, weights2, cfg2) == control(Linear(kappa), s, weights2, cfg2)


def test_mixed_law_zeroes_residual(rng, cfg2, weights2):
    """When sqrt(Y) lies inside [0, mu1] the step residual vanishes."""
    hits = 0
    for _ in range(300):
        f = rng.uniform(0, 4, size=(2, cfg2.N))
        s = SimState(f, np.array([0.0, rng.uniform(0.01, 2.0)]), int(rng.integers(0, 40)))
        Y = mixed_bound_Y(s, weights2, cfg2)
        if not 0.0 < Y < 36.0:
            continue
        u = mixed_control(s, weights2, cfg2)
        assert u == pytest.approx(math.sqrt(Y), rel=1e-14)
        r = stability_residual(s, u, weights2, cfg2)
        assert abs(r.residual) <= 1e-12 * max(1.0, r.V)
        hits += 1
    assert hits > 50


def test_mixed_law_two_stage_closed_form(cfg2, weights2):
    # unit weights, common speed: compare with the hand-expanded formula
    f = np.full((2, cfg2.N), 3.0)
    f[1, -1] = 2.0
    q2, t = 0.7, 4 * cfg2.tau
    s = SimState(f, np.array([0.0, q2]), 4)
    eta, tau, mu2 = 0.5, cfg2.tau, 4.0
    d = 3.0 - mu2
    expected = (
        9.0 * math.exp(-eta * 0.5) + 4.0 * math.exp(-eta * 1.0) - mu2 ** 2 * math.exp(-eta * 0.5)
        - (2 * q2 * d + tau * d * d) * math.exp(-eta * t) * math.exp(-eta * tau)
    )
    assert mixed_bound_Y(s, weights2, cfg2) == pytest.approx(expected, rel=1e-14)


def test_mixed_control_clamped_to_capacity(cfg2, weights2):
    f = np.full((2, cfg2.N), 4.0)
    s = SimState(f, np.array([0.0, 50.0]), 0)  # large queue: Y far above mu1^2
    u = mixed_control(s, weights2, cfg2)
    assert 0.0 <= u <= 6.0


def test_continuous_bound_requires_common_speed():
    with pytest.raises(AssumptionViolated):
        continuous_bound_X([1.0, 1.0], [0.0, 1.0], [5.0, 4.0], [1.0, 0.5], 0.5, 0.5, 0.5, 0.0)


def test_continuous_bound_value():
    fout, q, mu = np.array([3.0, 2.0]), np.array([0.0, 0.5]), np.array([6.0, 4.0])
    eta, eta_t, l, t, eps = 0.5, 0.5, 0.5, 1.0, 1e-6
    g = min(0.5 / eps, 4.0)
    expected = 13.0 * math.exp(-eta * l) - g ** 2 - 2 * 0.5 * 3.0 * math.exp(-eta_t * t) + 2 * 0.5 * g * math.exp(-eta_t * t)
    assert continuous_bound_X(fout, q, mu, 1.0, eta, eta_t, l, t, eps) == pytest.approx(expected, rel=1e-14)
    # empty queue: pass-through
    X0 = continuous_bound_X(fout, np.zeros(2), mu, 1.0, eta, eta_t, l, t, eps)
    assert X0 == pytest.approx(13.0 * math.exp(-eta * l) - 9.0, rel=1e-14)


def test_smoothed_coupling_closed_loop(cfg2, weights2):
    s = SimState.constant(cfg2, (4.0, 4.0), (0.0, 1.0))
    mode = smoothed()
    for _ in range(30):
        u = control(Mixed(), s, weights2, cfg2, mode=mode)
        assert stability_residual(s, u, weights2, cfg2, mode=mode).passed
        s, _ = step(s, u, cfg2, mode)
