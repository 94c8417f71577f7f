"""Discrete Lyapunov function, decay rates and the per-step stability monitor.

The Lyapunov function of a state is

    V = sum_{e,j} f_{e,j}^2 p_e exp(-eta_e x_{e,j}) h + sum_e q_e^2 c_e exp(-eta~_e v_e t_k)

with global cell centers ``x_{e,j}``. A step is certified (``V^{k+1} <=
(1 - tau*nu) V^k``) when the boundary-plus-queue residual ``S2 + Z2`` is
nonpositive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .discretization import HARD, CouplingMode, SimState, boundary_fluxes, queue_update, upwind
from .network import NetworkSpec, ValidatedConfig, boundary_coordinates, cell_centers

RESIDUAL_RTOL = 1e-10


def _per_edge(x, m):
    return tuple(float(v) for v in np.broadcast_to(np.asarray(x, dtype=float), (m,)))


@dataclass(frozen=True)
class LyapunovWeights:
    """Spatial weights ``p_e, eta_e`` and temporal weights ``c_e, eta~_e``."""

    p: tuple
    eta: tuple
    c: tuple
    eta_tilde: tuple

    def __post_init__(self):
        lens = {len(x) for x in (self.p, self.eta, self.c, self.eta_tilde)}
        if len(lens) != 1:
            raise ValueError("all weight vectors must have one entry per processor")
        for name in ("p", "eta", "c", "eta_tilde"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not all(v > 0 and math.isfinite(v) for v in vals):
                raise ValueError(f"Lyapunov weight {name} must be strictly positive, got {vals}")
            object.__setattr__(self, name, vals)

    @classmethod
    def uniform(cls, m, eta, eta_tilde=None, p=1.0, c=1.0):
        eta_tilde = eta if eta_tilde is None else eta_tilde
        return cls(_per_edge(p, m), _per_edge(eta, m), _per_edge(c, m), _per_edge(eta_tilde, m))

    @property
    def m(self):
        return len(self.p)

    def arrays(self):
        return tuple(np.array(x) for x in (self.p, self.eta, self.c, self.eta_tilde))


class LyapunovSample(NamedTuple):
    V: float
    V1: float
    V2: float
    k: int


class DecayRate(NamedTuple):
    nu: float
    nu1: float
    nu2: float


@dataclass(frozen=True)
class ResidualSample:
    """Decomposition terms of one step and the inequality verdict."""

    S1: float
    S2: float
    Z1: float
    Z2: float
    V: float
    C_lower: float
    C_upper: float

    @property
    def residual(self) -> float:
        return self.S2 + self.Z2

    @property
    def passed(self) -> bool:
        return self.residual <= residual_tolerance(self.V)


def residual_tolerance(V):
    return RESIDUAL_RTOL * np.maximum(1.0, V)


# -- weight arrays ---------------------------------------------------------

@dataclass(frozen=True)
class WeightArrays:
    """Precomputed factors shared by V, the residual and the mixed law."""

    cell: np.ndarray    # p_e exp(-eta_e x_{e,j}) * h, shape (m, N)
    c: np.ndarray       # c_e
    qrate: np.ndarray   # eta~_e v_e
    w_in: np.ndarray    # p_e exp(-eta_e x_in_e)
    w_out: np.ndarray   # p_e exp(-eta_e x_out_e)

    def queue(self, t):
        return self.c * np.exp(-self.qrate * t)


def weight_arrays(weights: LyapunovWeights, cfg: ValidatedConfig, coords=None) -> WeightArrays:
    if weights.m != cfg.m:
        raise ValueError(f"weights for {weights.m} processors, network has {cfg.m}")
    p, eta, c, eta_t = weights.arrays()
    x = cell_centers(cfg)
    x_in, x_out = boundary_coordinates(cfg, coords)
    return WeightArrays(
        cell=p[:, None] * np.exp(-eta[:, None] * x) * cfg.h,
        c=c,
        qrate=eta_t * cfg.network.v,
        w_in=p * np.exp(-eta * x_in),
        w_out=p * np.exp(-eta * x_out),
    )


def residual_terms(ghost, out, q, g_in, g_out, v, w_in, w_out, qz, tau):
    """``S2`` and ``Z2`` of one step.

    ``qz`` is ``c_e exp(-eta~_e v_e t_k) exp(-eta~_e v_e tau)``.
    """
    S2 = float(np.sum(v * (ghost * ghost * w_in - out * out * w_out)))
    d = g_in - g_out
    Z2 = float(np.sum((2.0 * q * d + tau * d * d) * qz))
    return S2, Z2


# -- public operations -----------------------------------------------------

def discrete_V(state: SimState, weights: LyapunovWeights, cfg: ValidatedConfig, t_k=None) -> LyapunovSample:
    """Discrete Lyapunov function at ``t_k`` (defaults to ``state.k * tau``)."""
    t_k = state.k * cfg.tau if t_k is None else t_k
    wa = weight_arrays(weights, cfg)
    V1 = float(np.sum(state.flux * state.flux * wa.cell))
    V2 = float(np.sum(state.queues * state.queues * wa.queue(t_k)))
    return LyapunovSample(V1 + V2, V1, V2, state.k)


def decay_rate(cfg: ValidatedConfig, weights: LyapunovWeights) -> DecayRate:
    """Guaranteed discrete decay rate ``nu = min(nu1, nu2)``."""
    v = cfg.network.v
    _, eta, _, eta_t = weights.arrays()
    h, tau = cfg.h, cfg.tau
    nu1 = float(np.min(v * -np.expm1(-eta * h)) / h)
    nu2 = float(np.max(v) * np.min(-np.expm1(-eta_t * v * tau)) / h)
    nu = min(nu1, nu2)
    assert 0.0 < tau * nu <= 1.0, f"tau*nu = {tau * nu} outside (0, 1]"
    return DecayRate(nu, nu1, nu2)


def analytic_decay_rate(weights: LyapunovWeights, spec: NetworkSpec) -> float:
    """Continuous-time rate ``min_e min(eta_e, eta~_e) * min_e v_e``."""
    per_edge = min(min(a, b) for a, b in zip(weights.eta, weights.eta_tilde))
    return per_edge * min(spec.velocities)


def upper_bound(V0, nu, tau, k):
    """``V0 * exp(-nu * tau * k)``; ``k`` may be an array."""
    return V0 * np.exp(-nu * tau * np.asarray(k, dtype=float))


def discrete_norm(state: SimState, h: float) -> float:
    return math.sqrt(float(np.sum(state.flux ** 2)) * h + float(np.sum(state.queues ** 2)))


def norm_constants(weights: LyapunovWeights, cfg: ValidatedConfig, t_k: float):
    """Constants ``(C_lower, C_upper)`` with C_lower*||.||^2 <= V <= C_upper*||.||^2."""
    wa = weight_arrays(weights, cfg)
    factors = np.concatenate([(wa.cell / cfg.h).ravel(), wa.queue(t_k)])
    return float(factors.min()), float(factors.max())


def stability_residual(
    state: SimState,
    u: float,
    weights: LyapunovWeights,
    cfg: ValidatedConfig,
    t_k=None,
    mode: CouplingMode = HARD,
) -> ResidualSample:
    """Decomposition terms ``S1, S2, Z1, Z2`` for a step with control ``u``.

    ``S2`` uses the boundary coordinates of ``cfg.coords``. The verdict is
    ``S2 + Z2 <= 1e-10 * max(1, V)``.
    """
    t_k = state.k * cfg.tau if t_k is None else t_k
    tau, h = cfg.tau, cfg.h
    v = cfg.network.v
    _, eta, _, _ = weights.arrays()
    wa = weight_arrays(weights, cfg)
    ghost, g_in, g_out = boundary_fluxes(state, u, cfg, mode)
    qw = wa.queue(t_k)
    qz = qw * np.exp(-wa.qrate * tau)
    S2, Z2 = residual_terms(ghost, state.outflow, state.queues, g_in, g_out, v, wa.w_in, wa.w_out, qz, tau)

    f2 = state.flux * state.flux
    S1 = float(np.sum(v[:, None] * np.expm1(-eta[:, None] * h) * f2 * wa.cell / h))
    Z1 = float(np.sum(state.queues ** 2 * qw * np.expm1(-wa.qrate * tau)) / tau)
    V = float(np.sum(f2 * wa.cell) + np.sum(state.queues ** 2 * qw))
    lo, hi = norm_constants(weights, cfg, t_k)
    return ResidualSample(S1, S2, Z1, Z2, V, lo, hi)


class ProofTerms(NamedTuple):
    C1: float
    C2: float
    S1: float
    S2: float
    Z1: float
    Z2: float
    queue_clamped: bool


def proof_terms(state, u, weights, cfg, mode: CouplingMode = HARD) -> ProofTerms:
    """Difference-quotient split ``(V^{k+1}-V^k)/tau = C1 + C2`` for one actual step.

    ``C1``/``C2`` come from the stepped state. ``S2`` here uses the
    coordinates for which the flux estimate ``C1 <= S1 + S2`` is exact
    under CFL: first cell center inflow and ``x_{e,N-1} + h`` outflow.
    """
    tau, h, t_k = cfg.tau, cfg.h, state.k * cfg.tau
    v = cfg.network.v
    p, eta, _, _ = weights.arrays()
    wa = weight_arrays(weights, cfg)
    ghost, g_in, g_out = boundary_fluxes(state, u, cfg, mode)
    f_new = upwind(state.flux, ghost, cfg.ratios)
    q_new, clamped = queue_update(state.queues, g_in, g_out, tau)

    C1 = float(np.sum((f_new ** 2 - state.flux ** 2) * wa.cell)) / tau
    qw0 = wa.queue(t_k)
    qw1 = wa.queue(t_k + tau)
    C2 = float(np.sum(q_new ** 2 * qw1 - state.queues ** 2 * qw0)) / tau

    x = cell_centers(cfg)
    w_first = p * np.exp(-eta * x[:, 0])
    w_past = p * np.exp(-eta * (x[:, -1] + h))
    out = state.outflow
    S2 = float(np.sum(v * (ghost ** 2 * w_first - out ** 2 * w_past)))
    S1 = float(np.sum(v[:, None] * np.expm1(-eta[:, None] * h) * state.flux ** 2 * wa.cell / h))
    Z1 = float(np.sum(state.queues ** 2 * qw0 * np.expm1(-wa.qrate * tau)) / tau)
    d = g_in - g_out
    Z2 = float(np.sum((2.0 * state.queues * d + tau * d * d) * qw0 * np.exp(-wa.qrate * tau)))
    return ProofTerms(C1, C2, S1, S2, Z1, Z2, bool(clamped.any()))


class ConvergenceRow(NamedTuple):
    h: float
    nu: float
    error: float
    ratio: float | None


def decay_convergence(weights: LyapunovWeights, spec: NetworkSpec, hs) -> list:
    """Discrete decay rate against its continuous limit along a sequence of ``h``.

    Each ``h`` uses ``tau = h / max_e(v_e)`` (CFL equal to one). ``ratio``
    is the error divided by the previous row's error.
    """
    from .network import GridSpec, validate_network

    target = analytic_decay_rate(weights, spec)
    rows = []
    prev = None
    for h in hs:
        grid = GridSpec.from_cfl(h, 1.0, max(spec.velocities), T=0.0)
        cfg = validate_network(spec, grid)
        nu = decay_rate(cfg, weights).nu
        err = abs(nu - target)
        rows.append(ConvergenceRow(float(h), nu, err, None if prev is None else err / prev))
        prev = err
    return rows
