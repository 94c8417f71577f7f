"""Boundary control laws for the inflow ``u_1`` of the first processor.

Three laws are available:

* :class:`OpenLoop` -- a prescribed, piecewise-constant inflow profile;
* :class:`Linear` -- ``u_1 = kappa * f_{m,N-1}``, a fraction of the line's outflow;
* :class:`Mixed` -- the linear law while every queue is empty, otherwise the
  largest inflow for which the step's stability residual stays nonpositive.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .discretization import HARD, CouplingMode, SimState, boundary_fluxes, clamp_control
from .errors import AssumptionViolated, UnsupportedShape
from .lyapunov import LyapunovWeights, weight_arrays
from .network import ValidatedConfig

LAW_OPEN_LOOP, LAW_LINEAR, LAW_MIXED = 0, 1, 2


@dataclass(frozen=True)
class OpenLoop:
    """Piecewise-constant inflow: ``breakpoints = ((t0, u0), (t1, u1), ...)``.

    The value ``u_i`` applies on ``[t_i, t_{i+1})``; ``t0`` must be 0.
    """

    breakpoints: tuple = ((0.0, 0.0),)

    def __post_init__(self):
        bp = tuple((float(t), float(u)) for t, u in self.breakpoints)
        if not bp or bp[0][0] != 0.0:
            raise ValueError("open-loop profile must start at t = 0")
        if any(b[0] <= a[0] for a, b in zip(bp, bp[1:])):
            raise ValueError("open-loop breakpoints must be strictly increasing in t")
        if any(u < 0 for _, u in bp):
            raise ValueError("open-loop inflow must be nonnegative")
        object.__setattr__(self, "breakpoints", bp)

    @classmethod
    def constant(cls, value):
        return cls(((0.0, value),))

    def values(self, times) -> np.ndarray:
        ts = np.array([t for t, _ in self.breakpoints])
        us = np.array([u for _, u in self.breakpoints])
        idx = np.searchsorted(ts, np.asarray(times, dtype=float), side="right") - 1
        return us[idx]

    code = LAW_OPEN_LOOP


@dataclass(frozen=True)
class Linear:
    kappa: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa!r}")
        object.__setattr__(self, "kappa", float(self.kappa))

    code = LAW_LINEAR


@dataclass(frozen=True)
class Mixed:
    """Queue-aware law. ``kappa=None`` picks :func:`admissible_gain` at run time."""

    kappa: float | None = None

    def __post_init__(self):
        if self.kappa is not None:
            if not self.kappa > 0:
                raise ValueError(f"kappa must be > 0, got {self.kappa!r}")
            object.__setattr__(self, "kappa", float(self.kappa))

    code = LAW_MIXED


FeedbackLaw = OpenLoop | Linear | Mixed


def kappa_bound(eta: float, l: float) -> float:
    """Largest linear gain ``exp(-eta*l)`` certified for two processors."""
    if eta < 0 or l <= 0:
        raise ValueError("need eta >= 0 and l > 0")
    return math.exp(-eta * l)


def admissible_gain(weights: LyapunovWeights, cfg: ValidatedConfig) -> float:
    """Largest ``kappa`` keeping the empty-queue inflow/outflow balance nonpositive.

    Equals ``exp(-eta*l)`` for two processors with unit weights and
    velocities in the interface convention.
    """
    wa = weight_arrays(weights, cfg)
    v = cfg.network.v
    return math.sqrt(v[-1] * wa.w_out[-1] / (v[0] * wa.w_in[0]))


def resolved_kappa(law, weights, cfg):
    if isinstance(law, OpenLoop):
        return 0.0
    if law.kappa is None:
        return admissible_gain(weights, cfg)
    return law.kappa


def check_gain(law, weights, cfg):
    """Warn (never raise) when a gain exceeds the certified bound."""
    if isinstance(law, OpenLoop):
        return
    kappa = resolved_kappa(law, weights, cfg)
    bound = admissible_gain(weights, cfg)
    if kappa > bound * (1 + 1e-12):
        warnings.warn(
            f"kappa={kappa:.6g} exceeds the certified gain {bound:.6g}; no decay guarantee",
            stacklevel=3,
        )


def linear_control(kappa: float, f_last: float) -> float:
    return kappa * f_last


def mixed_bound(out, q, g_in, g_out, v, w_in, w_out, qz, tau) -> float:
    """Array form of the mixed bound shared with the Python kernel.

    Index 0 of ``g_in``/``g_out`` is ignored (processor 1 has no queue).
    """
    num = float(np.sum(v * out * out * w_out))
    num -= float(np.sum(v[1:] * g_out[1:] * g_out[1:] * w_in[1:]))
    d = g_in[1:] - g_out[1:]
    num -= float(np.sum((2.0 * q[1:] * d + tau * d * d) * qz[1:]))
    return num / (v[0] * w_in[0])


def mixed_bound_Y(
    state: SimState,
    weights: LyapunovWeights,
    cfg: ValidatedConfig,
    t_k=None,
    mode: CouplingMode = HARD,
) -> float:
    """Upper bound ``Y^k`` on ``(u_1^k)^2`` for a nonpositive step residual.

    For two processors with unit ``p, c, v`` and a nonempty second queue
    this is

        f1^2 e^{-eta x_out1} + f2^2 e^{-eta x_out2} - mu2^2 e^{-eta x_in2}
          - (2 q2 (f1 - mu2) + tau (f1 - mu2)^2) e^{-eta~ t_k} e^{-eta~ tau}

    (``f_e`` the last-cell fluxes). More processors add one such queue
    term per queue; this generalization is checked by the residual
    monitor, not by a proof.
    """
    t_k = state.k * cfg.tau if t_k is None else t_k
    wa = weight_arrays(weights, cfg)
    _, g_in, g_out = boundary_fluxes(state, 0.0, cfg, mode)
    qz = wa.queue(t_k) * np.exp(-wa.qrate * cfg.tau)
    return mixed_bound(state.outflow, state.queues, g_in, g_out, cfg.network.v, wa.w_in, wa.w_out, qz, cfg.tau)


def mixed_control(
    state: SimState,
    weights: LyapunovWeights,
    cfg: ValidatedConfig,
    t_k=None,
    kappa=None,
    mode: CouplingMode = HARD,
) -> float:
    """Mixed law: linear while all queues ``e >= 2`` are empty, else ``sqrt(max(Y, 0))``."""
    if np.all(state.queues[1:] == 0.0):
        k = admissible_gain(weights, cfg) if kappa is None else kappa
        u = linear_control(k, float(state.outflow[-1]))
    else:
        u = math.sqrt(max(mixed_bound_Y(state, weights, cfg, t_k, mode), 0.0))
    return clamp_control(u, cfg.network.capacities[0])[0]


def control(law, state, weights, cfg, t_k=None, mode: CouplingMode = HARD) -> float:
    """Control value of ``law`` at ``state`` (before the step's clamp)."""
    t_k = state.k * cfg.tau if t_k is None else t_k
    if isinstance(law, OpenLoop):
        return float(law.values([t_k])[0])
    if isinstance(law, Linear):
        return linear_control(law.kappa, float(state.outflow[-1]))
    if isinstance(law, Mixed):
        return mixed_control(state, weights, cfg, t_k, resolved_kappa(law, weights, cfg), mode)
    raise TypeError(f"not a feedback law: {law!r}")


def continuous_bound_X(fout, q, mu, v, eta, eta_tilde, l, t, epsilon=1e-6) -> float:
    """Continuous-time bound ``X(t)`` on ``u_1(t)^2`` with smoothed queue outflow.

    Requires a common velocity; ``p_e = c_e = 1``. ``fout`` are the
    outflows ``f_e(t, l)``. A queue at exactly zero passes its inflow
    through, as in the unsmoothed rule.
    """
    v = np.broadcast_to(np.asarray(v, dtype=float), np.shape(fout))
    if not np.all(v == v[0]):
        raise AssumptionViolated("continuous bound needs equal velocities on all processors")
    vel = float(v[0])
    fout = np.asarray(fout, dtype=float)
    q = np.asarray(q, dtype=float)
    mu = np.asarray(mu, dtype=float)
    g = np.where(
        q[1:] > 0.0,
        np.minimum(q[1:] / epsilon, mu[1:]),
        np.minimum(fout[:-1], mu[1:]),
    )
    decay = math.exp(-eta_tilde * vel * t)
    X = float(np.sum(fout ** 2)) * math.exp(-eta * l)
    X -= float(np.sum(g ** 2))
    X -= 2.0 / vel * float(np.sum(q[1:] * fout[:-1])) * decay
    X += 2.0 / vel * float(np.sum(q[1:] * g)) * decay
    return X


def inflow_matrix(kappa: float, m: int = 2) -> np.ndarray:
    """Serial-line inflow matrix: ``g_in,1 = kappa f_m`` and ``g_in,e = f_{e-1}``."""
    G = np.zeros((m, m))
    G[0, m - 1] = kappa
    for e in range(1, m):
        G[e, e - 1] = 1.0
    return G


def semidefinite_check(G, weights: LyapunovWeights, cfg: ValidatedConfig, tol=1e-12):
    """Eigenvalues of ``G^T P_0 Lambda G - P_{N-1} Lambda`` and the NSD verdict.

    Returns ``(lam1, lam2, negative_semidefinite)``. For the serial matrix
    the product is diagonal and the eigenvalues are returned in diagonal
    order.
    """
    if cfg.m != 2:
        raise UnsupportedShape(f"semidefinite check is implemented for m=2, got m={cfg.m}")
    G = np.asarray(G, dtype=float)
    wa = weight_arrays(weights, cfg)
    v = cfg.network.v
    M = G.T @ np.diag(wa.w_in * v) @ G - np.diag(wa.w_out * v)
    if M[0, 1] == 0.0 and M[1, 0] == 0.0:
        lam = np.diag(M)
    else:
        lam = np.linalg.eigvalsh(0.5 * (M + M.T))
    lam1, lam2 = float(lam[0]), float(lam[1])
    return lam1, lam2, bool(lam1 <= tol and lam2 <= tol)
