"""One explicit time step of the coupled transport/queue system.

Flux inside each processor is advected with the left-sided upwind scheme;
queues in front of processors ``e >= 2`` are advanced with explicit Euler
and clamped at zero. All quantities of a step are computed from time-k
data only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRange, NonFiniteState
from .network import ValidatedConfig

DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True)
class CouplingMode:
    """Queue outflow rule: ``hard`` piecewise rule or ``smoothed`` min(mu, q/eps)."""

    kind: str = "hard"
    epsilon: float | None = None

    def __post_init__(self):
        if self.kind not in ("hard", "smoothed"):
            raise ValueError(f"unknown coupling kind {self.kind!r}")
        if self.kind == "smoothed":
            eps = DEFAULT_EPSILON if self.epsilon is None else float(self.epsilon)
            if not eps > 0:
                raise ValueError("smoothed coupling requires epsilon > 0")
            object.__setattr__(self, "epsilon", eps)

    @property
    def eps(self) -> float:
        """Kernel encoding: 0.0 means hard coupling."""
        return 0.0 if self.kind == "hard" else self.epsilon


HARD = CouplingMode("hard")


def smoothed(epsilon=DEFAULT_EPSILON) -> CouplingMode:
    return CouplingMode("smoothed", epsilon)


@dataclass(frozen=True)
class SimState:
    """Flux ``(m, N)``, queues ``(m,)`` and time index of one time level.

    ``ghost`` holds the inflow values ``f_{e,-1}`` once a step has set them.
    """

    flux: np.ndarray
    queues: np.ndarray
    k: int = 0
    ghost: np.ndarray | None = None

    @classmethod
    def constant(cls, cfg: ValidatedConfig, flux, queues=None):
        """State with per-processor constant flux."""
        flux = np.broadcast_to(np.asarray(flux, dtype=float), (cfg.m,))
        f = np.repeat(flux[:, None], cfg.N, axis=1)
        q = np.zeros(cfg.m) if queues is None else np.asarray(queues, dtype=float).copy()
        return cls(f, q, 0)

    @classmethod
    def zeros(cls, cfg: ValidatedConfig):
        return cls(np.zeros((cfg.m, cfg.N)), np.zeros(cfg.m), 0)

    @property
    def outflow(self) -> np.ndarray:
        """Last-cell fluxes ``f_{e,N-1}``."""
        return self.flux[:, -1]


@dataclass(frozen=True)
class StepReport:
    """Boundary data and clamp diagnostics of one step."""

    u: float
    ghost: np.ndarray
    g_in: np.ndarray
    g_out: np.ndarray
    queue_clamped: np.ndarray
    control_clamped: bool


# -- array helpers shared with the Python kernel ---------------------------

def queue_outflows(out, q, mu, eps=0.0):
    """``g_out`` for processors ``e >= 2`` (entry 0 left at 0).

    ``eps == 0`` selects the hard rule. With ``eps > 0`` a queue holding
    exactly zero still passes its inflow through (capped at mu).
    """
    g = np.zeros_like(q)
    passthru = np.minimum(out[:-1], mu[1:])
    if eps == 0.0:
        g[1:] = np.where(q[1:] > 0.0, mu[1:], passthru)
    else:
        g[1:] = np.where(q[1:] > 0.0, np.minimum(mu[1:], q[1:] / eps), passthru)
    return g


def upwind(f, ghost, ratio):
    """Left-sided upwind update of an ``(m, N)`` flux array.

    Written as the convex combination ``(1 - r) f_j + r f_{j-1}`` so that
    ``r = 1`` is an exact shift.
    """
    left = np.empty_like(f)
    left[:, 0] = ghost
    left[:, 1:] = f[:, :-1]
    r = ratio[:, None]
    return (1.0 - r) * f + r * left


def queue_update(q, g_in, g_out, tau):
    """Explicit Euler for the queues, clamped at zero.

    Returns the new queues and a boolean mask of clamped entries.
    """
    qn = q + tau * (g_in - g_out)
    clamped = qn < 0.0
    return np.where(clamped, 0.0, qn), clamped


# -- public operations -----------------------------------------------------

def coupling_outflow(state: SimState, e: int, cfg: ValidatedConfig, mode: CouplingMode = HARD) -> float:
    """Outflow of queue ``e`` (1-based, ``e >= 2``) into its processor."""
    if not 2 <= e <= cfg.m:
        raise IndexOutOfRange(
            f"coupling is defined for e in 2..{cfg.m}; processor 1 is fed by the control"
        )
    upstream = float(state.flux[e - 2, -1])
    q = float(state.queues[e - 1])
    mu = cfg.network.capacities[e - 1]
    if q > 0.0:
        return mu if mode.kind == "hard" else min(mu, q / mode.epsilon)
    return min(upstream, mu)


def boundary_fluxes(state: SimState, u: float, cfg: ValidatedConfig, mode: CouplingMode = HARD):
    """Ghost values, ``g_in`` and ``g_out`` for a step with control ``u``."""
    out = state.outflow
    g_out = queue_outflows(out, state.queues, cfg.network.mu, mode.eps)
    g_out[0] = u
    g_in = np.empty(cfg.m)
    g_in[0] = u
    g_in[1:] = out[:-1]
    return g_out.copy(), g_in, g_out


def upwind_step(state: SimState, cfg: ValidatedConfig) -> np.ndarray:
    """New interior flux from ``state.flux`` and the already-set ghost cells."""
    if state.ghost is None:
        raise ValueError("ghost cells must be set before the upwind update")
    return upwind(state.flux, np.asarray(state.ghost, dtype=float), cfg.ratios)


def queue_step(queues, g_in, g_out, tau):
    """``max(0, q + tau*(g_in - g_out))`` plus the clamp mask."""
    return queue_update(
        np.asarray(queues, dtype=float),
        np.asarray(g_in, dtype=float),
        np.asarray(g_out, dtype=float),
        float(tau),
    )


def clamp_control(u, mu1):
    """Clamp the control to ``[0, mu_1]``; returns ``(u, clamped)``."""
    if u < 0.0:
        return 0.0, True
    if u > mu1:
        return float(mu1), True
    return float(u), False


def step(state: SimState, u: float, cfg: ValidatedConfig, mode: CouplingMode = HARD):
    """Advance ``state`` by one time step under control ``u``.

    Returns ``(next_state, report)``. The report's ``ghost`` is the inflow
    row used for this step.
    """
    u, u_clamped = clamp_control(float(u), cfg.network.capacities[0])
    ghost, g_in, g_out = boundary_fluxes(state, u, cfg, mode)
    f_new = upwind(state.flux, ghost, cfg.ratios)
    q_new, q_clamped = queue_update(state.queues, g_in, g_out, cfg.tau)
    check_finite(f_new, q_new, state.k + 1)
    report = StepReport(u, ghost, g_in, g_out, q_clamped, u_clamped)
    return SimState(f_new, q_new, state.k + 1), report


def check_finite(f, q, k):
    if np.isfinite(f).all() and np.isfinite(q).all():
        return
    bad = np.argwhere(~np.isfinite(f))
    if len(bad):
        e, j = bad[0]
        raise NonFiniteState(int(e) + 1, int(j), k)
    e = int(np.argwhere(~np.isfinite(q))[0][0])
    raise NonFiniteState(e + 1, None, k)


def total_mass(state: SimState, cfg: ValidatedConfig) -> float:
    """Products in processors (``sum h*f/v``) plus all queue loads."""
    return float((state.flux.sum(axis=1) * cfg.h / cfg.network.v).sum() + state.queues.sum())

