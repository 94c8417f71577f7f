"""Trajectory simulation on top of the compiled or pure-Python kernel.

The compiled kernel (``prodstab._ckernel``) is used when it was built;
otherwise, or when ``PRODSTAB_BACKEND=python`` is set, the numpy kernel
runs the same loop.
"""
from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _pykernel
from .discretization import HARD, CouplingMode, SimState
from .errors import NonFiniteState
from .feedback import OpenLoop, check_gain, resolved_kappa
from .lyapunov import (
    LyapunovWeights,
    decay_rate,
    residual_tolerance,
    upper_bound,
    weight_arrays,
)
from .network import ValidatedConfig

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

BACKENDS = ("compiled", "python")


def available_backends():
    return BACKENDS if _ckernel is not None else ("python",)


def default_backend():
    forced = os.environ.get("PRODSTAB_BACKEND", "").strip().lower()
    if forced:
        if forced not in BACKENDS:
            raise ValueError(f"PRODSTAB_BACKEND must be one of {BACKENDS}, got {forced!r}")
        if forced == "compiled" and _ckernel is None:
            raise RuntimeError("compiled kernel requested but prodstab._ckernel is not built")
        return forced
    return "compiled" if _ckernel is not None else "python"


def _kernel(backend):
    backend = default_backend() if backend in (None, "auto") else backend
    if backend == "compiled":
        if _ckernel is None:
            raise RuntimeError("compiled kernel is not available; rebuild the package or use backend='python'")
        return backend, _ckernel.run_loop
    if backend == "python":
        return backend, _pykernel.run_loop
    raise ValueError(f"unknown backend {backend!r}")


@dataclass
class Trajectory:
    """Full time series of one run.

    Arrays indexed by ``k`` have ``K`` entries (``V``, ``queues``,
    ``outflow``); per-step arrays (``u``, ``residual``...) have ``K - 1``.
    """

    config: ValidatedConfig
    weights: LyapunovWeights
    law: object
    kappa: float
    backend: str
    t: np.ndarray
    V: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    V_up: np.ndarray
    nu: float
    u: np.ndarray
    residual: np.ndarray
    S2: np.ndarray
    Z2: np.ndarray
    queues: np.ndarray
    outflow: np.ndarray
    queue_clamped: np.ndarray
    control_clamped: np.ndarray
    final: SimState = field(repr=False)

    @property
    def passed(self) -> np.ndarray:
        """Per-step verdict ``S2 + Z2 <= 1e-10 * max(1, V^k)``."""
        return self.residual <= residual_tolerance(self.V[:-1])

    def first_failure(self):
        """Index of the first step whose residual verdict fails, or ``None``."""
        bad = np.flatnonzero(~self.passed)
        return int(bad[0]) if len(bad) else None

    def clamp_events(self):
        """``(k, e)`` pairs (``e`` 1-based) where a queue was clamped at zero."""
        return [(int(k), int(e) + 1) for k, e in np.argwhere(self.queue_clamped)]

    def kink(self):
        """``(k*, increment)`` of the largest one-step increase of V (0 if monotone)."""
        dV = np.diff(self.V)
        if len(dV) == 0:
            return 0, 0.0
        k = int(np.argmax(dV))
        return k, max(float(dV[k]), 0.0)

    def excess_over_bound(self) -> float:
        """``max_k log(V^k / V_up^k)``, clipped at 0; how far V leaves its envelope."""
        mask = (self.V > 0) & (self.V_up > 0)
        if not mask.any():
            return 0.0
        return max(float(np.max(np.log(self.V[mask] / self.V_up[mask]))), 0.0)


def initial_state(cfg: ValidatedConfig, f0, q0) -> SimState:
    """State from per-processor constants or an ``(m, N)`` table."""
    f0 = np.asarray(f0, dtype=float)
    if f0.ndim <= 1:
        state = SimState.constant(cfg, f0, q0)
    else:
        if f0.shape != (cfg.m, cfg.N):
            raise ValueError(f"initial flux table must have shape {(cfg.m, cfg.N)}, got {f0.shape}")
        state = SimState(f0.copy(), np.asarray(q0, dtype=float).copy(), 0)
    if state.queues.shape != (cfg.m,):
        raise ValueError(f"need {cfg.m} initial queue values")
    if np.any(state.queues < 0):
        raise ValueError("initial queues must be nonnegative")
    if state.queues[0] != 0.0:
        raise ValueError("the first queue must start empty; processor 1 is fed directly by the control")
    return state


def simulate(
    cfg: ValidatedConfig,
    weights: LyapunovWeights,
    law,
    f0,
    q0=None,
    mode: CouplingMode = HARD,
    backend=None,
) -> Trajectory:
    """Run the closed (or open) loop for ``K - 1`` steps.

    Deterministic for fixed inputs and backend. Raises
    :class:`NonFiniteState` with the offending ``(e, j, k)``.
    """
    q0 = np.zeros(cfg.m) if q0 is None else q0
    state = initial_state(cfg, f0, q0)
    if np.any(state.flux > cfg.network.mu[:, None]):
        warnings.warn("initial flux exceeds capacity on some processor", stacklevel=2)
    check_gain(law, weights, cfg)
    backend, run_loop = _kernel(backend)

    K, m = cfg.K, cfg.m
    wa = weight_arrays(weights, cfg)
    kappa = resolved_kappa(law, weights, cfg)
    times = cfg.times()
    u_open = law.values(times[:-1]) if isinstance(law, OpenLoop) else np.zeros(max(K - 1, 0))

    f = np.ascontiguousarray(state.flux, dtype=float).copy()
    q = state.queues.astype(float).copy()
    V, V1, V2 = np.zeros(K), np.zeros(K), np.zeros(K)
    u, res, S2, Z2 = (np.zeros(K - 1) for _ in range(4))
    qs, fout = np.zeros((K, m)), np.zeros((K, m))
    qclamp = np.zeros((K - 1, m), dtype=np.int8)
    uclamp = np.zeros(K - 1, dtype=np.int8)

    status, k_bad, e_bad, j_bad = run_loop(
        f, q, cfg.network.v, cfg.network.mu, np.ascontiguousarray(cfg.ratios), cfg.tau, K,
        np.ascontiguousarray(wa.cell), wa.c, wa.qrate, wa.w_in, wa.w_out,
        law.code, kappa, np.ascontiguousarray(u_open, dtype=float), mode.eps,
        V, V1, V2, u, res, S2, Z2, qs, fout, qclamp, uclamp,
    )
    if status != _pykernel.OK:
        raise NonFiniteState(e_bad + 1, None if j_bad < 0 else j_bad, k_bad)

    nu = decay_rate(cfg, weights).nu
    return Trajectory(
        config=cfg, weights=weights, law=law, kappa=kappa, backend=backend,
        t=times, V=V, V1=V1, V2=V2, V_up=upper_bound(V[0], nu, cfg.tau, np.arange(K)), nu=nu,
        u=u, residual=res, S2=S2, Z2=Z2, queues=qs, outflow=fout,
        queue_clamped=qclamp.astype(bool), control_clamped=uclamp.astype(bool),
        final=SimState(f, q, K - 1),
    )
