"""Serial production line, discretization grid and spatial coordinates.

Processors are numbered ``e = 1..m`` in the public API (as in the model
description) and stored 0-based in arrays. Cell ``j`` of processor ``e``
has its center at ``(e-1)*l + (j+1/2)*h``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CflViolation,
    GridMismatch,
    IndexOutOfRange,
    NonPositiveParameter,
    ValidationError,
)

#: Boundary-coordinate conventions used by the residual and the mixed law.
#: ``interface``: x_in = (e-1)l, x_out = e*l (global interfaces).
#: ``center``: x_in / x_out are the first / last global cell centers.
#: ``local``: every processor is measured on its own [0, l].
COORDINATE_CONVENTIONS = ("interface", "center", "local")

# fp slack for "integer" checks such as l/h and T/tau
_INT_RTOL = 1e-9


def _as_tuple(values, m=None):
    if np.isscalar(values):
        if m is None:
            raise TypeError("scalar given where a sequence is required")
        return (float(values),) * m
    return tuple(float(x) for x in values)


@dataclass(frozen=True)
class NetworkSpec:
    """Serial line of ``m`` processors of uniform length ``l``."""

    velocities: tuple
    capacities: tuple
    length: float

    def __post_init__(self):
        object.__setattr__(self, "velocities", _as_tuple(self.velocities))
        object.__setattr__(self, "capacities", _as_tuple(self.capacities))
        object.__setattr__(self, "length", float(self.length))
        if len(self.velocities) != len(self.capacities):
            raise ValueError("velocities and capacities must have the same length")

    @property
    def m(self) -> int:
        return len(self.velocities)

    @property
    def v(self) -> np.ndarray:
        return np.array(self.velocities)

    @property
    def mu(self) -> np.ndarray:
        return np.array(self.capacities)


@dataclass(frozen=True)
class GridSpec:
    """Uniform space step ``h``, time step ``tau`` and horizon ``T``."""

    h: float
    tau: float
    T: float

    @classmethod
    def from_cfl(cls, h, cfl, vmax, T):
        """Grid whose time step gives ``max_e(v_e) * tau / h == cfl``.

        ``tau`` is nudged down by ulps if rounding would push the ratio
        above ``cfl``.
        """
        tau = cfl * h / vmax
        while vmax * tau / h > cfl:
            tau = float(np.nextafter(tau, 0.0))
        return cls(h=float(h), tau=tau, T=float(T))


def _integer_ratio(num, den):
    r = num / den
    n = round(r)
    if n < 1 or abs(r - n) > _INT_RTOL * max(1.0, abs(r)):
        return None
    return int(n)


@dataclass(frozen=True)
class ValidatedConfig:
    """Network + grid that passed :func:`validate_network`.

    ``N`` (cells per processor) and ``K`` (number of time levels, so that
    ``(K-1)*tau == T``) are derived here.
    """

    network: NetworkSpec
    grid: GridSpec
    N: int
    K: int
    coords: str = "interface"

    @property
    def m(self):
        return self.network.m

    @property
    def h(self):
        return self.grid.h

    @property
    def tau(self):
        return self.grid.tau

    @property
    def length(self):
        return self.network.length

    @property
    def cfl(self) -> float:
        return max(self.network.velocities) * self.grid.tau / self.grid.h

    @property
    def ratios(self) -> np.ndarray:
        """Per-processor Courant numbers ``v_e * tau / h``."""
        return self.network.v * self.grid.tau / self.grid.h

    def times(self) -> np.ndarray:
        return np.arange(self.K) * self.grid.tau

    def with_coords(self, coords) -> "ValidatedConfig":
        return validate_network(self.network, self.grid, coords=coords)


def validate_network(spec: NetworkSpec, grid: GridSpec, coords="interface") -> ValidatedConfig:
    """Check positivity, grid divisibility and the CFL condition.

    Every violation is collected. The raised exception is an instance of
    the first violation's class and carries all of them in ``violations``.
    """
    violations = []
    if spec.m < 1:
        violations.append(ValidationError("network needs at least one processor"))
    for e, ve in enumerate(spec.velocities, start=1):
        if not ve > 0 or not math.isfinite(ve):
            violations.append(NonPositiveParameter(f"v_{e}", ve))
    for e, me in enumerate(spec.capacities, start=1):
        if not me > 0 or not math.isfinite(me):
            violations.append(NonPositiveParameter(f"mu_{e}", me))
    for name, val in (("l", spec.length), ("h", grid.h), ("tau", grid.tau)):
        if not val > 0 or not math.isfinite(val):
            violations.append(NonPositiveParameter(name, val))
    if not grid.T >= 0 or not math.isfinite(grid.T):
        violations.append(ValidationError(f"horizon T must be >= 0, got {grid.T!r}"))
    if coords not in COORDINATE_CONVENTIONS:
        violations.append(
            ValidationError(f"unknown coordinate convention {coords!r}; use one of {COORDINATE_CONVENTIONS}")
        )

    N = K = None
    if not violations:
        N = _integer_ratio(spec.length, grid.h)
        if N is None:
            violations.append(GridMismatch(spec.length, grid.h))
        if grid.T == 0:
            K = 1
        else:
            steps = _integer_ratio(grid.T, grid.tau)
            if steps is None:
                violations.append(
                    ValidationError(f"horizon T={grid.T!r} is not an integer multiple of tau={grid.tau!r}")
                )
            else:
                K = steps + 1
        ratio = max(spec.velocities) * grid.tau / grid.h
        if ratio > 1.0:
            violations.append(CflViolation(ratio))

    if violations:
        first = violations[0]
        if len(violations) > 1:
            first.args = ("; ".join(str(v) for v in violations),)
        first.violations = list(violations)
        raise first
    return ValidatedConfig(network=spec, grid=grid, N=N, K=K, coords=coords)


def cell_center(e: int, j: int, spec: NetworkSpec, grid: GridSpec | ValidatedConfig) -> float:
    """Global coordinate of cell ``j`` (0-based) on processor ``e`` (1-based)."""
    if isinstance(grid, ValidatedConfig):
        N, h = grid.N, grid.h
    else:
        h = grid.h
        N = _integer_ratio(spec.length, h)
        if N is None:
            raise GridMismatch(spec.length, h)
    if not 1 <= e <= spec.m:
        raise IndexOutOfRange(f"processor index e={e} outside 1..{spec.m}")
    if not 0 <= j <= N - 1:
        raise IndexOutOfRange(f"cell index j={j} outside 0..{N - 1}")
    return (e - 1) * spec.length + (j + 0.5) * h


def cell_centers(cfg: ValidatedConfig) -> np.ndarray:
    """All cell centers as an ``(m, N)`` array."""
    e = np.arange(cfg.m)[:, None]
    j = np.arange(cfg.N)[None, :]
    return e * cfg.length + (j + 0.5) * cfg.h


def boundary_coordinates(cfg: ValidatedConfig, coords=None):
    """Coordinates ``(x_in, x_out)`` used for the inflow and outflow terms."""
    coords = coords or cfg.coords
    e = np.arange(cfg.m, dtype=float)
    l, h, N = cfg.length, cfg.h, cfg.N
    if coords == "interface":
        return e * l, (e + 1) * l
    if coords == "center":
        return e * l + 0.5 * h, e * l + (N - 0.5) * h
    if coords == "local":
        return np.zeros(cfg.m), np.full(cfg.m, l)
    raise ValueError(f"unknown coordinate convention {coords!r}")
