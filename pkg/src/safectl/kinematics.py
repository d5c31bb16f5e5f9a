"""Closed-form longitudinal motion under piecewise-constant acceleration.

The plant is ``x' = v, v' = a`` restricted to the evolution domain ``v >= 0``.
When braking would drive the velocity negative, evolution halts at the stop
event and the vehicle is held at rest.

The free functions accept floats, Fractions or numpy arrays so the batch
simulator and the exact rechecks share one implementation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from safectl.numeric import select

NEVER = math.inf


@dataclass(frozen=True)
class VehicleState:
    x: float
    v: float

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (math.isfinite(self.x) and math.isfinite(self.v)):
            raise ValueError(f"state must be finite, got x={self.x!r}, v={self.v!r}")
        if self.v < 0:
            raise ValueError(f"velocity must be non-negative, got {self.v!r}")


@dataclass(frozen=True)
class EvolveResult:
    state: VehicleState
    elapsed: float


def position_at(x0, v0, a, t):
    return x0 + v0 * t + a * t * t / 2


def velocity_at(v0, a, t):
    """Raw ``v0 + a*t``; may be negative, callers clamp."""
    return v0 + a * t


def stopping_time(v, a):
    """Time until ``v`` reaches zero under ``a``; :data:`NEVER` if it does not.

    ``v == 0`` with ``a < 0`` gives 0 (already at the domain boundary);
    ``v == 0`` with ``a == 0`` gives NEVER, since the flow stays inside the
    domain indefinitely.
    """
    return select(a < 0, lambda: -v / a, lambda: v * 0 + NEVER)


def _evolve_raw(x, v, a, dt):
    # shared by evolve() and the vectorised simulator; keep op order identical
    t_stop = stopping_time(v, a)
    stopped = t_stop <= dt
    elapsed = select(stopped, lambda: t_stop, lambda: dt + v * 0)
    x_new = select(stopped, lambda: x - v * v / (2 * a), lambda: position_at(x, v, a, dt))
    v_new = select(stopped, lambda: v * 0, lambda: _clamp0(velocity_at(v, a, dt)))
    return x_new, v_new, elapsed


def _clamp0(v):
    if isinstance(v, np.ndarray):
        return np.maximum(v, 0.0)
    return v if v > 0 else v * 0


def evolve(state: VehicleState, a: float, dt_max: float) -> EvolveResult:
    if dt_max < 0:
        raise ValueError("dt_max must be non-negative")
    x, v, elapsed = _evolve_raw(state.x, state.v, a, dt_max)
    return EvolveResult(VehicleState(float(x), float(v)), float(elapsed))


def crossing_time(state: VehicleState, a: float, x_c: float, horizon: float):
    """Earliest ``t`` in ``[0, min(horizon, stop)]`` with ``x(t) >= x_c``.

    Returns None when the critical position is not reached.
    """
    gap = x_c - state.x
    if gap <= 0:
        return 0.0
    v = state.v
    limit = min(horizon, stopping_time(v, a))
    disc = v * v + 2 * a * gap
    if disc < 0:
        return None
    denom = v + math.sqrt(disc)
    if denom <= 0:
        return None
    # 2*gap/(v + sqrt(disc)) is the smaller positive root for either sign of a
    t = 2 * gap / denom
    return t if t <= limit else None
