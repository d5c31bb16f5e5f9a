"""Admissible environment sampling and situation assessment.

Samplers are split into a pure transform from uniform variates (vectorisable,
used by the batch simulator) and thin wrappers around a seeded stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from safectl.controller import VC_MODELS, SafetyConstraint, admissible, check_model
from safectl.kinematics import VehicleState
from safectl.threat import SystemParams, msd_conservative

DEFAULT_BOUNDARY_PROB = 0.25
VC_HEADROOM = 5.0
GAP_HEADROOM = 10.0


@dataclass(frozen=True)
class LeadObject:
    x_l: float
    v_l: float

    def __post_init__(self):
        if not math.isfinite(self.x_l):
            raise ValueError("lead position must be finite")
        if not self.v_l >= 0:
            raise ValueError("lead velocity must be >= 0")


@dataclass(frozen=True)
class SituationParams:
    d: float = 0.0
    B: float = 1.0

    def __post_init__(self):
        if not self.d >= 0:
            raise ValueError("standstill separation d must be >= 0")
        if not self.B > 0:
            raise ValueError("lead braking bound B must be > 0")


def sa_naive(lead: LeadObject, sp: SituationParams) -> float:
    return lead.x_l + sp.d


def sa_braking_lead(lead: LeadObject, sp: SituationParams) -> float:
    """Critical position behind a lead that brakes with at least ``B``."""
    return lead.x_l + lead.v_l * lead.v_l / (2 * sp.B) + sp.d


class EnvStream:
    """Seeded per-episode randomness with the nominal draw counter."""

    def __init__(self, seed=None, rng: np.random.Generator | None = None):
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self.nominal_draws = 0


def nominal_from_uniform(u, k: int, p: SystemParams):
    """Draw ``k`` of a stream: the two bounds first, then uniform in between."""
    lo, hi = -p.a_n_min, p.a_n_max
    if k < 2:
        bound = lo if k == 0 else hi
        return u * 0 + bound
    value = lo + u * (hi - lo)
    # guard against rounding one ulp past hi
    return np.minimum(value, hi) if isinstance(value, np.ndarray) else min(value, hi)


def sample_nominal(p: SystemParams, source: EnvStream) -> float:
    k = source.nominal_draws
    source.nominal_draws += 1
    return float(nominal_from_uniform(source.rng.random(), k, p))


def gap_bound(model, v, v_c, p: SystemParams):
    """Smallest admissible ``x_c - x`` (float approximation of msd(0))."""
    if model in VC_MODELS:
        return (v * v - v_c * v_c) / (2 * p.a_s_min)
    return v * v / (2 * p.a_s_min)


def repair_upward(model, x, v, x_c, v_c, p: SystemParams):
    """Raise ``x_c`` by a few ulps until the exact env test holds.

    The float bound can round just below the true one. Steps start at the ulp
    of the largest magnitude involved and double, so this ends quickly even
    when ``x_c`` is near zero and its own ulp is tiny.
    """
    scalar = not isinstance(x_c, np.ndarray)
    x, v, v_c = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x, v, v_c)))
    x_c = np.array(x_c, dtype=float, ndmin=1).copy()
    x, v, v_c = (np.array(a, ndmin=1) for a in (x, v, v_c))
    bad = np.nonzero(~np.asarray(admissible(model, x, v, x_c, v_c, p), dtype=bool))[0]
    if bad.size:
        scale = np.maximum(np.maximum(np.abs(x), np.abs(x_c)), v * v / p.a_s_min)
        step = np.spacing(scale)
        while bad.size:
            x_c[bad] = x_c[bad] + step[bad]
            step[bad] *= 2
            ok = np.asarray(admissible(model, x[bad], v[bad], x_c[bad], v_c[bad], p), dtype=bool)
            bad = bad[~ok]
    return float(x_c[0]) if scalar else x_c


def constraint_from_uniform(model, x, v, p: SystemParams, u_boundary, u_gap, u_vc,
                            boundary_prob=DEFAULT_BOUNDARY_PROB):
    """Map three uniforms to an admissible ``(x_c, v_c)``; arrays allowed."""
    check_model(model)
    if model in VC_MODELS:
        v_c = u_vc * (v + p.a_n_max * p.T + VC_HEADROOM)
    else:
        v_c = v * 0.0
    bound = gap_bound(model, v, v_c, p)
    span = 4 * msd_conservative(v, p.T, p) + GAP_HEADROOM
    on_boundary = u_boundary < boundary_prob
    if isinstance(on_boundary, np.ndarray):
        gap = np.where(on_boundary, bound, bound + u_gap * span)
    else:
        gap = bound if on_boundary else bound + u_gap * span
    x_c = repair_upward(model, x, v, x + gap, v_c, p)
    return x_c, v_c


def sample_constraint(state: VehicleState, p: SystemParams, model: str, source: EnvStream,
                      boundary_prob: float = DEFAULT_BOUNDARY_PROB) -> SafetyConstraint:
    u = source.rng.random(3)
    x_c, v_c = constraint_from_uniform(model, state.x, state.v, p, u[0], u[1], u[2], boundary_prob)
    return SafetyConstraint(float(x_c), float(v_c))


def env_test(model, state: VehicleState, c: SafetyConstraint, p: SystemParams) -> bool:
    return bool(admissible(model, state.x, state.v, c.x_c, c.v_c, p))
