"""Safety Controller decisions for the five models plus the relaxed variant.

Every safe condition is a polynomial sign test once denominators are
cleared, e.g. ``x_c - x >= msd(T)`` becomes

    2*a_s*(x_c - x) - 2*a_s*v*T - a_s*a*T**2 - (v + a*T)**2 + v_c**2 >= 0.

We decide those signs exactly (see :mod:`safectl.exact`), so a state sitting
on the admissibility boundary is classified the same way the real-valued
model would classify it, and the scalar and batch code paths agree bit for
bit. The float metrics in :mod:`safectl.threat` are kept for reporting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from safectl import threat
from safectl.exact import exact_sign
from safectl.kinematics import VehicleState
from safectl.numeric import both, either
from safectl.threat import SystemParams

MODELS = ("m1", "m2", "m3", "m4", "m5", "m3-wrong")
VC_MODELS = ("m2", "m4")


class ContractViolation(ValueError):
    pass


@dataclass(frozen=True)
class SafetyConstraint:
    x_c: float
    v_c: float = 0.0

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.v_c >= 0:
            raise ValueError(f"critical velocity must be >= 0, got {self.v_c!r}")


@dataclass(frozen=True)
class ControlOutput:
    a_s: float
    intervened: bool
    infeasible: bool = False


def check_model(model: str) -> str:
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
    return model


def _nonneg(products):
    s = exact_sign(products)
    return s >= 0 if isinstance(s, np.ndarray) else bool(s >= 0)


def _is_zero(products):
    s = exact_sign(products)
    return s == 0 if isinstance(s, np.ndarray) else bool(s == 0)


def _horizon_velocity_nonneg(v, a_n, T):
    return _nonneg([[v], [a_n, T]])


def msd_condition(x, v, x_c, v_c, a, T, brake):
    """x_c - x >= v*T + a*T^2/2 + ((v + a*T)^2 - v_c^2)/(2*brake), decided exactly."""
    return _nonneg([
        [2 * brake, x_c], [-2 * brake, x], [-2 * brake, v, T], [-brake, a, T, T],
        [-v, v], [-2 * v, a, T], [-a, a, T, T], [v_c, v_c],
    ])


def _stopping_case(x, v, x_c, a_n):
    # x_c - x >= -v^2/(2 a_n) with a_n < 0
    return _nonneg([[-2 * a_n, x_c], [2 * a_n, x], [-v, v]])


def _where(cond, when_true, when_false):
    if isinstance(cond, np.ndarray):
        return np.where(cond, when_true, when_false)
    return when_true if cond else when_false


def safe_condition(model, x, v, x_c, v_c, a_n, p: SystemParams, variant="as-written"):
    """Exact truth value of the model's ``safe`` formula (elementwise on arrays)."""
    check_model(model)
    zero = v * 0
    if model in ("m1", "m2"):
        vc = v_c if model == "m2" else zero
        return msd_condition(x, v, x_c, vc, p.a_n_max, p.T, p.a_s_min)
    if model == "m3-wrong":
        return msd_condition(x, v, x_c, zero, a_n, p.T, p.a_s_min)
    first = _horizon_velocity_nonneg(v, a_n, p.T)
    if model in ("m3", "m4"):
        vc = v_c if model == "m4" else zero
        return _where(first, msd_condition(x, v, x_c, vc, a_n, p.T, p.a_s_min),
                      _stopping_case(x, v, x_c, a_n))
    # m5: a_req(T) >= a_th, with rem = gap - vT - a_n T^2/2 cleared by 2*a_n_min
    at_rest = both(_is_zero([[v]]), _is_zero([[v], [a_n, p.T]]))
    first_ok = either(msd_condition(x, v, x_c, zero, a_n, p.T, p.a_n_min), at_rest)
    if variant == "as-written":
        # threshold -a_n > 0 is above any required acceleration
        other_ok = zero != zero
    else:
        threat._check_variant(variant)
        other_ok = either(_stopping_case(x, v, x_c, a_n), _is_zero([[v]]))
    return _where(first, first_ok, other_ok)


def admissible(model, x, v, x_c, v_c, p: SystemParams):
    """The env test ``x_c - x >= msd(0)`` (or its acceleration form), exactly.

    This is also the loop invariant of every model.
    """
    check_model(model)
    b = p.a_s_min
    if model in VC_MODELS:
        return both(v_c >= 0, _nonneg([[2 * b, x_c], [-2 * b, x], [-v, v], [v_c, v_c]]))
    base = _nonneg([[2 * b, x_c], [-2 * b, x], [-v, v]])
    if model == "m5":
        # a_req(0) >= -a_s_min also holds at rest beyond x_c
        return either(base, _is_zero([[v]]))
    return base


def _check_request(a_n, p):
    if not -p.a_n_min <= a_n <= p.a_n_max:
        raise ContractViolation(f"nominal request {a_n!r} outside [-{p.a_n_min}, {p.a_n_max}]")


def _decide(model, state, a_n, c, p, variant="as-written") -> ControlOutput:
    _check_request(a_n, p)
    if model not in VC_MODELS and c.v_c != 0:
        raise ContractViolation(f"model {model} expects v_c = 0, got {c.v_c!r}")
    if safe_condition(model, state.x, state.v, c.x_c, c.v_c, a_n, p, variant):
        return ControlOutput(a_n, False)
    infeasible = False
    if model == "m5":
        a_req = threat.a_req_horizon(state.v, a_n, c.x_c - state.x, p)
        infeasible = a_req == threat.INFEASIBLE
    return ControlOutput(-p.a_s_min, True, infeasible)


def ctrl_m1(state: VehicleState, a_n: float, c: SafetyConstraint, p: SystemParams) -> ControlOutput:
    return _decide("m1", state, a_n, c, p)


def ctrl_m2(state: VehicleState, a_n: float, c: SafetyConstraint, p: SystemParams) -> ControlOutput:
    return _decide("m2", state, a_n, c, p)


def ctrl_m3(state: VehicleState, a_n: float, c: SafetyConstraint, p: SystemParams) -> ControlOutput:
    return _decide("m3", state, a_n, c, p)


def ctrl_m4(state: VehicleState, a_n: float, c: SafetyConstraint, p: SystemParams) -> ControlOutput:
    return _decide("m4", state, a_n, c, p)


def ctrl_m3_wrong(state: VehicleState, a_n: float, c: SafetyConstraint, p: SystemParams) -> ControlOutput:
    """FAULTY, for study only: decides with :func:`safectl.threat.msd_wrong`."""
    return _decide("m3-wrong", state, a_n, c, p)


def ctrl_m5(state: VehicleState, a_n: float, c: SafetyConstraint, p: SystemParams,
            variant: str = "as-written") -> ControlOutput:
    p.require_braking_margin()
    return _decide("m5", state, a_n, c, p, variant)


CONTROLLERS = {
    "m1": ctrl_m1, "m2": ctrl_m2, "m3": ctrl_m3, "m4": ctrl_m4,
    "m5": ctrl_m5, "m3-wrong": ctrl_m3_wrong,
}


def control(model, state, a_n, c, p, variant="as-written") -> ControlOutput:
    if check_model(model) == "m5":
        return ctrl_m5(state, a_n, c, p, variant)
    return CONTROLLERS[model](state, a_n, c, p)


def decide_batch(model, x, v, x_c, v_c, a_n, p, variant="as-written"):
    """Vectorised ``(a_s, intervened)`` for arrays of inputs."""
    if model == "m5":
        p.require_braking_margin()
    safe = np.asarray(safe_condition(model, x, v, x_c, v_c, a_n, p, variant), dtype=bool)
    a_s = np.where(safe, a_n, -p.a_s_min)
    return a_s, ~safe


Chooser = Callable[[float, float], float]


def brake_hardest(lo: float, hi: float) -> float:
    return lo


def brake_gentlest(lo: float, hi: float) -> float:
    return hi


def ctrl_relaxed(state: VehicleState, a_n: float, c: SafetyConstraint, p: SystemParams,
                 chooser: Chooser = brake_hardest, model: str = "m1") -> ControlOutput:
    """Intervene with any deceleration between ``-a_s_min`` and ``a_req(0)``.

    The safe branch is the chosen model's. When even full braking falls short
    of ``a_req(0)`` the interval is empty and we force ``-a_s_min``, flagged
    infeasible.
    """
    out = control(model, state, a_n, c, p)
    if not out.intervened:
        return out
    lo = -p.a_s_min
    hi = threat.a_req_zero(state.v, c.x_c - state.x)
    if hi < lo:
        return ControlOutput(lo, True, True)
    a_s = chooser(lo, hi)
    if not lo <= a_s <= hi:
        raise ContractViolation(f"chooser returned {a_s!r} outside [{lo}, {hi}]")
    return ControlOutput(a_s, True)
