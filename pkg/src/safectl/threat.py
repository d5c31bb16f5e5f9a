"""Threat metrics: minimal safe distances and required accelerations.

All metric functions are written once over plain arithmetic, so they accept
floats, :class:`~fractions.Fraction` values or numpy arrays (elementwise).
Two sentinels stand in for partial results:

* ``INFEASIBLE`` (``-inf``): no finite braking meets the constraint;
* ``INFINITE`` (``+inf``): a distance threshold that is never met.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from safectl.numeric import both, either, select

INFEASIBLE = -math.inf
INFINITE = math.inf

AREQ_VARIANTS = ("as-written", "sign-corrected")


class ParameterContractError(ValueError):
    pass


@dataclass(frozen=True)
class SystemParams:
    a_n_max: float
    a_n_min: float
    a_s_min: float
    T: float

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in ("a_n_max", "a_n_min", "a_s_min", "T"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterContractError(f"{name} must be finite and > 0, got {value!r}")

    def require_braking_margin(self):
        """Required-acceleration contexts need ``a_n_min < a_s_min``."""
        if not self.a_n_min < self.a_s_min:
            raise ParameterContractError(
                f"a_n_min ({self.a_n_min}) must be below a_s_min ({self.a_s_min})")


def _check_variant(variant):
    if variant not in AREQ_VARIANTS:
        raise ValueError(f"unknown threshold variant {variant!r}; expected one of {AREQ_VARIANTS}")


def msd_conservative(v, t, p: SystemParams):
    return msd_conservative_vc(v, v * 0, t, p)


def msd_conservative_vc(v, v_c, t, p: SystemParams):
    a = p.a_n_max
    w = v + a * t
    return v * t + a * t * t / 2 + (w * w - v_c * v_c) / (2 * p.a_s_min)


def msd_permissive(v, a_n, t, p: SystemParams):
    return msd_permissive_vc(v, a_n, v * 0, t, p)


def msd_permissive_vc(v, a_n, v_c, t, p: SystemParams):
    w = v + a_n * t
    return select(
        w >= 0,
        lambda: v * t + a_n * t * t / 2 + (w * w - v_c * v_c) / (2 * p.a_s_min),
        lambda: -(v * v) / (2 * a_n),
    )


def msd_wrong(v, a_n, t, p: SystemParams):
    """FAULTY, for study only: permissive distance without the case split.

    Once ``v + a_n*t`` goes negative this keeps extrapolating a reversing
    vehicle, under-estimates the stopping distance and admits unsafe requests.
    """
    w = v + a_n * t
    return v * t + a_n * t * t / 2 + w * w / (2 * p.a_s_min)


def a_req_zero(v, gap):
    """Constant acceleration that stops exactly within ``gap``.

    ``gap <= 0`` is infeasible for a moving vehicle and 0 for a stopped one.
    """
    return select(
        gap > 0,
        lambda: -(v * v) / (2 * gap),
        lambda: select(v > 0, lambda: v * 0 + INFEASIBLE, lambda: v * 0),
    )


def a_req_horizon(v, a_n, gap, p: SystemParams):
    T = p.T
    w = v + a_n * T
    rem = gap - v * T - a_n * T * T / 2

    def first():
        return select(
            rem > 0,
            lambda: -(w * w) / (2 * rem),
            # x_c is reached within the horizon: fine only if at rest when there
            lambda: select(either(w > 0, both(rem < 0, v > 0)),
                           lambda: v * 0 + INFEASIBLE, lambda: v * 0),
        )

    return select(w >= 0, first, lambda: a_req_zero(v, gap))


def a_threshold(v, a_n, p: SystemParams, variant: str = "as-written"):
    """Comparison threshold for the horizon required acceleration.

    The otherwise branch is ``-a_n`` as written; ``sign-corrected`` uses ``a_n``,
    which matches the permissive distance rearranged into the acceleration
    domain.
    """
    _check_variant(variant)
    w = v + a_n * p.T
    if variant == "as-written":
        return select(w >= 0, lambda: a_n * 0 - p.a_n_min, lambda: -a_n)
    return select(w >= 0, lambda: a_n * 0 - p.a_n_min, lambda: a_n)


def msd_areq(v, a_n, p: SystemParams, variant: str = "as-written"):
    """Gap at which the required-acceleration safe condition starts to hold."""
    _check_variant(variant)
    T = p.T
    w = v + a_n * T

    def otherwise():
        if variant == "as-written":
            return v * 0 + INFINITE
        return -(v * v) / (2 * a_n)

    return select(
        w >= 0,
        lambda: v * T + a_n * T * T / 2 + w * w / (2 * p.a_n_min),
        otherwise,
    )
