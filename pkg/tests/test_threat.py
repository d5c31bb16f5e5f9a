import math
from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import maneuver, smallest_gap, stopping_gap_for
from safectl import threat
from safectl.threat import (INFEASIBLE, INFINITE, ParameterContractError, SystemParams, a_req_horizon,
                            a_req_zero, a_threshold, msd_areq, msd_conservative, msd_conservative_vc,
                            msd_permissive, msd_permissive_vc, msd_wrong)

P = SystemParams(a_n_max=2, a_n_min=3, a_s_min=5, T=0.5)
P1 = SystemParams(a_n_max=2, a_n_min=3, a_s_min=5, T=1)

# frozen from the maneuver oracle (accelerate, then brake with fine steps)
MSD1 = 17.35
MSD1_STOP = 10.0
MSD2_VC5 = 14.85
MSD3 = 16.15
MSD3_BRAKE = 1 / 6
MSD4_VC5 = 13.65
MSD_WRONG = -0.1
AREQ_ZERO = -5.0
AREQ_H = -10 / 3
MSD5 = 23.5


def test_oracle_reproduces_frozen_values():
    assert maneuver(10, 2, 0.5, 5) == pytest.approx(MSD1, abs=1e-6)
    assert maneuver(10, 0, 0, 5) == pytest.approx(MSD1_STOP, abs=1e-6)
    assert maneuver(10, 2, 0.5, 5, 5) == pytest.approx(MSD2_VC5, abs=1e-6)
    assert maneuver(10, 1, 0.5, 5) == pytest.approx(MSD3, abs=1e-6)
    assert maneuver(1, -3, 1, 5) == pytest.approx(MSD3_BRAKE, abs=1e-6)
    assert maneuver(10, 1, 0.5, 5, 5) == pytest.approx(MSD4_VC5, abs=1e-6)
    # a constant -5 stops from 10 in exactly 10 m
    assert stopping_gap_for(10, 5) == pytest.approx(10, abs=1e-6)
    # after 0.5 s at 10 m/s, 15 m remain; braking over 15 m needs 10/3
    assert stopping_gap_for(10, 10 / 3) == pytest.approx(15, abs=1e-6)


def test_msd_conservative_examples():
    assert msd_conservative(0, 0, P) == 0
    assert msd_conservative(10, 0.5, P) == pytest.approx(MSD1, abs=1e-6)
    assert msd_conservative(10, 0, P) == pytest.approx(MSD1_STOP, abs=1e-6)


def test_msd_conservative_vc_examples():
    assert msd_conservative_vc(7, 7, 0, P) == 0
    assert msd_conservative_vc(10, 5, 0.5, P) == pytest.approx(MSD2_VC5, abs=1e-6)
    assert msd_conservative_vc(10, 0, 0.5, P) == msd_conservative(10, 0.5, P)


def test_msd_permissive_examples():
    assert msd_permissive(10, 1, 0.5, P) == pytest.approx(MSD3, abs=1e-6)
    assert msd_permissive(1, -3, 1, P1) == pytest.approx(MSD3_BRAKE, abs=1e-6)
    assert msd_permissive(0, 0, 0.5, P) == 0


def test_msd_permissive_vc_examples():
    assert msd_permissive_vc(10, 1, 0, 0.5, P) == msd_permissive(10, 1, 0.5, P)
    assert msd_permissive_vc(10, 0, 10, 0, P) == 0
    assert msd_permissive_vc(10, 1, 5, 0.5, P) == pytest.approx(MSD4_VC5, abs=1e-6)


def test_msd_wrong_examples():
    assert msd_wrong(1, -3, 1, P1) == pytest.approx(MSD_WRONG, abs=1e-12)
    # symbolic expansion: 1 - 3/2 + (1 - 3)^2 / 10
    exact = SimpleNamespace(a_s_min=Fraction(5))
    assert msd_wrong(Fraction(1), Fraction(-3), Fraction(1), exact) == Fraction(-1, 10)
    assert msd_wrong(10, 1, 0.5, P) == msd_permissive(10, 1, 0.5, P)
    assert msd_wrong(0, 0, 0, P) == 0


def test_a_req_zero_examples():
    assert a_req_zero(10, 10) == pytest.approx(AREQ_ZERO)
    assert a_req_zero(0, 5) == 0
    assert a_req_zero(10, 0) == INFEASIBLE
    assert a_req_zero(0, 0) == 0
    assert a_req_zero(10, -1) == INFEASIBLE


def test_a_req_horizon_examples():
    assert a_req_horizon(10, 0, 20, P) == pytest.approx(AREQ_H, abs=1e-12)
    for gap in (0.05, 0.1, 2.0):
        assert a_req_horizon(1, -3, gap, P1) == pytest.approx(-1 / (2 * gap))
    assert a_req_horizon(0, 0, 5, P) == 0


def test_a_req_horizon_degenerate_denominator():
    # the horizon move alone already reaches x_c while still moving
    assert a_req_horizon(10, 0, 5, P) == INFEASIBLE
    # exactly at rest on reaching x_c needs no further braking
    assert a_req_horizon(3, -3, 1.5, P1) == 0


def test_a_threshold_examples():
    assert a_threshold(10, 1, P) == -3
    assert a_threshold(1, -3, P1) == 3
    assert a_threshold(0, 0, P) == -3
    assert a_threshold(1, -3, P1, "sign-corrected") == -3
    with pytest.raises(ValueError):
        a_threshold(1, 1, P, "bogus")


def test_msd_areq_examples():
    assert msd_areq(10, 1, P) == pytest.approx(MSD5, abs=1e-9)
    assert msd_areq(0, 0, P) == 0
    assert msd_areq(1, -3, P1) == INFINITE
    assert msd_areq(1, -3, P1, "sign-corrected") == pytest.approx(1 / 6)


def test_msd_areq_matches_gap_bisection():
    def safe(gap):
        return a_req_horizon(10.0, 1.0, gap, P) >= a_threshold(10.0, 1.0, P)

    assert smallest_gap(safe, 0.0, 100.0) == pytest.approx(MSD5, abs=1e-6)


def test_msd_areq_otherwise_never_safe():
    for gap in np.geomspace(1e-6, 1e6, 200):
        assert not a_req_horizon(1.0, -3.0, gap, P1) >= a_threshold(1.0, -3.0, P1)


def test_params_contract():
    with pytest.raises(ParameterContractError):
        SystemParams(0, 1, 1, 1)
    with pytest.raises(ParameterContractError):
        SystemParams(1, 1, 1, math.inf)
    with pytest.raises(ParameterContractError):
        SystemParams(1, 5, 5, 1).require_braking_margin()


vs = st.floats(0, 40)
ans = st.floats(-3, 2)


@given(vs, ans)
def test_case_split_agreement(v, a_n):
    # above the split the faulty metric equals the permissive one
    if v + a_n * P.T >= 0:
        assert msd_wrong(v, a_n, P.T, P) == msd_permissive(v, a_n, P.T, P)


@given(vs, ans)
def test_conservative_dominates_permissive(v, a_n):
    assert msd_conservative(v, P.T, P) - msd_permissive(v, a_n, P.T, P) >= -1e-9


@given(vs, st.floats(0, 2))
def test_monotone_in_speed(v, dv):
    assert msd_conservative(v + dv, P.T, P) >= msd_conservative(v, P.T, P)


@given(vs, ans)
def test_array_and_scalar_agree(v, a_n):
    arr = msd_permissive(np.array([v]), np.array([a_n]), P.T, P)[0]
    assert arr == msd_permissive(v, a_n, P.T, P)
    arr = msd_areq(np.array([v]), np.array([a_n]), P)[0]
    assert arr == msd_areq(v, a_n, P)


@given(vs, st.floats(-2.9, 2), st.floats(0.01, 100))
def test_areq_consistent_with_msd_areq(v, a_n, gap):
    # a_req(T) >= a_th exactly when gap >= msd_areq, away from the boundary
    m = msd_areq(v, a_n, P)
    if not math.isfinite(m) or abs(gap - m) < 1e-6:
        return
    ok = a_req_horizon(v, a_n, gap, P) >= a_threshold(v, a_n, P)
    assert ok == (gap > m)


def test_fraction_evaluation():
    exact = SimpleNamespace(a_n_max=Fraction(2), a_s_min=Fraction(5))
    q = threat.msd_conservative(Fraction(10), Fraction(1, 2), exact)
    assert q == Fraction(347, 20)
