import numpy as np
import pytest
from hypothesis import given, strategies as st

from safectl.controller import (ContractViolation, SafetyConstraint, admissible, brake_gentlest,
                                brake_hardest, control, ctrl_m1, ctrl_m2, ctrl_m3, ctrl_m3_wrong,
                                ctrl_m5, ctrl_relaxed, decide_batch, safe_condition)
from safectl.kinematics import VehicleState
from safectl.threat import SystemParams, msd_areq, msd_conservative, msd_permissive

P = SystemParams(a_n_max=2, a_n_min=3, a_s_min=5, T=0.5)
S10 = VehicleState(0, 10)
REST = VehicleState(0, 0)


def test_ctrl_m1_examples():
    out = ctrl_m1(S10, 2, SafetyConstraint(100), P)
    assert (out.a_s, out.intervened) == (2, False)
    out = ctrl_m1(S10, 2, SafetyConstraint(17), P)
    assert (out.a_s, out.intervened) == (-5, True)


def test_ctrl_m1_rest_at_critical_position_intervenes():
    # msd_1(T) assumes a_n_max for the horizon, so at rest on x_c it is positive
    assert msd_conservative(0, P.T, P) > 0
    out = ctrl_m1(REST, 0, SafetyConstraint(0), P)
    assert (out.a_s, out.intervened) == (-5, True)


@pytest.mark.xfail(strict=True, reason="published rest example ignores the a_n_max horizon term")
def test_ctrl_m1_rest_published_example():
    out = ctrl_m1(REST, 0, SafetyConstraint(0), P)
    assert (out.a_s, out.intervened) == (0, False)


def test_ctrl_m5_examples():
    out = ctrl_m5(S10, 1, SafetyConstraint(30), P)
    assert (out.a_s, out.intervened) == (1, False)
    out = ctrl_m5(S10, 1, SafetyConstraint(20), P)
    assert (out.a_s, out.intervened) == (-5, True)
    out = ctrl_m5(REST, 0, SafetyConstraint(1), P)
    assert (out.a_s, out.intervened) == (0, False)


def test_ctrl_m5_boundary_is_safe():
    # the threshold gap 23.5 is exactly representable, so the boundary is decided exactly
    assert msd_areq(10, 1, P) == 23.5
    assert not ctrl_m5(S10, 1, SafetyConstraint(23.5), P).intervened
    assert ctrl_m5(S10, 1, SafetyConstraint(np.nextafter(23.5, 0)), P).intervened


def test_ctrl_m5_variants_differ_in_otherwise_branch():
    p = SystemParams(2, 3, 5, 1)
    s = VehicleState(0, 1)
    c = SafetyConstraint(10)
    assert ctrl_m5(s, -3, c, p).intervened
    assert not ctrl_m5(s, -3, c, p, "sign-corrected").intervened


def test_ctrl_m5_requires_braking_margin():
    with pytest.raises(ValueError):
        ctrl_m5(S10, 1, SafetyConstraint(30), SystemParams(2, 5, 5, 0.5))


def test_m3_wrong_accepts_the_witness():
    p = SystemParams(2, 3, 5, 1)
    s = VehicleState(0, 1)
    c = SafetyConstraint(0.1)
    assert not ctrl_m3_wrong(s, -3, c, p).intervened
    assert ctrl_m3(s, -3, c, p).intervened


def test_m2_uses_critical_velocity():
    # msd_2 = 14.85 here; the float literal 14.85 is just below it
    assert ctrl_m2(S10, 2, SafetyConstraint(14.85, 5), P).intervened
    assert not ctrl_m2(S10, 2, SafetyConstraint(14.86, 5), P).intervened
    assert ctrl_m1(S10, 2, SafetyConstraint(14.86), P).intervened


def test_request_contract():
    with pytest.raises(ContractViolation):
        ctrl_m1(S10, 2.5, SafetyConstraint(100), P)
    with pytest.raises(ContractViolation):
        ctrl_m1(S10, 1, SafetyConstraint(100, 1), P)
    with pytest.raises(ValueError):
        control("m9", S10, 1, SafetyConstraint(100), P)


def test_relaxed_examples():
    p = SystemParams(2, 3, 6, 0.5)
    c = SafetyConstraint(10)
    assert ctrl_relaxed(S10, 2, c, p, brake_hardest).a_s == -6
    assert ctrl_relaxed(S10, 2, c, p, brake_gentlest).a_s == pytest.approx(-5)
    out = ctrl_relaxed(S10, 2, SafetyConstraint(5), p)
    assert (out.a_s, out.infeasible) == (-6, True)
    assert ctrl_relaxed(S10, 2, SafetyConstraint(100), p).a_s == 2
    with pytest.raises(ContractViolation):
        ctrl_relaxed(S10, 2, c, p, lambda lo, hi: 0.0)


states = st.tuples(st.floats(-50, 50), st.floats(0, 40), st.floats(0, 100), st.floats(-3, 2))


@given(states)
def test_dominance_m1_implies_m3_and_m5_implies_m3(t):
    x, v, gap, a_n = t
    s, c = VehicleState(x, v), SafetyConstraint(x + gap)
    m3 = ctrl_m3(s, a_n, c, P).intervened
    if not ctrl_m1(s, a_n, c, P).intervened:
        assert not m3
    if not ctrl_m5(s, a_n, c, P).intervened:
        assert not m3


@given(states)
def test_float_metrics_agree_away_from_boundary(t):
    x, v, gap, a_n = t
    s, c = VehicleState(x, v), SafetyConstraint(x + gap)
    m = msd_permissive(v, a_n, P.T, P)
    if abs(c.x_c - x - m) > 1e-6:
        assert ctrl_m3(s, a_n, c, P).intervened == (c.x_c - x < m)


def test_batch_matches_scalar_bit_for_bit():
    rng = np.random.default_rng(3)
    n = 2000
    x = rng.uniform(-50, 50, n)
    v = rng.uniform(0, 30, n)
    x_c = x + rng.uniform(0, 60, n)
    a_n = rng.uniform(-3, 2, n)
    for model in ("m1", "m3", "m5", "m3-wrong"):
        a_s, intervened = decide_batch(model, x, v, x_c, np.zeros(n), a_n, P)
        for i in range(0, n, 7):
            out = control(model, VehicleState(x[i], v[i]), a_n[i], SafetyConstraint(x_c[i]), P)
            assert out.a_s == a_s[i] and out.intervened == intervened[i]


def test_deterministic():
    args = (S10, 1.5, SafetyConstraint(18), P)
    assert ctrl_m3(*args) == ctrl_m3(*args)


def test_admissible_at_rest_beyond_critical_position():
    assert admissible("m5", 5.0, 0.0, 1.0, 0.0, P)
    assert not admissible("m1", 5.0, 0.0, 1.0, 0.0, P)
    assert safe_condition("m1", 0.0, 10.0, 17.35, 0.0, 2.0, P) == (17.35 >= msd_conservative(10, 0.5, P))
