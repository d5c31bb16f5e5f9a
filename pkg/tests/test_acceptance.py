"""Acceptance criteria 1-9, each at its stated tolerance, one PASS/FAIL line each."""

import random
import time
from fractions import Fraction

import numpy as np
import pytest

import ast_gen
from oracles import bisect_crossing, integrate_many
from safectl.analysis import (ParamRanges, compare_metrics, endstep_study, falsify_wrong_msd,
                              obligation_study, witness_episode)
from safectl.controller import SafetyConstraint, control
from safectl.hp.interp import (Counterexample, ExplorationBudget, check_problem, confirm,
                               dump_replay, extract_ctrl, load_replay, run_ctrl)
from safectl.hp.parser import parse_formula, parse_problem, parse_program, parse_term
from safectl.hp.syntax import Add, Const, Mul, Neg, Pow, Var, pretty_print
from safectl.kinematics import VehicleState, evolve
from safectl.scenario import load_scenario
from safectl.simulator import EpisodeConfig, run_batch, run_episode
from safectl.threat import SystemParams

P = SystemParams(a_n_max=2, a_n_min=3, a_s_min=5, T=0.5)
MODELS = ("m1", "m2", "m3", "m4", "m5")
CORPUS = ("model1", "model2", "model3", "model4", "model5", "model3_wrong", "lead_vehicle")
# quadratic-root oracle for the witness, frozen
WITNESS_T = 0.12251482265544139
WITNESS_V = 0.6324555320336758


def corpus_text(root, name):
    return (root / "src" / "safectl" / "corpus" / f"{name}.hp").read_text()


def test_criterion_1_guarantee_invariance(criterion):
    start = time.perf_counter()
    counts = {}
    for model in MODELS:
        report = run_batch(EpisodeConfig(model, P, depth=50, dense=20, seed=0), 100_000)
        counts[model] = report.violations
    elapsed = time.perf_counter() - start
    ok = all(v == 0 for v in counts.values()) and elapsed < 300
    criterion(1, ok, f"violations {counts}, {elapsed:.0f} s for 5 x 10^5 episodes")
    assert ok


def test_criterion_2_wrong_metric_witness(criterion):
    report = falsify_wrong_msd(10_000, seed=0)
    t_oracle = bisect_crossing(0.0, 1.0, -3.0, 0.1, 1.0)
    _, bad = witness_episode("m3-wrong")
    trace, good = witness_episode("m3")
    end = trace[-1].state
    checks = {
        "falsifier hits": report.failures >= 1,
        "crossing time": abs(bad.violation.time - t_oracle) <= 1e-6
        and abs(bad.violation.time - WITNESS_T) <= 1e-6,
        "crossing speed": abs(bad.violation.state.v - WITNESS_V) <= 1e-6,
        "correct stop": good.is_safe and abs(end.x - 0.1) <= 1e-9 and end.v == 0,
    }
    ok = all(checks.values())
    criterion(2, ok, f"{report.failures} violations in 10^4 episodes; crossing at "
                     f"t={bad.violation.time:.8f}, v={bad.violation.state.v:.8f} vs oracle "
                     f"t={t_oracle:.8f}; ctrl_m3 stops at x={end.x!r}, v={end.v}")
    assert ok, checks


@pytest.mark.xfail(strict=True, reason="published witness literals disagree with the quadratic root")
def test_criterion_2_published_literals(criterion):
    _, bad = witness_episode("m3-wrong")
    ok = abs(bad.violation.time - 0.11255) <= 1e-6 and abs(bad.violation.state.v - 0.66235) <= 1e-6
    criterion("2b", ok, f"published t=0.11255, v=0.66235 vs measured t={bad.violation.time:.5f}, "
                        f"v={bad.violation.state.v:.5f}")
    assert ok


def test_criterion_3_endstep_monitoring(criterion):
    report = endstep_study(200, seed=0)
    dense, endpoint = report.details["dense_violations"], report.details["endpoint_violations"]
    ok = endpoint == 0 and dense >= 1
    criterion(3, ok, f"witness family of 200: dense {dense}, end-of-step {endpoint}")
    assert ok


def test_criterion_4_metric_dominance(criterion):
    start = time.perf_counter()
    report = compare_metrics(ParamRanges(), 1_000_000, seed=0)
    elapsed = time.perf_counter() - start
    ok = report.passed and report.worst_margin >= -1e-9 and elapsed < 120
    criterion(4, ok, f"10^6 samples + {report.details['corners']} corners x 2 variants, worst margin "
                     f"{report.worst_margin:.3g}, {report.details['exact_rechecks']} exact rechecks, "
                     f"{elapsed:.1f} s")
    assert ok


def test_criterion_5_invariant_obligations(criterion):
    r = ParamRanges()
    failures = {m: obligation_study(m, r, 10_000, seed=0).failures for m in MODELS}
    wrong = obligation_study("m3", ParamRanges(), 10_000, seed=0, ctrl_model="m3-wrong")
    step = wrong.details["step_failures"]
    ok = all(v == 0 for v in failures.values()) and step >= 1
    criterion(5, ok, f"failures {failures}; ctrl_m3_wrong step failures {step}")
    assert ok


def test_criterion_6_fig2_shape(root, criterion):
    trace, verdict = run_episode(load_scenario(root / "scenarios" / "fig2.toml").config)
    final = trace[-1].state
    first = next(r.t for r in trace if r.intervened)
    ok = verdict.is_safe and final.v == 0 and final.x <= 28 and 28 - final.x <= 0.5
    criterion(6, ok, f"final x={final.x:.4f}, v={final.v}, first intervention at t={first:.2f} s")
    assert ok


def test_criterion_7_kinematics_oracle(criterion):
    rng = np.random.default_rng(2024)
    n = 10_000
    x0, v0, a = rng.uniform(-100, 100, n), rng.uniform(0, 40, n), rng.uniform(-10, 10, n)
    xs, vs = integrate_many(x0, v0, a, np.ones(n), 1e-5)
    dx = dv = 0.0
    for i in range(n):
        s = evolve(VehicleState(x0[i], v0[i]), a[i], 1.0).state
        dx, dv = max(dx, abs(s.x - xs[i])), max(dv, abs(s.v - vs[i]))
    ok = dx <= 1e-6 and dv <= 1e-6
    criterion(7, ok, f"max |dx| = {dx:.2e} m, max |dv| = {dv:.2e} m/s over 10^4 segments")
    assert ok


def _dsl_inputs(rng, n):
    for _ in range(n):
        v = float(rng.uniform(0, 30))
        gap = float(rng.choice([v * v / 10, rng.uniform(0, 80)]))
        a_n = float(rng.choice([-3.0, 2.0, rng.uniform(-3, 2), -v / 0.5 if v <= 1.5 else 0.0]))
        yield float(rng.uniform(-50, 50)), v, gap, a_n


def test_criterion_8_interpreter_cross_validation(root, criterion):
    rng = np.random.default_rng(8)
    worst = 0.0
    for name, model in (("model1", "m1"), ("model3", "m3")):
        ctrl = extract_ctrl(parse_problem(corpus_text(root, name)).program)
        for x, v, gap, a_n in _dsl_inputs(rng, 1000):
            x_c = x + gap
            native = control(model, VehicleState(x, v), a_n, SafetyConstraint(x_c), P).a_s
            s = {"x": x, "v": v, "xc": x_c, "an": a_n, "asmin": 5, "anmax": 2, "anmin": 3,
                 "T": Fraction(1, 2)}
            dsl = run_ctrl(ctrl, s)
            worst = max(worst, abs(float(dsl) - native))
    problem = parse_problem(corpus_text(root, "model3_wrong"))
    cex = check_problem(problem, ExplorationBudget(depth=1))
    replayable = isinstance(cex, Counterexample) and confirm(problem, load_replay(dump_replay(cex)))
    ok = worst <= 1e-9 and replayable
    criterion(8, ok, f"max |a_s difference| {worst:.1e} on 2 x 10^3 inputs; "
                     f"model3_wrong counterexample replayed: {replayable}")
    assert ok


def _parse_like(node, text):
    if isinstance(node, (Var, Const, Add, Mul, Neg, Pow)):
        return parse_term(text)
    try:
        return parse_formula(text)
    except Exception:
        return parse_program(text)


def test_criterion_9_round_trip(root, criterion):
    rng = random.Random(9)
    mismatches = 0
    for _ in range(10_000):
        node = ast_gen.any_node(rng, 8)
        if _parse_like(node, pretty_print(node)) != node:
            mismatches += 1
    parsed = sum(parse_problem(corpus_text(root, c)) is not None for c in CORPUS)
    ok = mismatches == 0 and parsed == len(CORPUS)
    criterion(9, ok, f"{mismatches} mismatches on 10^4 ASTs of depth <= 8; "
                     f"{parsed}/{len(CORPUS)} corpus files parse")
    assert ok
