"""Comparative and falsification studies over the controller models.

* :func:`compare_metrics` checks that the conservative and required
  acceleration distances dominate the permissive one.
* :func:`falsify_wrong_msd` hunts for guarantee violations of the faulty
  controller, seeded with the known witness family.
* :func:`endstep_study` shows that checking only at the end of fixed-length
  steps hides those violations.
* :func:`obligation_study` runs the loop-invariant checks over many
  parameter tuples.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from types import SimpleNamespace
from typing import Optional

import numpy as np

from safectl import threat
from safectl.controller import SafetyConstraint, check_model, safe_condition
from safectl.environment import repair_upward
from safectl.kinematics import VehicleState
from safectl.simulator import (
    EpisodeConfig, check_invariant_obligations, constant_schedule, run_batch, run_episode,
)
from safectl.threat import AREQ_VARIANTS, ParameterContractError, SystemParams

MARGIN_TOL = 1e-9
NEAR_TIE = 1e-6


@dataclass(frozen=True)
class ParamRanges:
    """Closed sampling intervals; every tuple drawn must satisfy the dominance hypotheses."""
    a_s_min: tuple = (4.0, 10.0)
    a_n_min: tuple = (0.5, 3.5)
    a_n_max: tuple = (0.5, 5.0)
    T: tuple = (0.05, 2.0)
    v: tuple = (0.0, 40.0)
    a_n: tuple = (-10.0, 10.0)

    def __post_init__(self):
        for name in ("a_s_min", "a_n_min", "a_n_max", "T", "v", "a_n"):
            lo, hi = (float(b) for b in getattr(self, name))
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ParameterContractError(f"range {name} must be a finite interval, got {(lo, hi)}")
            object.__setattr__(self, name, (lo, hi))
        for name in ("a_s_min", "a_n_min", "a_n_max", "T"):
            if not getattr(self, name)[0] > 0:
                raise ParameterContractError(f"range {name} must lie above 0")
        if not self.v[0] >= 0:
            raise ParameterContractError("range v must lie at or above 0")
        if not self.a_n_min[1] < self.a_s_min[0]:
            raise ParameterContractError(
                "every a_n_min must be below every a_s_min "
                f"(a_n_min up to {self.a_n_min[1]}, a_s_min from {self.a_s_min[0]})")
        if self.a_n[1] < -self.a_n_min[1] or self.a_n[0] > self.a_n_max[1]:
            raise ParameterContractError("range a_n misses the nominal bounds entirely")


@dataclass
class StudyReport:
    study: str
    samples: int
    seed: int
    failures: int = 0
    worst_margin: float = math.inf
    first_counterexample: Optional[dict] = None
    config: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def record(self, margin: float = math.inf, counterexample: Optional[dict] = None):
        self.worst_margin = min(self.worst_margin, margin)
        if counterexample is not None:
            self.failures += 1
            if self.first_counterexample is None:
                self.first_counterexample = counterexample

    def merge(self, other: "StudyReport") -> "StudyReport":
        self.samples += other.samples
        self.failures += other.failures
        self.worst_margin = min(self.worst_margin, other.worst_margin)
        if self.first_counterexample is None:
            self.first_counterexample = other.first_counterexample
        return self

    def to_text(self) -> str:
        """Flat ``key = value`` report, one entry per line."""
        lines = [f"study = {self.study}", f"seed = {self.seed}", f"samples = {self.samples}",
                 f"failures = {self.failures}", f"worst_margin = {_num(self.worst_margin)}",
                 f"passed = {str(self.passed).lower()}"]
        lines += [f"config.{k} = {_num(v)}" for k, v in sorted(self.config.items())]
        lines += [f"details.{k} = {_num(v)}" for k, v in sorted(self.details.items())
                  if not isinstance(v, np.ndarray)]
        if self.first_counterexample:
            lines += [f"counterexample.{k} = {_num(v)}"
                      for k, v in sorted(self.first_counterexample.items())]
        return "\n".join(lines) + "\n"


def _num(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


# --- dominance of the safe-distance metrics -------------------------------

def _exact_params(p) -> SimpleNamespace:
    return SimpleNamespace(**{k: Fraction(getattr(p, k)) for k in ("a_n_max", "a_n_min", "a_s_min", "T")})


def _metrics(v, a_n, p, variant):
    """``(msd_1, msd_3, msd_5)`` at horizon T; works on arrays, floats or Fractions."""
    return (threat.msd_conservative(v, p.T, p), threat.msd_permissive(v, a_n, p.T, p),
            threat.msd_areq(v, a_n, p, variant))


def _margins(v, a_n, p, variant):
    with np.errstate(divide="ignore", invalid="ignore"):
        m1, m3, m5 = _metrics(v, a_n, p, variant)
        m53 = np.where(np.isinf(m5), math.inf, m5 - m3) if isinstance(m5, np.ndarray) else \
            (math.inf if m5 == math.inf else m5 - m3)
        return m1 - m3, m53


def exact_margins(v, a_n, p, variant):
    """Both margins in rational arithmetic (an infinite distance dominates)."""
    q = _exact_params(p)
    v, a_n = Fraction(v), Fraction(a_n)
    m1, m3, m5 = _metrics(v, a_n, q, variant)
    return m1 - m3, (math.inf if m5 == math.inf else m5 - m3)


def corner_grid(r: ParamRanges):
    """All endpoint combinations plus requests at the bounds, 0 and the case switch ``-v/T``."""
    out = []
    for a_s, a_nmin, a_nmax, T, v in itertools.product(r.a_s_min, r.a_n_min, r.a_n_max, r.T, r.v):
        lo, hi = max(r.a_n[0], -a_nmin), min(r.a_n[1], a_nmax)
        if lo > hi:
            continue
        requests = {lo, hi, -a_nmin if lo <= -a_nmin else lo, a_nmax if hi >= a_nmax else hi}
        for extra in (0.0, -v / T):
            if lo <= extra <= hi:
                requests.add(extra)
        for a_n in sorted(requests):
            out.append((a_s, a_nmin, a_nmax, T, v, a_n))
    return out


def sample_tuples(r: ParamRanges, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` rows of ``(a_s_min, a_n_min, a_n_max, T, v, a_n)`` inside the ranges."""
    u = rng.random((n, 6))
    cols = []
    for j, name in enumerate(("a_s_min", "a_n_min", "a_n_max", "T", "v")):
        lo, hi = getattr(r, name)
        cols.append(lo + u[:, j] * (hi - lo))
    a_s, a_nmin, a_nmax, T, v = cols
    lo = np.maximum(r.a_n[0], -a_nmin)
    hi = np.minimum(r.a_n[1], a_nmax)
    a_n = np.minimum(lo + u[:, 5] * (hi - lo), hi)
    # a tenth of the requests sit exactly at the case switch where it is in range
    switch = -v / T
    at_switch = (rng.random(n) < 0.1) & (switch >= lo) & (switch <= hi)
    a_n = np.where(at_switch, switch, a_n)
    return np.column_stack([a_s, a_nmin, a_nmax, T, v, a_n])


def _check_rows(rows: np.ndarray, variant: str, report: StudyReport, keep: list | None):
    a_s, a_nmin, a_nmax, T, v, a_n = rows.T
    p = SimpleNamespace(a_s_min=a_s, a_n_min=a_nmin, a_n_max=a_nmax, T=T)
    m13, m53 = _margins(v, a_n, p, variant)
    if keep is not None:
        keep.append(np.column_stack([rows, m13, m53]))
    otherwise = v + a_n * T < 0
    # sign-corrected otherwise branch: both sides are the same expression
    same_expr = otherwise & (variant == "sign-corrected")
    suspects = (m13 < -MARGIN_TOL) | (np.abs(m13) < NEAR_TIE) | (m53 < -MARGIN_TOL) | \
        ((np.abs(m53) < NEAR_TIE) & ~same_expr)
    report.details["exact_rechecks"] = report.details.get("exact_rechecks", 0) + int(suspects.sum())
    w13, w53 = m13.copy(), m53.copy()
    for i in np.nonzero(suspects)[0]:
        pi = SimpleNamespace(a_s_min=a_s[i], a_n_min=a_nmin[i], a_n_max=a_nmax[i], T=T[i])
        e13, e53 = exact_margins(v[i], a_n[i], pi, variant)
        w13[i], w53[i] = float(e13), float(e53)
        if e13 < 0 or e53 < 0:
            report.record(min(float(e13), float(e53)), {
                "variant": variant, "a_s_min": a_s[i], "a_n_min": a_nmin[i], "a_n_max": a_nmax[i],
                "T": T[i], "v": v[i], "a_n": a_n[i], "margin_13": float(e13), "margin_53": float(e53)})
    report.worst_margin = min(report.worst_margin, float(np.min(w13, initial=math.inf)),
                              float(np.min(w53, initial=math.inf)))
    report.details[f"worst_margin_13.{variant}"] = min(
        report.details.get(f"worst_margin_13.{variant}", math.inf), float(np.min(w13, initial=math.inf)))
    report.details[f"worst_margin_53.{variant}"] = min(
        report.details.get(f"worst_margin_53.{variant}", math.inf), float(np.min(w53, initial=math.inf)))


def compare_metrics(r: ParamRanges, n: int, seed: int, variants=AREQ_VARIANTS,
                    chunk: int = 200_000, keep_margins: bool = False) -> StudyReport:
    """Check ``msd_1 >= msd_3`` and ``msd_5 >= msd_3`` on samples plus the corner grid.

    Every sample is checked under each variant of the Model 5 threshold.
    Margins within the float noise band are recomputed exactly.
    """
    if n < 0:
        raise ValueError("sample count must be >= 0")
    for variant in variants:
        threat._check_variant(variant)
    corners = np.array(corner_grid(r), dtype=float).reshape(-1, 6)
    report = StudyReport("compare", n + len(corners), seed,
                         config={"variants": ",".join(variants), **{
                             f"range.{k}": f"{getattr(r, k)[0]}..{getattr(r, k)[1]}"
                             for k in ("a_s_min", "a_n_min", "a_n_max", "T", "v", "a_n")}},
                         details={"corners": len(corners)})
    keep = [] if keep_margins else None
    rng = np.random.default_rng(seed)
    batches = [corners] + [sample_tuples(r, min(chunk, n - lo), rng) for lo in range(0, n, chunk)]
    for variant in variants:
        for rows in batches:
            _check_rows(rows, variant, report, keep)
    if keep is not None:
        report.details["margins"] = np.concatenate(keep) if keep else np.empty((0, 8))
    return report


def margins_csv(report: StudyReport) -> str:
    rows = report.details.get("margins")
    if rows is None:
        raise ValueError("report was built without keep_margins")
    lines = ["a_s_min,a_n_min,a_n_max,T,v,a_n,margin_13,margin_53"]
    lines += [",".join(_num(float(x)) for x in row) for row in rows]
    return "\n".join(lines) + "\n"


# --- the faulty permissive metric -------------------------------------------

WITNESS = {"v": 1.0, "a_n": -3.0, "a_n_min": 3.0, "a_s_min": 5.0, "T": 1.0, "gap": 0.1}
WITNESS_A_N_MAX = 2.0


def witness_params(a_n_max: float = WITNESS_A_N_MAX) -> SystemParams:
    w = WITNESS
    return SystemParams(a_n_max, w["a_n_min"], w["a_s_min"], w["T"])


def witness_crossing(v=WITNESS["v"], a_n=WITNESS["a_n"], gap=WITNESS["gap"]):
    """Oracle: first time and speed at which ``x = gap`` under constant ``a_n`` from 0."""
    disc = v * v + 2 * a_n * gap
    if disc < 0:
        return None
    t = 2 * gap / (v + math.sqrt(disc))
    return t, v + a_n * t


def witness_episode(model: str = "m3-wrong", monitor: str = "dense", duration: str = "always-T",
                    v=WITNESS["v"], a_n=WITNESS["a_n"], gap=WITNESS["gap"], p: SystemParams | None = None,
                    depth: int = 1):
    p = p or witness_params()
    cfg = EpisodeConfig(model, p, initial=VehicleState(0.0, v), depth=depth, duration=duration,
                        constraint=SafetyConstraint(gap), schedule=constant_schedule(a_n),
                        monitor=monitor)
    return run_episode(cfg)


def witness_family(n: int, seed: int, p: SystemParams | None = None):
    """Members ``(v, a_n, gap)`` that the faulty controller admits and that overshoot.

    The speed is low enough to stop within the horizon, the request brakes
    softer than the fallback, and the gap sits on or just above the
    admissibility boundary.
    """
    p = p or witness_params()
    rng = np.random.default_rng(seed)
    out = [(WITNESS["v"], WITNESS["a_n"], WITNESS["gap"])]
    while len(out) < n:
        v = float(rng.uniform(0.05, p.a_n_min * p.T))
        a_n = float(rng.uniform(-p.a_n_min, -v / p.T))
        gap = v * v / (2 * p.a_s_min) * (1 + float(rng.choice([0.0, rng.uniform(0, 0.2)])))
        gap = repair_upward("m3-wrong", 0.0, v, gap, 0.0, p)
        stops_at = -v * v / (2 * a_n)
        admits = safe_condition("m3-wrong", 0.0, v, gap, 0.0, a_n, p)
        if admits and stops_at > gap and v + a_n * p.T < 0:
            out.append((v, a_n, gap))
    return out[:n]


def _episode_counterexample(verdict, **extra) -> dict:
    vio = verdict.violation
    return {"time": vio.time, "x": vio.state.x, "v": vio.state.v, "x_c": vio.constraint.x_c,
            "v_c": vio.constraint.v_c, "iteration": vio.iteration, **extra}


def falsify_wrong_msd(n: int, seed: int, p: SystemParams | None = None, family: int = 64,
                      model: str = "m3-wrong") -> StudyReport:
    """Search ``n`` episodes of the faulty controller for guarantee violations.

    The witness family comes first, then seeded random episodes with dense
    monitoring fill the rest of the budget.
    """
    p = p or witness_params()
    check_model(model)
    members = witness_family(min(family, n), seed, p)
    report = StudyReport("falsify", n, seed, config={"model": model, "a_n_max": p.a_n_max,
                                                     "a_n_min": p.a_n_min, "a_s_min": p.a_s_min,
                                                     "T": p.T, "family": len(members)})
    fam_hits = 0
    for i, (v, a_n, gap) in enumerate(members):
        _, verdict = witness_episode(model, v=v, a_n=a_n, gap=gap, p=p)
        if not verdict.is_safe:
            fam_hits += 1
            report.record(0.0, _episode_counterexample(verdict, source="witness-family",
                                                       member=i, v0=v, a_n=a_n, gap=gap))
    rest = n - len(members)
    batch_hits = 0
    if rest > 0:
        batch = run_batch(EpisodeConfig(model, p, seed=seed), rest)
        batch_hits = batch.violations
        report.failures += batch.violations
        if batch.first_counterexample is not None and report.first_counterexample is None:
            report.first_counterexample = _episode_counterexample(
                batch.first_counterexample, source="random",
                episode=batch.first_counterexample.episode_index)
    report.details.update(family_violations=fam_hits, random_violations=batch_hits)
    return report


def endstep_study(n: int, seed: int, p: SystemParams | None = None,
                  model: str = "m3-wrong") -> StudyReport:
    """Violations on the witness family under dense vs end-of-step-only checking.

    Both runs use fixed steps of length T. ``failures`` counts the dense
    violations; the end-of-step count is in ``details``.
    """
    p = p or witness_params()
    members = witness_family(n, seed, p)
    counts = {}
    first = {}
    for monitor in ("dense", "endpoint"):
        counts[monitor] = 0
        for i, (v, a_n, gap) in enumerate(members):
            _, verdict = witness_episode(model, monitor=monitor, v=v, a_n=a_n, gap=gap, p=p)
            if not verdict.is_safe:
                counts[monitor] += 1
                first.setdefault(monitor, _episode_counterexample(verdict, member=i, monitor=monitor))
    report = StudyReport("endstep", len(members), seed, failures=counts["dense"],
                         config={"model": model, "duration": "always-T"},
                         details={"dense_violations": counts["dense"],
                                  "endpoint_violations": counts["endpoint"]})
    report.first_counterexample = first.get("dense")
    return report


# --- loop-invariant obligations -----------------------------------------------

def sample_params(r: ParamRanges, k: int, rng: np.random.Generator) -> list:
    out = []
    for _ in range(k):
        vals = {name: float(rng.uniform(*getattr(r, name))) for name in ("a_n_max", "a_n_min", "a_s_min", "T")}
        out.append(SystemParams(**vals))
    return out


def obligation_study(model: str, r: ParamRanges, n: int, seed: int, ctrl_model: str | None = None,
                     variant: str = "as-written", tuples: int = 50) -> StudyReport:
    """Obligation checks on ``n`` samples spread over ``tuples`` parameter draws."""
    check_model(model)
    rng = np.random.default_rng(seed)
    params = sample_params(r, max(1, min(tuples, n)), rng)
    report = StudyReport("obligations", 0, seed, config={"model": model,
                                                         "ctrl_model": ctrl_model or model,
                                                         "variant": variant, "tuples": len(params)})
    per, extra = divmod(n, len(params))
    by_kind = {"init": 0, "step": 0, "guarantee": 0}
    for j, p in enumerate(params):
        m = per + (1 if j < extra else 0)
        if m == 0:
            continue
        ob = check_invariant_obligations(model, p, m, int(rng.integers(2**32)), ctrl_model, variant)
        report.samples += m
        for key in by_kind:
            by_kind[key] += ob.failures[key]
        report.failures += sum(ob.failures.values())
        if ob.first_counterexample is not None and report.first_counterexample is None:
            report.first_counterexample = {**ob.first_counterexample, "a_n_max": p.a_n_max,
                                           "a_n_min": p.a_n_min, "a_s_min": p.a_s_min, "T": p.T}
    report.details.update({f"{k}_failures": v for k, v in by_kind.items()})
    return report
