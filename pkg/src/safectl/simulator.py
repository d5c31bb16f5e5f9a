"""Closed-loop episodes of ``(env; ctrl; plant)*`` with guarantee monitoring.

Each loop iteration samples an admissible constraint and a nominal request,
lets the controller decide, and evolves the plant for a duration in
``[0, T]``. Because every prefix of a plant run is itself a run, the
guarantee ``x >= x_c -> v <= v_c`` is monitored over the whole segment, not
only at its end. The segment check is analytic and exact: velocity is linear
and position monotone along a segment, so the worst point is either the
crossing of ``x_c`` or the end of the segment.

Two code paths exist. :func:`run_episode` executes one episode and records a
trace. :func:`run_batch` executes many episodes at once with numpy and only
keeps verdicts. Both consume the same per-episode random block in the same
order and decide with exact predicates, so they agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from safectl import kinematics
from safectl.controller import (
    VC_MODELS, ContractViolation, SafetyConstraint, msd_condition, admissible, check_model,
    safe_condition,
)
from safectl.environment import DEFAULT_BOUNDARY_PROB, constraint_from_uniform, nominal_from_uniform
from safectl.exact import exact_sign
from safectl.kinematics import VehicleState
from safectl.numeric import both
from safectl.threat import SystemParams

MONITOR_TOL = 1e-9
DURATION_POLICIES = ("sampled", "always-T")
MONITOR_MODES = ("dense", "endpoint")
V_INIT_MAX = 30.0
# share of the duration draws pinned to each endpoint of [0, T]
_ENDPOINT_MASS = 0.05


class InitViolation(ValueError):
    pass


class MonitorInconsistency(AssertionError):
    pass


@dataclass(frozen=True)
class TraceRecord:
    t: float
    state: VehicleState
    a_n: float
    a_s: float
    constraint: SafetyConstraint
    intervened: bool
    elapsed: float = 0.0
    kind: str = "step"


@dataclass(frozen=True)
class Violation:
    time: float
    state: VehicleState
    constraint: SafetyConstraint
    iteration: int


@dataclass(frozen=True)
class Verdict:
    outcome: str
    episodes: int = 1
    seed: Optional[int] = None
    violation: Optional[Violation] = None
    episode_index: Optional[int] = None
    aborted: bool = False

    @property
    def is_safe(self) -> bool:
        return self.outcome == "safe"


@dataclass(frozen=True)
class EpisodeConfig:
    model: str
    params: SystemParams
    initial: Optional[VehicleState] = None
    depth: int = 50
    dense: int = 20
    duration: str = "sampled"
    constraint: Optional[SafetyConstraint] = None
    # None draws requests at random; otherwise ((t_start, a_n), ...)
    schedule: Optional[tuple] = None
    monitor: str = "dense"
    seed: int = 0
    episode_index: int = 0
    boundary_prob: float = DEFAULT_BOUNDARY_PROB
    variant: str = "as-written"
    v_init_max: float = V_INIT_MAX

    def __post_init__(self):
        check_model(self.model)
        if self.depth < 0:
            raise ValueError("loop depth must be >= 0")
        if self.dense < 2:
            raise ValueError("dense samples per interval must be >= 2")
        if self.duration not in DURATION_POLICIES:
            raise ValueError(f"duration policy must be one of {DURATION_POLICIES}")
        if self.monitor not in MONITOR_MODES:
            raise ValueError(f"monitor must be one of {MONITOR_MODES}")
        if self.schedule is not None:
            sched = tuple((float(t0), float(a)) for t0, a in self.schedule)
            if not sched or sched[0][0] != 0.0:
                raise ValueError("schedule must start at t = 0")
            if any(b[0] <= a[0] for a, b in zip(sched, sched[1:])):
                raise ValueError("schedule start times must increase")
            p = self.params
            for _, a in sched:
                if not -p.a_n_min <= a <= p.a_n_max:
                    raise ContractViolation(f"scheduled request {a} outside the nominal bounds")
            object.__setattr__(self, "schedule", sched)
        if self.model == "m5":
            self.params.require_braking_margin()


def constant_schedule(a_n: float) -> tuple:
    return ((0.0, float(a_n)),)


def episode_rng(seed: int, episode_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(episode_index,)))


def duration_from_uniform(u, T, policy: str):
    if policy == "always-T":
        return u * 0 + T
    lo, hi = _ENDPOINT_MASS, 1 - _ENDPOINT_MASS
    inner = T * (u - lo) / (hi - lo)
    if isinstance(u, np.ndarray):
        return np.where(u < lo, 0.0, np.where(u > hi, T, inner))
    return 0.0 if u < lo else T if u > hi else inner


def _schedule_value(schedule, t):
    starts = np.array([s for s, _ in schedule])
    values = np.array([a for _, a in schedule])
    idx = np.searchsorted(starts, t, side="right") - 1
    return values[idx]


def _draws(cfg: EpisodeConfig):
    rng = episode_rng(cfg.seed, cfg.episode_index)
    v0 = rng.random() * cfg.v_init_max if cfg.initial is None else None
    block = rng.random((max(cfg.depth, 1), 5))
    return v0, block


# --- exact segment predicates ---------------------------------------------

def _pos(products):
    s = exact_sign(products)
    return s > 0 if isinstance(s, np.ndarray) else bool(s > 0)


def _nonneg(products):
    s = exact_sign(products)
    return s >= 0 if isinstance(s, np.ndarray) else bool(s >= 0)


def point_violation(x0, v0, a, tau, x_c, v_c, tol=MONITOR_TOL):
    """Exact guarantee check at ``tau`` along an unclamped segment."""
    reached = _nonneg([[2 * x0], [-2 * x_c], [2 * v0, tau], [a, tau, tau]])
    fast = _pos([[v0], [a, tau], [-v_c], [-tol]])
    return both(reached, fast)


def segment_violation(x0, v0, a, d, x_c, v_c, tol=MONITOR_TOL):
    """Exact: does the clamped segment hold a point with x >= x_c, v > v_c + tol?"""
    past = _nonneg([[x0], [-x_c]])
    fast0 = _pos([[v0], [-v_c], [-tol]])
    at_end = point_violation(x0, v0, a, d, x_c, v_c, tol)
    braking = a < 0
    stopped = ~_pos([[v0], [a, d]]) if isinstance(a, np.ndarray) else not _pos([[v0], [a, d]])
    reached = _nonneg([[2 * x0], [-2 * x_c], [2 * v0, d], [a, d, d]])
    # speed at the crossing, squared: v0^2 + 2a(x_c - x0), against (v_c + tol)^2
    cross_fast = _pos([[v0, v0], [2 * a, x_c], [-2 * a, x0],
                       [-v_c, v_c], [-2 * v_c, tol], [-tol, tol]])
    if isinstance(braking, np.ndarray) or isinstance(past, np.ndarray):
        return (past & fast0) | (~braking & at_end) | (braking & ~past & cross_fast & (stopped | reached))
    return (past and fast0) or (not braking and at_end) or \
        (braking and not past and cross_fast and (stopped or reached))


def endpoint_violation(x0, v0, a, d, x_c, v_c, tol=MONITOR_TOL):
    """Guarantee check only at the end of the executed segment."""
    moving = _pos([[v0], [a, d]])
    return both(moving, point_violation(x0, v0, a, d, x_c, v_c, tol))


def violation_time(x0, v0, a, d, x_c, v_c, tol=MONITOR_TOL):
    """Float estimate of the earliest violating instant in a violating segment."""
    gap = x_c - x0
    disc = v0 * v0 + 2 * a * gap
    with np.errstate(invalid="ignore", divide="ignore"):
        root = np.sqrt(np.maximum(disc, 0.0)) if isinstance(disc, np.ndarray) else math.sqrt(max(disc, 0.0))
        t_cross = 2 * gap / (v0 + root)
        t_fast = (v_c + tol - v0) / a
    if isinstance(gap, np.ndarray) or isinstance(a, np.ndarray):
        t_cross = np.where(gap <= 0, 0.0, t_cross)
        t_fast = np.where(a > 0, t_fast, 0.0)
        return np.clip(np.maximum(t_cross, t_fast), 0.0, d)
    t_cross = 0.0 if gap <= 0 else t_cross
    t_fast = t_fast if a > 0 else 0.0
    return min(max(t_cross, t_fast, 0.0), d)


def dense_points(x0, v0, a, d, m):
    """``m`` equally spaced sample instants on the executed segment."""
    t_stop = kinematics.stopping_time(v0, a)
    frac = np.linspace(0.0, 1.0, m)
    if isinstance(d, np.ndarray):
        end = np.minimum(d, t_stop)
        return end[:, None] * frac[None, :]
    return min(d, t_stop) * frac


def dense_screen(x0, v0, a, taus, x_c, v_c, tol=MONITOR_TOL):
    """Float screen of the sample instants, confirmed exactly point by point.

    Per-episode inputs are 1-d and ``taus`` is (episodes, samples) in batch use.
    """
    if np.ndim(taus) == 2:
        x0, v0, a, x_c, v_c = (np.asarray(q)[:, None] for q in (x0, v0, a, x_c, v_c))
    x0, v0, a, x_c, v_c, taus = np.broadcast_arrays(x0, v0, a, x_c, v_c, taus)
    x = kinematics.position_at(x0, v0, a, taus)
    v = kinematics.velocity_at(v0, a, taus)
    hits = (x >= x_c) & (v > v_c + tol)
    confirmed = np.zeros(hits.shape, dtype=bool)
    for idx in zip(*np.nonzero(hits)):
        confirmed[idx] = bool(point_violation(float(x0[idx]), float(v0[idx]), float(a[idx]),
                                              float(taus[idx]), float(x_c[idx]), float(v_c[idx]), tol))
    return confirmed


# --- scalar episodes ------------------------------------------------------

def _init_check(cfg: EpisodeConfig, state: VehicleState, c: SafetyConstraint):
    if cfg.model not in VC_MODELS and c.v_c != 0:
        raise InitViolation(f"model {cfg.model} requires v_c = 0")
    if not admissible(cfg.model, state.x, state.v, c.x_c, c.v_c, cfg.params):
        raise InitViolation(
            f"initial state x={state.x}, v={state.v} is outside the admissible region "
            f"for x_c={c.x_c}, v_c={c.v_c}")


def run_episode(cfg: EpisodeConfig):
    """Execute one episode; returns ``(trace, verdict)``."""
    p = cfg.params
    v0, block = _draws(cfg)
    state = cfg.initial if cfg.initial is not None else VehicleState(0.0, v0)

    def constraint_for(k, s):
        if cfg.constraint is not None:
            return cfg.constraint
        x_c, v_c = constraint_from_uniform(cfg.model, s.x, s.v, p, block[k, 0], block[k, 1],
                                           block[k, 2], cfg.boundary_prob)
        return SafetyConstraint(float(x_c), float(v_c))

    c = constraint_for(0, state)
    _init_check(cfg, state, c)
    t = 0.0
    trace = [TraceRecord(t, state, 0.0, 0.0, c, False, 0.0, "init")]
    for k in range(cfg.depth):
        if k > 0:
            c = constraint_for(k, state)
            if not admissible(cfg.model, state.x, state.v, c.x_c, c.v_c, p):
                # env test fails: the run aborts and is not a counterexample
                return trace, Verdict("safe", seed=cfg.seed, episode_index=cfg.episode_index,
                                      aborted=True)
        if cfg.schedule is None:
            a_n = float(nominal_from_uniform(block[k, 3], k, p))
        else:
            a_n = float(_schedule_value(cfg.schedule, t))
        safe = safe_condition(cfg.model, state.x, state.v, c.x_c, c.v_c, a_n, p, cfg.variant)
        a_s = a_n if safe else -p.a_s_min
        d = float(duration_from_uniform(block[k, 4], p.T, cfg.duration))
        x0, v0_ = state.x, state.v
        if cfg.monitor == "dense":
            bad = segment_violation(x0, v0_, a_s, d, c.x_c, c.v_c)
            taus = dense_points(x0, v0_, a_s, d, cfg.dense)
            if dense_screen(x0, v0_, a_s, taus, c.x_c, c.v_c).any() and not bad:
                raise MonitorInconsistency(f"dense sample violates but segment check passed: {cfg}")
        else:
            bad = endpoint_violation(x0, v0_, a_s, d, c.x_c, c.v_c)
        if bad:
            if cfg.monitor == "dense":
                tau = violation_time(x0, v0_, a_s, d, c.x_c, c.v_c)
            else:
                tau = d
            at = VehicleState(kinematics.position_at(x0, v0_, a_s, tau),
                              max(kinematics.velocity_at(v0_, a_s, tau), 0.0))
            trace.append(TraceRecord(t + tau, at, a_n, a_s, c, not safe, tau, "violation"))
            return trace, Verdict("violation", seed=cfg.seed, episode_index=cfg.episode_index,
                                  violation=Violation(t + tau, at, c, k))
        x1, v1, elapsed = kinematics._evolve_raw(x0, v0_, a_s, d)
        t = t + elapsed
        state = VehicleState(float(x1), float(v1))
        trace.append(TraceRecord(t, state, a_n, a_s, c, not safe, float(elapsed)))
    return trace, Verdict("safe", seed=cfg.seed, episode_index=cfg.episode_index)


def check_guarantee(trace: Sequence[TraceRecord], c: Optional[SafetyConstraint] = None,
                    tol: float = MONITOR_TOL) -> Verdict:
    """Pointwise guarantee over recorded states.

    With ``c`` given every record is checked against it, otherwise against
    the constraint stored in the record.
    """
    for i, rec in enumerate(trace):
        cc = c if c is not None else rec.constraint
        if rec.state.x >= cc.x_c and rec.state.v > cc.v_c + tol:
            return Verdict("violation", violation=Violation(rec.t, rec.state, cc, i))
    return Verdict("safe")


def replay_states(trace: Sequence[TraceRecord]):
    """Re-derive each state from its predecessor and the recorded (a_s, elapsed)."""
    out = [trace[0].state]
    for prev, rec in zip(trace, trace[1:]):
        s = prev.state
        if rec.kind == "violation":
            x = kinematics.position_at(s.x, s.v, rec.a_s, rec.elapsed)
            v = max(kinematics.velocity_at(s.v, rec.a_s, rec.elapsed), 0.0)
        else:
            x, v, _ = kinematics._evolve_raw(s.x, s.v, rec.a_s, rec.elapsed)
        out.append(VehicleState(float(x), float(v)))
    return out


# --- batch episodes -------------------------------------------------------

@dataclass
class BatchReport:
    model: str
    episodes: int
    seed: int
    violations: int = 0
    aborted: int = 0
    first_counterexample: Optional[Verdict] = None
    violating_indices: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.violations == 0


def run_batch(template: EpisodeConfig, episodes: int, start_index: int = 0,
              chunk: int = 10_000) -> BatchReport:
    """Run ``episodes`` episodes sharing ``template`` except the episode index.

    Episode ``i`` is exactly ``run_episode(replace(template, episode_index=i))``.
    """
    report = BatchReport(template.model, episodes, template.seed)
    for lo in range(start_index, start_index + episodes, chunk):
        hi = min(lo + chunk, start_index + episodes)
        _run_chunk(template, np.arange(lo, hi), report)
    report.violating_indices.sort()
    if report.violating_indices:
        first = report.violating_indices[0]
        _, verdict = run_episode(replace(template, episode_index=int(first)))
        report.first_counterexample = verdict
    return report


def _run_chunk(cfg: EpisodeConfig, indices: np.ndarray, report: BatchReport):
    p = cfg.params
    n = len(indices)
    depth = max(cfg.depth, 1)
    blocks = np.empty((n, depth, 5))
    v = np.empty(n)
    for j, idx in enumerate(indices):
        v0, blk = _draws(replace(cfg, episode_index=int(idx)))
        blocks[j] = blk
        v[j] = v0 if v0 is not None else cfg.initial.v
    x = np.zeros(n) if cfg.initial is None else np.full(n, cfg.initial.x)
    t = np.zeros(n)
    live = np.ones(n, dtype=bool)

    def constraints(k, xs, vs, rows):
        if cfg.constraint is not None:
            return np.full(len(rows), cfg.constraint.x_c), np.full(len(rows), cfg.constraint.v_c)
        b = blocks[rows, k]
        return constraint_from_uniform(cfg.model, xs, vs, p, b[:, 0], b[:, 1], b[:, 2],
                                       cfg.boundary_prob)

    all_rows = np.arange(n)
    x_c, v_c = constraints(0, x, v, all_rows)
    if cfg.constraint is not None:
        ok = np.asarray(admissible(cfg.model, x, v, x_c, v_c, p), dtype=bool)
        if not ok.all():
            raise InitViolation("initial state outside the admissible region")
    for k in range(cfg.depth):
        rows = np.nonzero(live)[0]
        if rows.size == 0:
            break
        xs, vs, ts = x[rows], v[rows], t[rows]
        if k > 0:
            xcs, vcs = constraints(k, xs, vs, rows)
            ok = np.asarray(admissible(cfg.model, xs, vs, xcs, vcs, p), dtype=bool)
            if not ok.all():
                report.aborted += int((~ok).sum())
                live[rows[~ok]] = False
                rows, xs, vs, ts, xcs, vcs = (q[ok] for q in (rows, xs, vs, ts, xcs, vcs))
        else:
            xcs, vcs = x_c, v_c
        if cfg.schedule is None:
            a_n = nominal_from_uniform(blocks[rows, k, 3], k, p)
        else:
            a_n = _schedule_value(cfg.schedule, ts)
        safe = np.asarray(safe_condition(cfg.model, xs, vs, xcs, vcs, a_n, p, cfg.variant), dtype=bool)
        a_s = np.where(safe, a_n, -p.a_s_min)
        d = duration_from_uniform(blocks[rows, k, 4], p.T, cfg.duration)
        if cfg.monitor == "dense":
            bad = np.asarray(segment_violation(xs, vs, a_s, d, xcs, vcs), dtype=bool)
            taus = dense_points(xs, vs, a_s, d, cfg.dense)
            hit = dense_screen(xs, vs, a_s, taus, xcs, vcs).any(axis=1)
            if (hit & ~bad).any():
                raise MonitorInconsistency("dense sample violates but segment check passed")
        else:
            bad = np.asarray(endpoint_violation(xs, vs, a_s, d, xcs, vcs), dtype=bool)
        if bad.any():
            report.violations += int(bad.sum())
            report.violating_indices.extend(int(i) for i in indices[rows[bad]])
            live[rows[bad]] = False
        x1, v1, elapsed = kinematics._evolve_raw(xs, vs, a_s, d)
        keep = ~bad
        x[rows[keep]] = x1[keep]
        v[rows[keep]] = v1[keep]
        t[rows[keep]] = ts[keep] + elapsed[keep]


# --- loop-invariant obligations -------------------------------------------

OBLIGATION_DURATIONS = 21


def zeta_exact(model, x, v, x_c, v_c, p: SystemParams) -> bool:
    """Loop invariant evaluated in rationals, straight from the metric formulas.

    Deliberately independent of the cleared-denominator predicates used by the
    controller: this goes through :mod:`safectl.threat` on Fractions.
    """
    from fractions import Fraction as F

    from safectl import threat
    x, v, x_c, v_c = F(x), F(v), F(x_c), F(v_c)
    gap = x_c - x
    a_s = F(p.a_s_min)
    if model == "m5":
        return threat.a_req_zero(v, gap) >= -a_s
    if model in VC_MODELS:
        return v_c >= 0 and gap >= (v * v - v_c * v_c) / (2 * a_s)
    return gap >= v * v / (2 * a_s)


def zeta_after(model, x, v, x_c, v_c, a, d, p: SystemParams):
    """Exact loop invariant of the state reached from (x, v) under ``a`` after ``d``.

    Not stopped within ``d``: the invariant is the distance condition with
    ``(a, d)`` in place of ``(a_n, T)``. Stopped: x' = x - v^2/(2a), v' = 0.
    """
    b = p.a_s_min
    vc = v_c if model in VC_MODELS else v * 0
    moving = _pos([[v], [a, d]])
    run_on = msd_condition(x, v, x_c, vc, a, d, b)
    # stopped: a_s*(-2a(x_c - x) - v^2) - a*v_c^2 >= 0  (multiplied by -a > 0)
    stop_ok = _nonneg([[-2 * b, a, x_c], [2 * b, a, x], [-b, v, v], [-a, vc, vc]])
    if model == "m5":
        # at rest the required acceleration is 0
        stop_ok = stop_ok | True
    if isinstance(moving, np.ndarray):
        return np.where(moving, run_on, stop_ok)
    return run_on if moving else stop_ok


@dataclass
class ObligationReport:
    model: str
    samples: int
    seed: int
    ctrl_model: str
    failures: dict = field(default_factory=lambda: {"init": 0, "step": 0, "guarantee": 0})
    checked: dict = field(default_factory=lambda: {"init": 0, "step": 0, "guarantee": 0})
    first_counterexample: Optional[dict] = None

    @property
    def passed(self) -> bool:
        return not any(self.failures.values())

    def merge(self, other: "ObligationReport"):
        for key in self.failures:
            self.failures[key] += other.failures[key]
            self.checked[key] += other.checked[key]
        self.samples += other.samples
        if self.first_counterexample is None:
            self.first_counterexample = other.first_counterexample


def _sample_states(model, p, n, rng, v_max=V_INIT_MAX, boundary_prob=DEFAULT_BOUNDARY_PROB):
    # a fifth of the speeds sit in the band where v + a_n*T can turn negative
    low = rng.random(n) < 0.2
    v = np.where(low, rng.random(n) * p.a_n_min * p.T, rng.random(n) * v_max)
    x = (rng.random(n) - 0.5) * 200.0
    u = rng.random((n, 3))
    x_c, v_c = constraint_from_uniform(model, x, v, p, u[:, 0], u[:, 1], u[:, 2], boundary_prob)
    return x, v, x_c, v_c


def check_invariant_obligations(model: str, p: SystemParams, n_samples: int, seed: int,
                                ctrl_model: Optional[str] = None, variant: str = "as-written",
                                durations: int = OBLIGATION_DURATIONS) -> ObligationReport:
    """Spot-check (init -> zeta), (zeta -> [env; ctrl; plant] zeta), (zeta -> guarantee).

    ``ctrl_model`` swaps in another controller (e.g. ``m3-wrong``) while the
    invariant and guarantee stay those of ``model``.
    """
    check_model(model)
    ctrl_model = ctrl_model or model
    if "m5" in (model, ctrl_model):
        p.require_braking_margin()
    rng = np.random.default_rng(seed)
    report = ObligationReport(model, n_samples, seed, ctrl_model)

    def fail(kind, **info):
        report.failures[kind] += 1
        if report.first_counterexample is None:
            report.first_counterexample = {"obligation": kind, **{k: float(v) for k, v in info.items()}}

    # (i) init -> zeta: init is the env test plus parameter/velocity conditions
    x, v, x_c, v_c = _sample_states(model, p, n_samples, rng)
    init = np.asarray(admissible(model, x, v, x_c, v_c, p), dtype=bool) & (v >= 0)
    for i in np.nonzero(init)[0]:
        report.checked["init"] += 1
        if not zeta_exact(model, x[i], v[i], x_c[i], v_c[i], p):
            fail("init", x=x[i], v=v[i], x_c=x_c[i], v_c=v_c[i])

    # (ii) zeta and one env; ctrl; plant step -> zeta, over a duration grid
    x, v, x_c, v_c = _sample_states(model, p, n_samples, rng)
    k = rng.integers(0, 10, n_samples)
    a_n = np.where(k == 0, -p.a_n_min, np.where(k == 1, p.a_n_max,
                   -p.a_n_min + rng.random(n_samples) * (p.a_n_max + p.a_n_min)))
    a_n = np.minimum(a_n, p.a_n_max)
    ctrl_vc = v_c if ctrl_model in VC_MODELS else v_c * 0
    safe = np.asarray(safe_condition(ctrl_model, x, v, x_c, ctrl_vc, a_n, p, variant), dtype=bool)
    a_s = np.where(safe, a_n, -p.a_s_min)
    grid = np.linspace(0.0, p.T, durations)
    grid[-1] = p.T
    cols = [np.full(n_samples, g) for g in grid]
    for d in cols:
        ok = np.asarray(zeta_after(model, x, v, x_c, v_c, a_s, d, p), dtype=bool)
        report.checked["step"] += n_samples
        for i in np.nonzero(~ok)[0]:
            fail("step", x=x[i], v=v[i], x_c=x_c[i], v_c=v_c[i], a_n=a_n[i], a_s=a_s[i], d=d[i])

    # (iii) zeta -> guarantee, with half the states pushed to or past x_c
    x, v, x_c, v_c = _sample_states(model, p, n_samples, rng)
    past = rng.random(n_samples) < 0.5
    x = np.where(past, x_c + rng.random(n_samples) * 5.0 * (rng.random(n_samples) < 0.7), x)
    if model in VC_MODELS:
        room = np.maximum(v_c * v_c + 2 * p.a_s_min * (x_c - x), 0.0)
        v = np.where(past, np.sqrt(room) * rng.random(n_samples), v)
    else:
        v = np.where(past & (rng.random(n_samples) < 0.8), 0.0, v)
    for i in range(n_samples):
        if not zeta_exact(model, x[i], v[i], x_c[i], v_c[i], p):
            continue
        report.checked["guarantee"] += 1
        vc = v_c[i] if model in VC_MODELS else 0.0
        if x[i] >= x_c[i] and v[i] > vc + MONITOR_TOL:
            fail("guarantee", x=x[i], v=v[i], x_c=x_c[i], v_c=v_c[i])
    return report
