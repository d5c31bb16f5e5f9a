"""Bounded-nondeterminism interpreter and falsifier for hybrid programs.

Valuations map variable names to exact rationals. Each nondeterministic
point (choice, loop unrolling, sampled value, ODE duration) becomes a
branch; branches are explored breadth first up to an
:class:`ExplorationBudget`. Falsification is one sided: a
:class:`Counterexample` replays to a genuine violation, while
:class:`NoCounterexampleFound` only means none was seen within the budget.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from safectl.hp.syntax import (
    Add, And, Assign, Choice, Compare, Const, Exists, FalseF, Forall, Iff, Implies,
    Loop, Mul, Neg, NondetAssign, Not, ODE, Or, Pow, Seq, Test, TrueF, Var,
)


class HpRuntimeError(ValueError):
    pass


class UnboundVariable(HpRuntimeError):
    pass


class UnsupportedConstruct(HpRuntimeError):
    pass


class UnboundedNondeterminism(HpRuntimeError):
    pass


class ReplayMismatch(HpRuntimeError):
    pass


@dataclass(frozen=True)
class ExplorationBudget:
    depth: int = 2              # loop unrollings explored: 0..depth
    samples: int = 3            # values per nondeterministic assignment
    durations: int = 3          # durations per ODE, endpoints first
    dense: int = 4              # post-condition probes inside each ODE
    seed: int = 0
    max_branches: int = 200_000
    unbounded_span: Fraction = Fraction(100)
    dense_monitor: bool = True

    def __post_init__(self):
        for name in ("depth", "samples", "durations", "dense", "max_branches"):
            value = getattr(self, name)
            if not (isinstance(value, (int, np.integer)) and value > 0):
                raise ValueError(f"budget {name} must be a positive integer, got {value!r}")
        if not (isinstance(self.seed, (int, np.integer)) and self.seed >= 0):
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")
        span = Fraction(self.unbounded_span)
        if span <= 0:
            raise ValueError("unbounded_span must be positive")
        object.__setattr__(self, "unbounded_span", span)


# --- univariate polynomials in time ---------------------------------------

class UPoly:
    """Polynomial in one variable with exact coefficients, lowest degree first."""

    __slots__ = ("c",)

    def __init__(self, coeffs):
        c = [Fraction(x) for x in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self.c = tuple(c)

    @staticmethod
    def lift(x) -> "UPoly":
        return x if isinstance(x, UPoly) else UPoly([x])

    @property
    def degree(self) -> int:
        return len(self.c) - 1

    def __add__(self, other):
        o = UPoly.lift(other).c
        n = max(len(self.c), len(o))
        return UPoly([(self.c[i] if i < len(self.c) else 0) + (o[i] if i < len(o) else 0)
                      for i in range(n)])

    __radd__ = __add__

    def __neg__(self):
        return UPoly([-x for x in self.c])

    def __sub__(self, other):
        return self + (-UPoly.lift(other))

    def __mul__(self, other):
        o = UPoly.lift(other).c
        if not self.c or not o:
            return UPoly([])
        out = [Fraction(0)] * (len(self.c) + len(o) - 1)
        for i, a in enumerate(self.c):
            for j, b in enumerate(o):
                out[i + j] += a * b
        return UPoly(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        out = UPoly([1])
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        return isinstance(other, UPoly) and self.c == other.c

    def __hash__(self):
        return hash(self.c)

    def __call__(self, t):
        acc = Fraction(0)
        for a in reversed(self.c):
            acc = acc * t + a
        return acc

    def integral(self) -> "UPoly":
        return UPoly([0] + [a / (i + 1) for i, a in enumerate(self.c)])

    def __repr__(self):
        return f"UPoly({[str(x) for x in self.c]})"


T_VAR = UPoly([0, 1])


# --- evaluation -----------------------------------------------------------

def eval_term(t, s):
    """Evaluate a term over a valuation (values may be rationals or UPoly)."""
    match t:
        case Var(name):
            try:
                return s[name]
            except KeyError:
                raise UnboundVariable(f"variable {name!r} is read before it is assigned") from None
        case Const(value):
            return value
        case Add(left, right):
            return eval_term(left, s) + eval_term(right, s)
        case Mul(left, right):
            return eval_term(left, s) * eval_term(right, s)
        case Neg(operand):
            return -eval_term(operand, s)
        case Pow(base, exponent):
            return eval_term(base, s) ** exponent
    raise TypeError(f"not a term: {t!r}")


_CMP = {
    ">=": lambda d: d >= 0, ">": lambda d: d > 0, "<=": lambda d: d <= 0,
    "<": lambda d: d < 0, "=": lambda d: d == 0,
}


def eval_formula(f, s) -> bool:
    match f:
        case Compare(op, left, right):
            return _CMP[op](eval_term(left, s) - eval_term(right, s))
        case TrueF():
            return True
        case FalseF():
            return False
        case Not(operand):
            return not eval_formula(operand, s)
        case And(left, right):
            return eval_formula(left, s) and eval_formula(right, s)
        case Or(left, right):
            return eval_formula(left, s) or eval_formula(right, s)
        case Implies(left, right):
            return (not eval_formula(left, s)) or eval_formula(right, s)
        case Iff(left, right):
            return eval_formula(left, s) == eval_formula(right, s)
        case Forall() | Exists():
            raise UnsupportedConstruct("quantifiers are unsupported in the executable subset")
    raise TypeError(f"not a formula: {f!r}")


def as_valuation(values) -> dict:
    """Copy a mapping into exact rationals (floats convert without rounding)."""
    return {str(k): Fraction(v) for k, v in dict(values).items()}


# --- ODE solving -----------------------------------------------------------

MAX_PICARD = 8


def flow_solution(ode: ODE, s) -> dict:
    """Closed-form solution as polynomials in time, via Picard iteration.

    For a nilpotent system the iteration reaches a fixed point after a few
    rounds and that fixed point is the exact solution.
    """
    env = {k: UPoly([v]) for k, v in s.items()}
    for name, _ in ode.flows:
        if name not in s:
            raise UnboundVariable(f"ODE variable {name!r} has no initial value")
    for _ in range(MAX_PICARD):
        nxt = dict(env)
        for name, rhs in ode.flows:
            nxt[name] = UPoly([s[name]]) + UPoly.lift(eval_term(rhs, env)).integral()
        if all(nxt[n] == env[n] for n, _ in ode.flows):
            return {n: env[n] for n, _ in ode.flows}
        env = nxt
    raise UnsupportedConstruct("ODE is not nilpotent; no polynomial closed form")


def state_at(s, solution, t) -> dict:
    out = dict(s)
    for name, poly in solution.items():
        out[name] = poly(t)
    return out


def _domain_atoms(f) -> list:
    match f:
        case TrueF():
            return []
        case And(left, right):
            return _domain_atoms(left) + _domain_atoms(right)
        case Compare():
            return [f]
    raise UnsupportedConstruct("ODE domains must be conjunctions of comparisons")


def _real_roots(g: UPoly) -> list:
    """Positive real roots, exact when rational and cheap, else float estimates."""
    c = g.c
    if g.degree <= 0:
        return []
    if g.degree == 1:
        r = -c[0] / c[1]
        return [r] if r > 0 else []
    if g.degree == 2:
        a, b, k = c[2], c[1], c[0]
        disc = b * b - 4 * a * k
        if disc < 0:
            return []
        num, den = disc.numerator, disc.denominator
        rn, rd = math.isqrt(num), math.isqrt(den)
        if rn * rn == num and rd * rd == den:
            sq = Fraction(rn, rd)
            roots = {(-b - sq) / (2 * a), (-b + sq) / (2 * a)}
        else:
            sq = math.sqrt(float(disc))
            roots = {Fraction((-float(b) - sq) / (2 * float(a))),
                     Fraction((-float(b) + sq) / (2 * float(a)))}
        return sorted(r for r in roots if r > 0)
    est = np.roots([float(x) for x in reversed(c)])
    return sorted(Fraction(float(r.real)) for r in est if abs(r.imag) < 1e-9 and r.real > 0)


def _holds(g: UPoly, op: str, t) -> bool:
    return _CMP[op](g(t))


def _prev_float(t: Fraction) -> Fraction:
    return Fraction(np.nextafter(float(t), -math.inf))


def _atom_horizon(g: UPoly, op: str):
    """Largest ``tau`` with the atom holding on ``[0, tau]``; None if it fails at 0."""
    if not _holds(g, op, 0):
        return None
    if op == "=":
        return math.inf if g.degree < 0 else Fraction(0)
    if op in ("<=", "<"):
        g, op = -g, (">=" if op == "<=" else ">")
    roots = _real_roots(g)
    strict = op == ">"
    for i, r in enumerate(roots):
        nxt = roots[i + 1] if i + 1 < len(roots) else r + 1
        if strict or g((r + nxt) / 2) < 0:
            bound = r
            # pull float estimates (and strict bounds) back inside the domain
            for _ in range(64):
                if bound <= 0 or (_holds(g, op, bound) and not (strict and bound == r and g(r) == 0)):
                    break
                bound = _prev_float(bound)
            return max(bound, Fraction(0))
    return math.inf


def max_duration(ode: ODE, s, solution, cap: Fraction):
    """Maximal domain-respecting duration, or None when the domain fails at once."""
    env = {k: UPoly([v]) for k, v in s.items()}
    env.update(solution)
    horizon = math.inf
    for atom in _domain_atoms(ode.domain):
        g = UPoly.lift(eval_term(atom.left, env)) - UPoly.lift(eval_term(atom.right, env))
        h = _atom_horizon(g, atom.op)
        if h is None:
            return None
        horizon = min(horizon, h)
    return cap if horizon == math.inf else horizon


def van_der_corput(k: int) -> Fraction:
    q, denom = Fraction(0), 1
    while k:
        denom *= 2
        k, bit = divmod(k, 2)
        q += Fraction(bit, denom)
    return q


def ode_durations(t_max: Fraction, count: int, rng_key, seed: int) -> list:
    out = [t_max] if count == 1 else [Fraction(0), t_max]
    if count > 2:
        u = np.random.default_rng([seed, 1, *rng_key]).random(count - 2)
        out += [min(Fraction(float(t_max) * float(x)), t_max) for x in u]
    return out


# --- exploration -----------------------------------------------------------

@dataclass(frozen=True)
class Completed:
    valuation: dict
    events: tuple
    branch: tuple = ()


@dataclass(frozen=True)
class Aborted:
    events: tuple
    reason: str = "test failed"
    branch: tuple = ()


RunOutcome = Completed | Aborted


@dataclass(frozen=True)
class _LoopAt:
    loop: Loop
    count: int


def _normalize(cont: tuple) -> tuple:
    while cont and isinstance(cont[0], Seq):
        head = cont[0]
        cont = (head.left, head.right) + cont[1:]
    return cont


def _can_finish(cont: tuple) -> bool:
    return all(isinstance(c, (_LoopAt, Loop)) for c in cont)


def _linear_bound(f, var: str, s):
    """Interval for ``var`` implied by the linear conjuncts of ``f`` given ``s``."""
    lo = hi = None
    lo_strict = hi_strict = False
    env = {k: UPoly([v]) for k, v in s.items()}
    env[var] = T_VAR
    for atom in _conjuncts(f):
        if not isinstance(atom, Compare):
            continue
        try:
            g = UPoly.lift(eval_term(atom.left, env)) - UPoly.lift(eval_term(atom.right, env))
        except UnboundVariable:
            continue
        if g.degree != 1:
            continue
        b, a = g.c
        point = -b / a
        op = atom.op
        if a < 0:
            op = {">=": "<=", ">": "<", "<=": ">=", "<": ">", "=": "="}[op]
        if op in (">=", ">", "="):
            strict = op == ">"
            if lo is None or point > lo or (point == lo and strict):
                lo, lo_strict = point, strict
        if op in ("<=", "<", "="):
            strict = op == "<"
            if hi is None or point < hi or (point == hi and strict):
                hi, hi_strict = point, strict
    return lo, lo_strict, hi, hi_strict


def _conjuncts(f) -> list:
    if isinstance(f, And):
        return _conjuncts(f.left) + _conjuncts(f.right)
    return [f]


def _round_in(q: Fraction, strict: bool, upward: bool) -> Fraction:
    """Nearest float on the inside of a bound."""
    direction = math.inf if upward else -math.inf
    f = Fraction(float(q))
    if (f < q if upward else f > q) or (strict and f == q):
        f = Fraction(np.nextafter(float(f), direction))
    return f


def nondet_values(f, var: str, s, budget: ExplorationBudget, rng_key) -> list:
    """Candidate values for ``var``: inward-rounded endpoints, then uniform draws."""
    lo, lo_strict, hi, hi_strict = _linear_bound(f, var, s)
    if lo is None and hi is None:
        raise UnboundedNondeterminism(f"no linear bound on {var!r} in the adjacent test")
    span = budget.unbounded_span
    if hi is None:
        hi, hi_strict = lo + span, False
    if lo is None:
        lo, lo_strict = hi - span, False
    lo_f = _round_in(lo, lo_strict, upward=True)
    hi_f = _round_in(hi, hi_strict, upward=False)
    if lo_f > hi_f:
        return []
    values = [lo_f] if budget.samples == 1 else [lo_f, hi_f]
    if budget.samples > 2:
        u = np.random.default_rng([budget.seed, 0, *rng_key]).random(budget.samples - 2)
        for x in u:
            values.append(min(max(Fraction(float(lo_f) + float(x) * float(hi_f - lo_f)), lo_f), hi_f))
    return values


class BudgetExhausted(Exception):
    pass


@dataclass
class _Explorer:
    budget: ExplorationBudget
    post: object = None                 # formula probed inside ODEs when dense monitoring is on
    outcomes: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    exhausted: bool = False

    def explore(self, prog, s0, stop_on_violation: bool = False):
        queue = deque([((prog,), dict(s0), (), ())])
        while queue:
            if len(queue) > self.budget.max_branches:
                self.exhausted = True
                return
            cont, s, events, path = queue.popleft()
            for child in self._advance(cont, s, events, path):
                queue.append(child)
            if stop_on_violation and self.violations:
                return

    def _finish(self, s, events, path):
        self.outcomes.append(Completed(s, events, path))
        if self.post is not None and not eval_formula(self.post, s):
            self.violations.append(Completed(s, events, path))

    def _advance(self, cont, s, events, path):
        """Run deterministic steps, then return the children of the next branch point."""
        while True:
            cont = _normalize(cont)
            if not cont:
                self._finish(s, events, path)
                return []
            head, rest = cont[0], cont[1:]
            match head:
                case Assign(var, term):
                    s = dict(s)
                    s[var] = Fraction(eval_term(term, s))
                    cont = rest
                case Test(formula):
                    if not eval_formula(formula, s):
                        self.outcomes.append(Aborted(events, "test failed", path))
                        return []
                    cont = rest
                case Choice(left, right):
                    return [((left,) + rest, s, events + (("choice", 0),), path + (0,)),
                            ((right,) + rest, s, events + (("choice", 1),), path + (1,))]
                case Loop():
                    cont = (_LoopAt(head, 0),) + rest
                case _LoopAt(loop, count):
                    children = [(rest, s, events + (("loop", "exit"),), path + (0,))]
                    if count < self.budget.depth:
                        children.append(((loop.body, _LoopAt(loop, count + 1)) + rest, s,
                                         events + (("loop", "iter"),), path + (1,)))
                    return children
                case NondetAssign():
                    return self._nondet(cont, s, events, path)
                case ODE():
                    return self._ode(head, rest, s, events, path)
                case _:
                    raise TypeError(f"not a program: {head!r}")

    def _nondet(self, cont, s, events, path):
        block = []
        while True:
            cont = _normalize(cont)
            if cont and isinstance(cont[0], NondetAssign):
                block.append(cont[0].var)
                cont = cont[1:]
                continue
            break
        if not cont or not isinstance(cont[0], Test):
            raise UnboundedNondeterminism(
                f"'{block[-1]} := *' has no adjacent bounding test")
        test = cont[0].formula
        # later variables first, so earlier bounds may depend on them
        partial = [(s, events, path)]
        for idx in range(len(block) - 1, -1, -1):
            var = block[idx]
            pending = set(block[:idx + 1])
            nxt = []
            for sv, ev, pth in partial:
                known = {k: v for k, v in sv.items() if k not in pending}
                values = nondet_values(test, var, known, self.budget, pth)
                if not values:
                    self.outcomes.append(Aborted(ev, f"empty range for {var}", pth))
                for i, value in enumerate(values):
                    s2 = dict(sv)
                    s2[var] = value
                    nxt.append((s2, ev + (("sample", var, value),), pth + (i,)))
            partial = nxt
        return [(cont, sv, ev, pth) for sv, ev, pth in partial]

    def _ode(self, ode, rest, s, events, path):
        solution = flow_solution(ode, s)
        t_max = max_duration(ode, s, solution, self.budget.unbounded_span)
        if t_max is None:
            self.outcomes.append(Aborted(events, "domain false initially", path))
            return []
        if self.post is not None and self.budget.dense_monitor and _can_finish(rest):
            exits = tuple(("loop", "exit") for c in rest)
            for j in range(1, self.budget.dense + 1):
                tau = t_max * van_der_corput(j)
                mid = state_at(s, solution, tau)
                if not eval_formula(self.post, mid):
                    self.violations.append(Completed(
                        mid, events + (("dur", tau),) + exits,
                        path + (self.budget.durations + j - 1,) + (0,) * len(rest)))
        children = []
        seen = set()
        for i, tau in enumerate(ode_durations(t_max, self.budget.durations, path, self.budget.seed)):
            if tau in seen:
                continue
            seen.add(tau)
            children.append((rest, state_at(s, solution, tau), events + (("dur", tau),), path + (i,)))
        return children


def run(prog, s0, budget: ExplorationBudget | None = None) -> list:
    """All explored outcomes (Completed or Aborted), each with its event log."""
    ex = _Explorer(budget or ExplorationBudget())
    ex.explore(prog, as_valuation(s0))
    if ex.exhausted:
        raise BudgetExhausted(f"more than {ex.budget.max_branches} live branches")
    return ex.outcomes


# --- replay ----------------------------------------------------------------

def replay(prog, s0, events) -> RunOutcome:
    """Re-execute one run from its event log, deterministically."""
    events = tuple(events)
    pos = 0
    s = as_valuation(s0)
    cont = (prog,)

    def take(kind):
        nonlocal pos
        if pos >= len(events) or events[pos][0] != kind:
            got = events[pos] if pos < len(events) else "end of log"
            raise ReplayMismatch(f"expected a {kind!r} event, got {got!r}")
        pos += 1
        return events[pos - 1]

    while True:
        cont = _normalize(cont)
        if not cont:
            if pos != len(events):
                raise ReplayMismatch(f"{len(events) - pos} unused events")
            return Completed(s, events)
        head, rest = cont[0], cont[1:]
        match head:
            case Assign(var, term):
                s = dict(s)
                s[var] = Fraction(eval_term(term, s))
                cont = rest
            case NondetAssign(var):
                ev = take("sample")
                # a block is logged in sampling order; look the variable up by name
                s = dict(s)
                s[ev[1]] = Fraction(ev[2])
                cont = rest
            case Test(formula):
                if not eval_formula(formula, s):
                    return Aborted(events[:pos], "test failed")
                cont = rest
            case Choice(left, right):
                cont = ((left, right)[take("choice")[1]],) + rest
            case Loop():
                cont = (_LoopAt(head, 0),) + rest
            case _LoopAt(loop, count):
                if take("loop")[1] == "exit":
                    cont = rest
                else:
                    cont = (loop.body, _LoopAt(loop, count + 1)) + rest
            case ODE():
                tau = Fraction(take("dur")[1])
                solution = flow_solution(head, s)
                t_max = max_duration(head, s, solution, cap=tau)
                if t_max is None or tau < 0 or t_max < tau:
                    return Aborted(events[:pos], "duration leaves the domain")
                s = state_at(s, solution, tau)
                cont = rest
            case _:
                raise TypeError(f"not a program: {head!r}")


# --- box checking ------------------------------------------------------------

@dataclass(frozen=True)
class Counterexample:
    initial: dict
    events: tuple
    final: dict
    branch: tuple

    outcome = "counterexample"


@dataclass(frozen=True)
class NoCounterexampleFound:
    """No violation within the budget. This is not a proof of the box formula."""
    initial_states: int
    completed_runs: int

    outcome = "no-counterexample"


@dataclass(frozen=True)
class BudgetExhaustedVerdict:
    initial_states: int
    completed_runs: int
    detail: str = ""

    outcome = "budget-exhausted"


def setup_sampler(setup, budget: ExplorationBudget, base=None) -> list:
    """Initial valuations produced by running a setup program."""
    ex = _Explorer(budget)
    ex.explore(setup, as_valuation(base or {}))
    if ex.exhausted:
        raise BudgetExhausted("setup program exceeded the branch budget")
    return [o.valuation for o in ex.outcomes if isinstance(o, Completed)]


def check_box(init, prog, post, budget: ExplorationBudget | None = None,
              init_sampler: Iterable | None = None):
    """Search for a run from an ``init`` state that ends outside ``post``."""
    budget = budget or ExplorationBudget()
    states = [as_valuation(v) for v in (init_sampler or [])]
    n_init = completed = 0
    exhausted = False
    for index, s0 in enumerate(states):
        if not eval_formula(init, s0):
            continue
        n_init += 1
        ex = _Explorer(budget, post=post)
        ex.explore(prog, s0, stop_on_violation=False)
        completed += sum(isinstance(o, Completed) for o in ex.outcomes)
        exhausted = exhausted or ex.exhausted
        if ex.violations:
            best = min(ex.violations, key=lambda o: o.branch)
            return Counterexample(s0, best.events, best.valuation, (index,) + best.branch)
    if exhausted:
        return BudgetExhaustedVerdict(n_init, completed, f"more than {budget.max_branches} live branches")
    return NoCounterexampleFound(n_init, completed)


def check_problem(problem, budget: ExplorationBudget | None = None, init_sampler=None):
    budget = budget or ExplorationBudget()
    if init_sampler is None:
        if problem.setup is None:
            raise ValueError("problem has no setup block; pass init_sampler")
        init_sampler = setup_sampler(problem.setup, budget)
    return check_box(problem.init, problem.program, problem.post, budget, init_sampler)


def confirm(problem_or_prog, cex: Counterexample, post=None) -> bool:
    """Replay a counterexample and confirm it ends in the same violating state."""
    prog = getattr(problem_or_prog, "program", problem_or_prog)
    post = post if post is not None else problem_or_prog.post
    out = replay(prog, cex.initial, cex.events)
    return isinstance(out, Completed) and out.valuation == cex.final and not eval_formula(post, out.valuation)


# --- replay files --------------------------------------------------------------

def format_real(q: Fraction) -> str:
    """Decimal with 17 significant digits when that is exact, else ``p/q``."""
    f = float(q)
    if math.isfinite(f) and Fraction(f) == q:
        return format(f, ".17g")
    return f"{q.numerator}/{q.denominator}"


def read_real(text: str) -> Fraction:
    """Inverse of :func:`format_real`: decimals name the nearest float, ``p/q`` is exact."""
    if "/" in text:
        return Fraction(text)
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"not a finite real: {text!r}")
    return Fraction(value)


def dump_replay(cex: Counterexample) -> str:
    lines = ["# hybrid program counterexample replay"]
    lines += [f"branch {' '.join(map(str, cex.branch))}"]
    lines += [f"init {k} {format_real(v)}" for k, v in sorted(cex.initial.items())]
    for ev in cex.events:
        if ev[0] == "sample":
            lines.append(f"sample {ev[1]} {format_real(ev[2])}")
        elif ev[0] == "dur":
            lines.append(f"dur {format_real(ev[1])}")
        else:
            lines.append(f"{ev[0]} {ev[1]}")
    lines += [f"final {k} {format_real(v)}" for k, v in sorted(cex.final.items())]
    return "\n".join(lines) + "\n"


def load_replay(text: str) -> Counterexample:
    initial, final, events, branch = {}, {}, [], ()
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        kind = parts[0]
        try:
            if kind == "init":
                initial[parts[1]] = read_real(parts[2])
            elif kind == "final":
                final[parts[1]] = read_real(parts[2])
            elif kind == "sample":
                events.append(("sample", parts[1], read_real(parts[2])))
            elif kind == "dur":
                events.append(("dur", read_real(parts[1])))
            elif kind == "choice":
                events.append(("choice", int(parts[1])))
            elif kind == "loop":
                if parts[1] not in ("iter", "exit"):
                    raise ValueError(parts[1])
                events.append(("loop", parts[1]))
            elif kind == "branch":
                branch = tuple(int(x) for x in parts[1:])
            else:
                raise ValueError(kind)
        except (IndexError, ValueError) as exc:
            raise ValueError(f"replay line {n}: cannot read {raw!r}") from exc
    return Counterexample(initial, tuple(events), final, branch)


# --- controller extraction -------------------------------------------------------

def _seq_items(prog) -> list:
    if isinstance(prog, Seq):
        return _seq_items(prog.left) + _seq_items(prog.right)
    return [prog]


def extract_ctrl(prog):
    """The first choice in the body of the first loop: the controller by convention."""
    stack = [prog]
    while stack:
        node = stack.pop(0)
        if isinstance(node, Loop):
            for item in _seq_items(node.body):
                if isinstance(item, Choice):
                    return item
            raise ValueError("loop body has no choice to act as controller")
        if isinstance(node, (Seq, Choice)):
            stack += [node.left, node.right]
    raise ValueError("program has no loop")


def run_ctrl(ctrl, valuation, output: str = "as") -> Fraction:
    """Execute a deterministic controller fragment and read one output variable."""
    outs = [o for o in run(ctrl, valuation, ExplorationBudget(samples=1, durations=1))
            if isinstance(o, Completed)]
    values = {o.valuation[output] for o in outs}
    if len(values) != 1:
        raise HpRuntimeError(f"controller produced {len(values)} distinct values for {output!r}")
    return values.pop()
