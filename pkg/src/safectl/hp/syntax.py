"""AST for hybrid programs, first-order formulas and polynomial terms.

Nodes are frozen dataclasses, so structural equality is ``==``. The printer
emits the ASCII concrete syntax with the fewest parentheses (or braces) that
still parse back to the same tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Tuple, Union


# --- terms ----------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    value: Fraction

    def __post_init__(self):
        value = Fraction(self.value)
        if value < 0:
            raise ValueError("constants are non-negative; use Neg for negative values")
        if not _terminates(value):
            raise ValueError(f"{value} has no finite decimal expansion")
        object.__setattr__(self, "value", value)


@dataclass(frozen=True)
class Add:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Mul:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Neg:
    operand: "Term"


@dataclass(frozen=True)
class Pow:
    base: "Term"
    exponent: int

    def __post_init__(self):
        if not (isinstance(self.exponent, int) and self.exponent >= 1):
            raise ValueError("exponents are positive integers")


Term = Union[Var, Const, Add, Mul, Neg, Pow]


def sub(left: Term, right: Term) -> Term:
    return Add(left, Neg(right))


# --- formulas -------------------------------------------------------------

COMPARISONS = (">=", ">", "<=", "<", "=")


@dataclass(frozen=True)
class Compare:
    op: str
    left: Term
    right: Term

    def __post_init__(self):
        if self.op not in COMPARISONS:
            raise ValueError(f"unknown comparison {self.op!r}")


@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class FalseF:
    pass


@dataclass(frozen=True)
class Not:
    operand: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Iff:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Forall:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Formula"


Formula = Union[Compare, TrueF, FalseF, Not, And, Or, Implies, Iff, Forall, Exists]


# --- programs -------------------------------------------------------------

@dataclass(frozen=True)
class Assign:
    var: str
    term: Term


@dataclass(frozen=True)
class NondetAssign:
    var: str


@dataclass(frozen=True)
class Test:
    formula: Formula


@dataclass(frozen=True)
class ODE:
    flows: Tuple[Tuple[str, Term], ...]
    domain: Formula = TrueF()

    def __post_init__(self):
        flows = tuple((str(v), t) for v, t in self.flows)
        if not flows:
            raise ValueError("an ODE needs at least one equation")
        names = [v for v, _ in flows]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate ODE variables in {names}")
        object.__setattr__(self, "flows", flows)


@dataclass(frozen=True)
class Choice:
    left: "Program"
    right: "Program"


@dataclass(frozen=True)
class Seq:
    left: "Program"
    right: "Program"


@dataclass(frozen=True)
class Loop:
    body: "Program"


Program = Union[Assign, NondetAssign, Test, ODE, Choice, Seq, Loop]


def desugar_if(condition: Formula, then: Program, otherwise: Program | None = None) -> Program:
    """``if (P) a else b`` as ``(?P; a) ++ (?!P; b)``; no else means ``?!P``."""
    negated = Test(Not(condition))
    return Choice(Seq(Test(condition), then),
                  negated if otherwise is None else Seq(negated, otherwise))


@dataclass(frozen=True)
class BoxProblem:
    """``init -> [program] post`` with an optional setup program for sampling."""
    init: Formula
    program: Program
    post: Formula
    setup: Program | None = None


# --- printing -------------------------------------------------------------

# binding strength; a child printed below its slot's minimum gets parentheses
P_IFF, P_IMPLIES, P_OR, P_AND, P_CMP, P_NOT = 1, 2, 3, 4, 5, 6
P_ADD, P_MUL, P_NEG, P_POW, P_ATOM = 7, 8, 9, 10, 11


def _terminates(q: Fraction) -> bool:
    d = q.denominator
    for f in (2, 5):
        while d % f == 0:
            d //= f
    return d == 1


def format_const(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    # scale to an integer by the smallest power of ten
    scale, k = 1, 0
    while (q * scale).denominator != 1:
        scale *= 10
        k += 1
    n = q.numerator * scale // q.denominator
    text = str(n).rjust(k + 1, "0")
    return f"{text[:-k]}.{text[-k:]}"


def precedence(node) -> int:
    table = {
        Iff: P_IFF, Implies: P_IMPLIES, Or: P_OR, And: P_AND, Compare: P_CMP,
        Not: P_NOT, Forall: P_NOT, Exists: P_NOT, TrueF: P_ATOM, FalseF: P_ATOM,
        Add: P_ADD, Mul: P_MUL, Neg: P_NEG, Pow: P_POW, Var: P_ATOM, Const: P_ATOM,
    }
    return table[type(node)]


def _wrap(node, minimum: int) -> str:
    text = _expr(node)
    return f"({text})" if precedence(node) < minimum else text


def _expr(node) -> str:
    match node:
        case Var(name):
            return name
        case Const(value):
            return format_const(value)
        case Add(left, Neg(inner)):
            return f"{_wrap(left, P_ADD)} - {_wrap(inner, P_MUL)}"
        case Add(left, right):
            return f"{_wrap(left, P_ADD)} + {_wrap(right, P_MUL)}"
        case Mul(left, right):
            return f"{_wrap(left, P_MUL)}*{_wrap(right, P_NEG)}"
        case Neg(operand):
            return f"-{_wrap(operand, P_NEG)}"
        case Pow(base, exponent):
            return f"{_wrap(base, P_ATOM)}^{exponent}"
        case Compare(op, left, right):
            return f"{_wrap(left, P_ADD)} {op} {_wrap(right, P_ADD)}"
        case TrueF():
            return "true"
        case FalseF():
            return "false"
        case Not(operand):
            return f"!{_wrap(operand, P_CMP)}"
        case And(left, right):
            return f"{_wrap(left, P_AND)} & {_wrap(right, P_CMP)}"
        case Or(left, right):
            return f"{_wrap(left, P_OR)} | {_wrap(right, P_AND)}"
        case Implies(left, right):
            return f"{_wrap(left, P_OR)} -> {_wrap(right, P_IMPLIES)}"
        case Iff(left, right):
            return f"{_wrap(left, P_IMPLIES)} <-> {_wrap(right, P_IMPLIES)}"
        case Forall(var, body):
            return f"\\forall {var} {_wrap(body, P_CMP)}"
        case Exists(var, body):
            return f"\\exists {var} {_wrap(body, P_CMP)}"
    raise TypeError(f"not a term or formula: {node!r}")


# program levels: choice < sequence < statement
G_CHOICE, G_SEQ, G_STMT = 0, 1, 2


def _program_level(node) -> int:
    if isinstance(node, Choice):
        return G_CHOICE
    if isinstance(node, Seq):
        return G_SEQ
    return G_STMT


def _group(node, minimum: int) -> str:
    text = _program(node)
    return f"{{{text}}}" if _program_level(node) < minimum else text


def _test_text(f) -> str:
    if isinstance(f, (TrueF, FalseF)):
        return f"?{_expr(f)}"
    return f"?({_expr(f)})"


def _program(node) -> str:
    match node:
        case Assign(var, term):
            return f"{var} := {_expr(term)}"
        case NondetAssign(var):
            return f"{var} := *"
        case Test(formula):
            return _test_text(formula)
        case ODE(flows, domain):
            eqs = ", ".join(f"{v}' = {_expr(t)}" for v, t in flows)
            if isinstance(domain, TrueF):
                return f"{{{eqs}}}"
            return f"{{{eqs} & {_expr(domain)}}}"
        case Loop(body):
            return f"{{{_program(body)}}}*"
        case Seq() | Choice():
            # walk the right spine iteratively so long programs do not recurse deeply
            kind = type(node)
            sep, minimum = ("; ", G_STMT) if kind is Seq else (" ++ ", G_SEQ)
            parts = []
            while isinstance(node, kind):
                parts.append(_group(node.left, minimum))
                node = node.right
            parts.append(_group(node, minimum))
            return sep.join(parts)
    raise TypeError(f"not a program: {node!r}")


def pretty_print(node) -> str:
    """Canonical single-line concrete syntax for a term, formula or program."""
    if isinstance(node, BoxProblem):
        head = "" if node.setup is None else f"setup {{{_program(node.setup)}}}\n"
        return f"{head}{_wrap(node.init, P_OR)} -> [{_program(node.program)}] {_expr(node.post)}"
    if isinstance(node, (Assign, NondetAssign, Test, ODE, Choice, Seq, Loop)):
        return _program(node)
    return _expr(node)
