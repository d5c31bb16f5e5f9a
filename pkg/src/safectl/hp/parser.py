"""Parser for the ASCII hybrid-program syntax.

One precedence-climbing routine parses terms and formulas together and
checks sorts as it builds nodes, so ``(x + 1) >= 2`` and ``(x >= 1) & p``
need no lookahead to tell term parentheses from formula parentheses.
The grammar is written out in ``docs/grammar.md``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from safectl.hp.syntax import (
    Add, And, Assign, BoxProblem, Choice, Compare, Const, Exists, FalseF, Forall, Iff,
    Implies, Loop, Mul, Neg, NondetAssign, Not, ODE, Or, Pow, Seq, Test, TrueF, Var,
    desugar_if, P_ADD, P_AND, P_CMP, P_IFF, P_IMPLIES, P_MUL, P_NEG, P_OR,
)

KEYWORDS = {"if", "else", "true", "false", "setup"}


class HpSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int, expected=()):
        self.message = message
        self.line = line
        self.column = column
        self.expected = tuple(sorted(set(expected)))
        hint = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"line {line}, column {column}: {message}{hint}")


@dataclass(frozen=True)
class Token:
    kind: str       # NUM, IDENT, EOF, or the symbol / keyword itself
    text: str
    line: int
    column: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*|/\*.*?\*/)
  | (?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<quant>\\forall|\\exists)
  | (?P<sym><->|->|:=|\+\+|>=|<=|[-+*^(){}\[\];,&|!?'=<>])
""", re.VERBOSE | re.DOTALL)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise HpSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        lexeme = m.group()
        col = pos - line_start + 1
        if kind == "num":
            tokens.append(Token("NUM", lexeme, line, col))
        elif kind == "ident":
            tokens.append(Token(lexeme if lexeme in KEYWORDS else "IDENT", lexeme, line, col))
        elif kind in ("quant", "sym"):
            tokens.append(Token(lexeme, lexeme, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            line_start = pos + lexeme.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("EOF", "end of input", line, pos - line_start + 1))
    return tokens


# binary operator -> (precedence, associativity)
_BINARY = {
    "<->": (P_IFF, "none"), "->": (P_IMPLIES, "right"), "|": (P_OR, "left"),
    "&": (P_AND, "left"), ">=": (P_CMP, "none"), ">": (P_CMP, "none"),
    "<=": (P_CMP, "none"), "<": (P_CMP, "none"), "=": (P_CMP, "none"),
    "+": (P_ADD, "left"), "-": (P_ADD, "left"), "*": (P_MUL, "left"),
}
_LOGICAL = {"<->": Iff, "->": Implies, "|": Or, "&": And}
_TERM_TYPES = (Var, Const, Add, Mul, Neg, Pow)
_STMT_START = {"IDENT", "?", "{", "if"}


def _fold_right(cls, items):
    node = items[-1]
    for item in reversed(items[:-1]):
        node = cls(item, node)
    return node


def _is_term(node) -> bool:
    return isinstance(node, _TERM_TYPES)


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    # --- token helpers

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def advance(self) -> Token:
        t = self.tokens[self.pos]
        if t.kind != "EOF":
            self.pos += 1
        return t

    def error(self, message, expected=(), tok: Token | None = None):
        t = tok or self.tok
        raise HpSyntaxError(message, t.line, t.column, expected)

    def expect(self, kind: str) -> Token:
        if self.tok.kind != kind:
            self.error(f"unexpected {self.tok.text!r}", [kind])
        return self.advance()

    # --- terms and formulas

    def expr(self, min_prec: int):
        left = self.prefix()
        last_nonassoc = None
        while True:
            t = self.tok
            info = _BINARY.get(t.kind)
            if info is None or info[0] < min_prec:
                return left
            prec, assoc = info
            if assoc == "none" and last_nonassoc == prec:
                self.error(f"{t.text!r} does not chain; add parentheses")
            self.advance()
            right = self.expr(prec if assoc == "right" else prec + 1)
            left = self.build(t, left, right)
            last_nonassoc = prec if assoc == "none" else None

    def build(self, op: Token, left, right):
        kind = op.kind
        if kind in _LOGICAL:
            for side in (left, right):
                if _is_term(side):
                    self.error(f"{kind!r} needs formulas on both sides", tok=op)
            return _LOGICAL[kind](left, right)
        for side in (left, right):
            if not _is_term(side):
                self.error(f"{kind!r} needs terms on both sides", tok=op)
        if kind == "+":
            return Add(left, right)
        if kind == "-":
            return Add(left, Neg(right))
        if kind == "*":
            return Mul(left, right)
        return Compare(kind, left, right)

    def prefix(self):
        t = self.tok
        if t.kind == "-":
            self.advance()
            operand = self.expr(P_NEG)
            if not _is_term(operand):
                self.error("unary minus needs a term", tok=t)
            return Neg(operand)
        if t.kind == "!":
            self.advance()
            return Not(self.formula_operand(P_CMP, t))
        if t.kind in ("\\forall", "\\exists"):
            self.advance()
            var = self.expect("IDENT").text
            body = self.formula_operand(P_CMP, t)
            return Forall(var, body) if t.kind == "\\forall" else Exists(var, body)
        return self.postfix(self.primary())

    def formula_operand(self, prec, op: Token):
        node = self.expr(prec)
        if _is_term(node):
            self.error(f"{op.text!r} needs a formula", tok=op)
        return node

    def primary(self):
        t = self.tok
        if t.kind == "NUM":
            self.advance()
            return Const(Fraction(t.text))
        if t.kind == "IDENT":
            self.advance()
            return Var(t.text)
        if t.kind == "true":
            self.advance()
            return TrueF()
        if t.kind == "false":
            self.advance()
            return FalseF()
        if t.kind == "(":
            self.advance()
            node = self.expr(P_IFF)
            self.expect(")")
            return node
        self.error(f"unexpected {t.text!r}", ["NUM", "IDENT", "true", "false", "(", "-", "!", "\\forall", "\\exists"])

    def postfix(self, node):
        if self.tok.kind != "^":
            return node
        op = self.advance()
        if not _is_term(node):
            self.error("'^' needs a term base", tok=op)
        t = self.tok
        if t.kind != "NUM" or not t.text.isdigit() or int(t.text) < 1:
            self.error("exponent must be a positive integer literal", ["NUM"])
        self.advance()
        if self.tok.kind == "^":
            self.error("'^' does not chain; add parentheses")
        return Pow(node, int(t.text))

    def term(self):
        start = self.tok
        node = self.expr(P_ADD)
        if not _is_term(node):
            self.error("expected a term", tok=start)
        return node

    def formula(self, min_prec: int = P_IFF):
        start = self.tok
        node = self.expr(min_prec)
        if _is_term(node):
            self.error("expected a formula, found a term", tok=start)
        return node

    # --- programs

    def program(self):
        branches = [self.sequence()]
        while self.tok.kind == "++":
            self.advance()
            branches.append(self.sequence())
        return _fold_right(Choice, branches)

    def sequence(self):
        items = []
        while True:
            items.append(self.statement())
            # a statement closed by a brace may be followed without ';'
            ended_with_brace = self._closed_by_brace()
            if self.tok.kind == ";":
                self.advance()
                if self.tok.kind not in _STMT_START:
                    break             # trailing semicolon
            elif not (ended_with_brace and self.tok.kind in _STMT_START):
                break
        return _fold_right(Seq, items)

    def _closed_by_brace(self) -> bool:
        prev = self.tokens[self.pos - 1]
        before = self.tokens[self.pos - 2] if self.pos >= 2 else None
        return prev.kind == "}" or (prev.kind == "*" and before is not None and before.kind == "}")

    def statement(self):
        t = self.tok
        if t.kind == "IDENT":
            self.advance()
            self.expect(":=")
            if self.tok.kind == "*" :
                self.advance()
                return NondetAssign(t.text)
            return Assign(t.text, self.term())
        if t.kind == "?":
            self.advance()
            return Test(self.formula())
        if t.kind == "if":
            return self.if_statement()
        if t.kind == "{":
            if self.peek().kind == "IDENT" and self.peek(2).kind == "'":
                return self.ode()
            self.advance()
            body = self.program()
            self.expect("}")
            if self.tok.kind == "*":
                self.advance()
                return Loop(body)
            return body
        self.error(f"unexpected {t.text!r}", ["IDENT", "?", "{", "if"])

    def if_statement(self):
        self.expect("if")
        self.expect("(")
        cond = self.formula()
        self.expect(")")
        then = self.block()
        if self.tok.kind != "else":
            return desugar_if(cond, then)
        self.advance()
        if self.tok.kind == "if":
            return desugar_if(cond, then, self.if_statement())
        return desugar_if(cond, then, self.block())

    def block(self):
        self.expect("{")
        body = self.program()
        self.expect("}")
        return body

    def ode(self):
        self.expect("{")
        flows = []
        while True:
            name = self.expect("IDENT")
            self.expect("'")
            self.expect("=")
            flows.append((name.text, self.term()))
            if self.tok.kind != ",":
                break
            self.advance()
        domain = TrueF()
        if self.tok.kind == "&":
            self.advance()
            domain = self.formula()
        self.expect("}")
        names = [v for v, _ in flows]
        if len(set(names)) != len(names):
            self.error(f"duplicate ODE variables in {names}")
        return ODE(tuple(flows), domain)

    def problem(self):
        setup = None
        if self.tok.kind == "setup":
            self.advance()
            setup = self.block()
        init = self.formula(P_OR)
        self.expect("->")
        self.expect("[")
        prog = self.program()
        self.expect("]")
        post = self.formula()
        return BoxProblem(init, prog, post, setup)

    def finish(self, node):
        if self.tok.kind != "EOF":
            self.error(f"unexpected {self.tok.text!r} after complete input", ["EOF"])
        return node


def parse_term(text: str):
    p = _Parser(text)
    return p.finish(p.term())


def parse_formula(text: str):
    p = _Parser(text)
    return p.finish(p.formula())


def parse_program(text: str):
    p = _Parser(text)
    return p.finish(p.program())


def parse_problem(text: str) -> BoxProblem:
    """Parse ``[setup {prog}] init -> [prog] post``."""
    p = _Parser(text)
    return p.finish(p.problem())
