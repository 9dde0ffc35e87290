"""Dependency expressions and their three-valued evaluation.

Kconfig option values form the ordered domain n < m < y (0, 1, 2).
Conjunction is min, disjunction is max, negation is 2 - x.  Equality
tests collapse to y/n.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Union

from ..errors import KconfigSyntaxError, UnsupportedConstruct


class Tristate(enum.IntEnum):
    N = 0
    M = 1
    Y = 2

    def __str__(self) -> str:
        return self.name.lower()

    @classmethod
    def from_text(cls, text: str) -> "Tristate":
        try:
            return {"n": cls.N, "m": cls.M, "y": cls.Y}[text]
        except KeyError:
            raise ValueError(f"not a tristate literal: {text!r}") from None


TRISTATE_NAMES = ("y", "m", "n")


@dataclass(frozen=True)
class SymbolRef:
    name: str


@dataclass(frozen=True)
class ConstTristate:
    value: Tristate


@dataclass(frozen=True)
class Not:
    operand: "DependencyExpr"


@dataclass(frozen=True)
class And:
    left: "DependencyExpr"
    right: "DependencyExpr"


@dataclass(frozen=True)
class Or:
    left: "DependencyExpr"
    right: "DependencyExpr"


@dataclass(frozen=True)
class Eq:
    operand: "DependencyExpr"
    literal: str


@dataclass(frozen=True)
class Neq:
    operand: "DependencyExpr"
    literal: str


DependencyExpr = Union[SymbolRef, ConstTristate, Not, And, Or, Eq, Neq]


def evaluate_expr(expr: DependencyExpr, assignment: Mapping[str, Tristate]) -> Tristate:
    """Evaluate an expression under a symbol->tristate assignment.

    Symbols missing from the assignment (unresolved externals included)
    evaluate to n.  Total on every well-formed AST.
    """
    if isinstance(expr, SymbolRef):
        return assignment.get(expr.name, Tristate.N)
    if isinstance(expr, ConstTristate):
        return expr.value
    if isinstance(expr, Not):
        return Tristate(2 - evaluate_expr(expr.operand, assignment))
    if isinstance(expr, And):
        return min(evaluate_expr(expr.left, assignment),
                   evaluate_expr(expr.right, assignment))
    if isinstance(expr, Or):
        return max(evaluate_expr(expr.left, assignment),
                   evaluate_expr(expr.right, assignment))
    if isinstance(expr, (Eq, Neq)):
        value = evaluate_expr(expr.operand, assignment)
        # A tristate value only ever equals a y/m/n literal; comparisons
        # against strings or numbers are n by definition of the subset.
        hit = expr.literal in TRISTATE_NAMES and value == Tristate.from_text(expr.literal)
        if isinstance(expr, Neq):
            hit = not hit
        return Tristate.Y if hit else Tristate.N
    raise TypeError(f"not a dependency expression: {expr!r}")


def expr_symbols(expr: DependencyExpr) -> list[str]:
    """All referenced symbol names, in first-occurrence order, deduplicated."""
    seen: dict[str, None] = {}

    def walk(node: DependencyExpr) -> None:
        if isinstance(node, SymbolRef):
            seen.setdefault(node.name)
        elif isinstance(node, Not):
            walk(node.operand)
        elif isinstance(node, (And, Or)):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, (Eq, Neq)):
            walk(node.operand)

    walk(expr)
    return list(seen)


def conjoin(*exprs: DependencyExpr | None) -> DependencyExpr | None:
    """AND together the non-None expressions; None when all are None."""
    acc: DependencyExpr | None = None
    for e in exprs:
        if e is None:
            continue
        acc = e if acc is None else And(acc, e)
    return acc


# Precedence levels for rendering: || < && < ! < atom.
_PREC = {Or: 1, And: 2, Not: 3}


def expr_to_text(expr: DependencyExpr) -> str:
    """Render in Kconfig syntax with minimal parentheses (canonical form)."""

    def render(node: DependencyExpr, parent_prec: int) -> str:
        if isinstance(node, SymbolRef):
            return node.name
        if isinstance(node, ConstTristate):
            return str(node.value)
        if isinstance(node, (Eq, Neq)):
            op = "=" if isinstance(node, Eq) else "!="
            return f"{render(node.operand, 4)} {op} {node.literal}"
        if isinstance(node, Not):
            return "!" + render(node.operand, _PREC[Not])
        op = "&&" if isinstance(node, And) else "||"
        prec = _PREC[type(node)]
        text = f"{render(node.left, prec)} {op} {render(node.right, prec)}"
        return f"({text})" if prec < parent_prec else text

    return render(expr, 0)


# --- Expression parsing ------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<op>&&|\|\||!=|=|!|\(|\))
      | (?P<str>"(?:\\.|[^"\\])*"|'(?:\\.|[^'\\])*')
      | (?P<word>[A-Za-z0-9_][A-Za-z0-9_.-]*)
      | (?P<macro>\$\()
      | (?P<cmp><=|>=|<|>)
    )""",
    re.VERBOSE,
)


def _tokenize(text: str, filename: str, line: int) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            if text[pos:].strip() == "":
                break
            raise KconfigSyntaxError(
                f"cannot tokenize expression at {text[pos:]!r}", filename, line)
        if m.lastgroup == "macro":
            raise UnsupportedConstruct("preprocessor macro $(...)", filename, line)
        if m.lastgroup == "cmp":
            raise UnsupportedConstruct(f"relational operator {m.group()!r}", filename, line)
        tokens.append(m.group().strip())
        pos = m.end()
    return tokens


class _ExprParser:
    """Recursive descent over: or > and > not > comparison > atom."""

    def __init__(self, tokens: list[str], filename: str, line: int):
        self.tokens = tokens
        self.pos = 0
        self.filename = filename
        self.line = line

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise KconfigSyntaxError("unexpected end of expression",
                                     self.filename, self.line)
        self.pos += 1
        return tok

    def parse(self) -> DependencyExpr:
        expr = self.parse_or()
        if self.peek() is not None:
            raise KconfigSyntaxError(f"trailing tokens in expression: {self.peek()!r}",
                                     self.filename, self.line)
        return expr

    def parse_or(self) -> DependencyExpr:
        left = self.parse_and()
        while self.peek() == "||":
            self.take()
            left = Or(left, self.parse_and())
        return left

    def parse_and(self) -> DependencyExpr:
        left = self.parse_not()
        while self.peek() == "&&":
            self.take()
            left = And(left, self.parse_not())
        return left

    def parse_not(self) -> DependencyExpr:
        if self.peek() == "!":
            self.take()
            return Not(self.parse_not())
        return self.parse_cmp()

    def parse_cmp(self) -> DependencyExpr:
        left = self.parse_atom()
        if self.peek() in ("=", "!="):
            op = self.take()
            rhs = self.take()
            if rhs in ("(", ")", "!", "&&", "||", "=", "!="):
                raise KconfigSyntaxError(f"bad comparison operand {rhs!r}",
                                         self.filename, self.line)
            literal = _strip_quotes(rhs)
            if not isinstance(left, (SymbolRef, ConstTristate)):
                raise KconfigSyntaxError("comparison left side must be a symbol",
                                         self.filename, self.line)
            return Eq(left, literal) if op == "=" else Neq(left, literal)
        return left

    def parse_atom(self) -> DependencyExpr:
        tok = self.take()
        if tok == "(":
            inner = self.parse_or()
            if self.take() != ")":
                raise KconfigSyntaxError("missing closing parenthesis",
                                         self.filename, self.line)
            return inner
        if tok in ("&&", "||", "!", "=", "!=", ")"):
            raise KconfigSyntaxError(f"unexpected token {tok!r}",
                                     self.filename, self.line)
        if tok in TRISTATE_NAMES:
            return ConstTristate(Tristate.from_text(tok))
        if tok.startswith(('"', "'")):
            # Bare string atoms only make sense as comparison operands.
            raise KconfigSyntaxError("string literal outside comparison",
                                     self.filename, self.line)
        return SymbolRef(tok)


def _strip_quotes(text: str) -> str:
    if len(text) >= 2 and text[0] == text[-1] and text[0] in ('"', "'"):
        return text[1:-1].replace('\\"', '"').replace("\\'", "'")
    return text


def parse_expr(text: str, filename: str = "?", line: int = 0) -> DependencyExpr:
    """Parse a Kconfig dependency expression string into an AST."""
    tokens = _tokenize(text, filename, line)
    if not tokens:
        raise KconfigSyntaxError("empty expression", filename, line)
    return _ExprParser(tokens, filename, line).parse()


def all_assignments(symbols: list[str]) -> Iterator[dict[str, Tristate]]:
    """Every symbol->tristate mapping over the given names (3^k of them)."""
    if not symbols:
        yield {}
        return
    head, rest = symbols[0], symbols[1:]
    for partial in all_assignments(rest):
        for value in (Tristate.N, Tristate.M, Tristate.Y):
            yield {head: value, **partial}
