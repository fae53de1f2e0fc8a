"""Formula AST and parser for the conjunction/implication fragment.

Grammar (UTF-8 text):

    formula := conj ( "->" formula )?          # "->" binds loosest, right-assoc
    conj    := primary ( "&" primary )*        # "&" left-assoc
    primary := ATOM | "(" formula ")"
    ATOM    := [A-Za-z_][A-Za-z0-9_]*

There is no negation or disjunction; revised groundings are fresh atoms.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union


class FormulaSyntaxError(ValueError):
    """Formula text does not parse; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


@dataclass(frozen=True)
class Atom:
    symbol: str

    def __post_init__(self) -> None:
        if not self.symbol:
            raise ValueError("atom symbol must be non-empty")


@dataclass(frozen=True)
class Conj:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Impl:
    antecedent: "Formula"
    consequent: "Formula"


Formula = Union[Atom, Conj, Impl]

_TOKEN_RE = re.compile(r"(?P<atom>[A-Za-z_][A-Za-z0-9_]*)|(?P<arrow>->)|(?P<and>&)|(?P<lpar>\()|(?P<rpar>\))")


def _tokenize(text: str) -> Iterator[tuple[str, str, int]]:
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        match = _TOKEN_RE.match(text, pos)
        if match is None or match.lastgroup is None:
            raise FormulaSyntaxError(f"unknown token {text[pos]!r}", pos)
        yield match.lastgroup, match.group(match.lastgroup), pos
        pos = match.end()


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens = list(_tokenize(text))
        self.pos = 0

    def peek(self) -> tuple[str, str, int] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> tuple[str, str, int]:
        tok = self.peek()
        if tok is None:
            raise FormulaSyntaxError("unexpected end of formula", len(self.text))
        self.pos += 1
        return tok

    def parse_formula(self) -> Formula:
        left = self.parse_conj()
        tok = self.peek()
        if tok is not None and tok[0] == "arrow":
            self.next()
            right = self.parse_formula()
            return Impl(left, right)
        return left

    def parse_conj(self) -> Formula:
        node = self.parse_primary()
        while True:
            tok = self.peek()
            if tok is None or tok[0] != "and":
                return node
            self.next()
            node = Conj(node, self.parse_primary())

    def parse_primary(self) -> Formula:
        kind, value, offset = self.next()
        if kind == "atom":
            return Atom(value)
        if kind == "lpar":
            inner = self.parse_formula()
            tok = self.peek()
            if tok is None or tok[0] != "rpar":
                raise FormulaSyntaxError("expected ')'", tok[2] if tok else len(self.text))
            self.next()
            return inner
        raise FormulaSyntaxError(f"expected atom or '(', found {value!r}", offset)


def parse_formula(text: str) -> Formula:
    """Parse formula text; raises FormulaSyntaxError with a byte offset."""
    parser = _Parser(text)
    if parser.peek() is None:
        raise FormulaSyntaxError("empty formula", 0)
    formula = parser.parse_formula()
    tok = parser.peek()
    if tok is not None:
        raise FormulaSyntaxError(f"unexpected trailing token {tok[1]!r}", tok[2])
    return formula


def format_formula(formula: Formula) -> str:
    """Render with the minimal parentheses the grammar needs to round-trip."""
    if isinstance(formula, Atom):
        return formula.symbol
    if isinstance(formula, Conj):
        # right child re-parses into the left slot unless parenthesized
        left = format_formula(formula.left)
        if isinstance(formula.left, Impl):
            left = f"({left})"
        right = format_formula(formula.right)
        if isinstance(formula.right, (Impl, Conj)):
            right = f"({right})"
        return f"{left} & {right}"
    left = format_formula(formula.antecedent)
    if isinstance(formula.antecedent, Impl):
        left = f"({left})"
    return f"{left} -> {format_formula(formula.consequent)}"


def conjuncts(formula: Formula) -> tuple[Formula, ...]:
    """Flattened conjunct leaves; only Conj nodes flatten, so the leaves of
    `(a & b) & (c -> d)` are (a, b, c -> d)."""
    if isinstance(formula, Conj):
        return conjuncts(formula.left) + conjuncts(formula.right)
    return (formula,)


def atoms(formula: Formula) -> set[str]:
    """All atom symbols occurring in the formula."""
    if isinstance(formula, Atom):
        return {formula.symbol}
    if isinstance(formula, Conj):
        return atoms(formula.left) | atoms(formula.right)
    return atoms(formula.antecedent) | atoms(formula.consequent)
