"""Text grammar for formulas.

Grammar, whitespace-insensitive, with '#' comments running to end of line:

    formula   := or
    or        := and ('or' and)*
    and       := until ('and' until)*
    until     := unary (('U' | 'R') window unary)*
    unary     := 'not' unary | 'G' window unary | 'F' window unary | atom
    window    := '[' int ',' int ']'
    atom      := '(' formula ')' | predicate | region-name
    predicate := sum '>=' signed-number
    sum       := ['-'] term (('+' | '-') term)*
    term      := number ['*' yvar] | yvar

Temporal and `not` operators bind to the immediately following formula, so
`G[0,2] p and q` is `(G[0,2] p) and q`. Until/release chain to the left.
A bare region name expands to the conjunction of its face inequalities;
`not <region>` expands to the disjunction of the negated faces. Bare
numeric terms on the left of '>=' fold into the threshold.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .formula import (
    Always,
    Eventually,
    FormulaError,
    Interval,
    LinearPredicate,
    Not,
    Pred,
    RegionTable,
    Release,
    Until,
    conj,
    disj,
)

__all__ = ["ParseError", "parse"]


class ParseError(ValueError):
    """Syntax or lookup failure, carrying the 1-based source position."""

    def __init__(self, message, line, col):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<WS>\s+)
  | (?P<COMMENT>\#[^\n]*)
  | (?P<NUM>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<IDENT>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<GE>>=)
  | (?P<LBRACK>\[) | (?P<RBRACK>\])
  | (?P<LPAREN>\() | (?P<RPAREN>\))
  | (?P<COMMA>,) | (?P<STAR>\*) | (?P<PLUS>\+) | (?P<MINUS>-)
    """,
    re.VERBOSE,
)

_VAR_RE = re.compile(r"^y(\d+)$")


def _tokenize(text):
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("WS", "COMMENT"):
            tokens.append(_Token(kind, chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    tokens.append(_Token("EOF", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens, regions, p):
        self.tokens = tokens
        self.pos = 0
        self.regions = regions
        self.p = p

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind, what):
        tok = self.peek()
        if tok.kind != kind:
            got = tok.text or "end of input"
            raise ParseError(f"expected {what}, got {got!r}", tok.line, tok.col)
        return self.advance()

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.col)

    def _at_keyword(self, word):
        tok = self.peek()
        return tok.kind == "IDENT" and tok.text == word

    # precedence ladder

    def parse_formula(self):
        parts = [self.parse_and()]
        while self._at_keyword("or"):
            self.advance()
            parts.append(self.parse_and())
        return disj(*parts) if len(parts) > 1 else parts[0]

    def parse_and(self):
        parts = [self.parse_until()]
        while self._at_keyword("and"):
            self.advance()
            parts.append(self.parse_until())
        return conj(*parts) if len(parts) > 1 else parts[0]

    def parse_until(self):
        left = self.parse_unary()
        while self._at_keyword("U") or self._at_keyword("R"):
            op = self.advance()
            window = self.parse_window()
            right = self.parse_unary()
            node = Until if op.text == "U" else Release
            left = node(window, left, right)
        return left

    def parse_unary(self):
        tok = self.peek()
        if tok.kind == "IDENT" and tok.text == "not":
            self.advance()
            nxt = self.peek()
            if (
                nxt.kind == "IDENT"
                and nxt.text not in ("not", "G", "F")
                and not _VAR_RE.match(nxt.text)
            ):
                # bare `not <region>` expands directly to negated faces
                self.advance()
                return self._region(nxt, complement=True)
            return Not(self.parse_unary())
        if tok.kind == "IDENT" and tok.text in ("G", "F"):
            self.advance()
            window = self.parse_window()
            child = self.parse_unary()
            return (Always if tok.text == "G" else Eventually)(window, child)
        return self.parse_atom()

    def parse_atom(self):
        tok = self.peek()
        if tok.kind == "LPAREN":
            self.advance()
            inner = self.parse_formula()
            self.expect("RPAREN", "')'")
            return inner
        if tok.kind in ("NUM", "MINUS"):
            return self.parse_predicate()
        if tok.kind == "IDENT":
            if _VAR_RE.match(tok.text):
                return self.parse_predicate()
            if tok.text in _grammar_words():
                self.fail(f"unexpected keyword {tok.text!r}")
            self.advance()
            return self._region(tok, complement=False)
        self.fail(f"expected a formula, got {tok.text or 'end of input'!r}")

    # pieces

    def parse_window(self):
        self.expect("LBRACK", "'['")
        lo = self._window_bound()
        self.expect("COMMA", "','")
        hi = self._window_bound()
        closing = self.expect("RBRACK", "']'")
        if hi < lo:
            raise ParseError(f"reversed window [{lo},{hi}]", closing.line, closing.col)
        return Interval(lo, hi)

    def _window_bound(self):
        tok = self.peek()
        if tok.kind == "MINUS":
            self.fail("window bounds must be nonnegative")
        tok = self.expect("NUM", "a timestep")
        if not tok.text.isdigit():
            raise ParseError(
                f"window bounds must be whole timesteps, got {tok.text!r}", tok.line, tok.col
            )
        return int(tok.text)

    def _region(self, tok, complement):
        if self.regions is None or tok.text not in self.regions:
            raise ParseError(f"unknown region {tok.text!r}", tok.line, tok.col)
        try:
            if complement:
                return self.regions.complement(tok.text, self.p)
            return self.regions.conjunction(tok.text, self.p)
        except FormulaError as exc:
            raise ParseError(str(exc), tok.line, tok.col) from None

    def parse_predicate(self):
        coeffs = [0.0] * self.p
        shift = 0.0
        first = True
        while True:
            sign = 1.0
            tok = self.peek()
            if tok.kind == "MINUS":
                self.advance()
                sign = -1.0
            elif tok.kind == "PLUS" and not first:
                self.advance()
            elif not first:
                break
            dim, value = self._term()
            if dim is None:
                shift += sign * value
            else:
                coeffs[dim] += sign * value
            first = False
            if self.peek().kind not in ("PLUS", "MINUS"):
                break
        self.expect("GE", "'>='")
        offset = self._signed_number() - shift
        return Pred(LinearPredicate(tuple(coeffs), offset))

    def _term(self):
        tok = self.peek()
        if tok.kind == "NUM":
            self.advance()
            value = float(tok.text)
            if self.peek().kind == "STAR":
                self.advance()
                var = self.expect("IDENT", "a signal variable like y0")
                return self._var_dim(var), value
            return None, value
        if tok.kind == "IDENT" and _VAR_RE.match(tok.text):
            self.advance()
            return self._var_dim(tok), 1.0
        self.fail(f"expected a term, got {tok.text or 'end of input'!r}")

    def _var_dim(self, tok):
        m = _VAR_RE.match(tok.text)
        if not m:
            raise ParseError(f"expected a signal variable like y0, got {tok.text!r}", tok.line, tok.col)
        dim = int(m.group(1))
        if dim >= self.p:
            raise ParseError(
                f"signal has {self.p} dimensions, so {tok.text!r} is out of range",
                tok.line,
                tok.col,
            )
        return dim

    def _signed_number(self):
        sign = 1.0
        if self.peek().kind == "MINUS":
            self.advance()
            sign = -1.0
        tok = self.expect("NUM", "a number")
        return sign * float(tok.text)


def _grammar_words():
    return ("not", "and", "or", "G", "F", "U", "R")


def parse(text, regions=None, p=2):
    """Parse formula text into an AST.

    @param text:    formula source, possibly spanning several lines
    @param regions: RegionTable resolving bare region names, or None
    @param p:       signal dimension; out-of-range y-variables are rejected

    Raises ParseError with a 1-based line and column on any syntax error,
    unknown region, fractional or reversed window, or out-of-range
    dimension.
    """
    if regions is not None and not isinstance(regions, RegionTable):
        regions = RegionTable(regions)
    if p < 1:
        raise FormulaError("signal dimension p must be at least 1")
    parser = _Parser(_tokenize(text), regions, p)
    phi = parser.parse_formula()
    tok = parser.peek()
    if tok.kind != "EOF":
        raise ParseError(f"unexpected trailing input {tok.text!r}", tok.line, tok.col)
    return phi
