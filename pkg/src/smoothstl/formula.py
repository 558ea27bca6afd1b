"""Abstract syntax trees for bounded-time temporal logic formulas.

A formula is a tree of inequality predicates, boolean connectives (not,
n-ary and/or) and time-bounded temporal operators (always, eventually,
until, release) interpreted over discrete-time vector signals. Nodes are
immutable and hashable, so formulas are safe to share freely, including
across threads.

The conjunction and disjunction constructors keep child lists flattened:
`and`/`or` never appear directly under a node of the same kind. This makes
the n-ary smooth semantics deterministic with respect to how a user groups
connectives in the source text.
"""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Union

import numpy as np

__all__ = [
    "FormulaError",
    "Interval",
    "LinearPredicate",
    "CallablePredicate",
    "Pred",
    "Not",
    "And",
    "Or",
    "Always",
    "Eventually",
    "Until",
    "Release",
    "Formula",
    "conj",
    "disj",
    "node_count",
    "is_nnf",
    "to_nnf",
    "horizon",
    "format_formula",
    "RegionTable",
]


class FormulaError(ValueError):
    """Raised for structurally invalid formulas, predicates or regions."""


def _check_finite_scalar(x, what):
    x = float(x)
    if not math.isfinite(x):
        raise FormulaError(f"{what} must be finite, got {x!r}")
    return x


@dataclass(frozen=True)
class LinearPredicate:
    """Affine inequality atom over a single signal sample.

    Encodes the constraint  coefficients . y_t >= offset.  Its robustness
    at time t is the signed margin  coefficients . y_t - offset, positive
    inside the half-space and negative outside.

    The optional label is cosmetic (used for readable region faces) and is
    ignored by equality comparisons.
    """

    coefficients: tuple
    offset: float
    label: str | None = field(default=None, compare=False)

    def __post_init__(self):
        coeffs = tuple(_check_finite_scalar(c, "coefficient") for c in self.coefficients)
        if not coeffs:
            raise FormulaError("predicate needs at least one coefficient")
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "offset", _check_finite_scalar(self.offset, "offset"))

    @property
    def dim(self):
        return len(self.coefficients)

    def value(self, y):
        """Robustness margin at one sample y (length dim)."""
        return float(np.dot(self.coefficients, y)) - self.offset

    def gradient(self, y):
        """d margin / d y, constant for an affine atom."""
        return np.asarray(self.coefficients, dtype=float)

    def negated(self):
        """Predicate whose margin is the exact negation of this one's."""
        lbl = None if self.label is None else "not " + self.label
        return LinearPredicate(tuple(-c for c in self.coefficients), -self.offset, label=lbl)


@dataclass(frozen=True)
class CallablePredicate:
    """Predicate backed by a user-supplied margin function.

    fn maps one output sample y_t (length dim) to a scalar margin.
    jacobian, when given, maps y_t to the margin's gradient; it is required
    for differentiation. No numeric fallback is injected: differentiating a
    formula containing a jacobian-less callable predicate is an error.
    """

    fn: Callable
    dim: int
    jacobian: Callable | None = None
    label: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if not callable(self.fn):
            raise FormulaError("fn must be callable")
        if self.jacobian is not None and not callable(self.jacobian):
            raise FormulaError("jacobian must be callable when given")
        if operator.index(self.dim) < 1:
            raise FormulaError("dim must be a positive integer")

    def value(self, y):
        return float(self.fn(np.asarray(y, dtype=float)))

    def gradient(self, y):
        if self.jacobian is None:
            name = self.label or "<unnamed>"
            raise FormulaError(
                f"callable predicate {name!r} has no jacobian; supply one to differentiate"
            )
        g = np.asarray(self.jacobian(np.asarray(y, dtype=float)), dtype=float)
        if g.shape != (self.dim,):
            raise FormulaError(
                f"jacobian returned shape {g.shape}, expected ({self.dim},)"
            )
        return g


Predicate = Union[LinearPredicate, CallablePredicate]


@dataclass(frozen=True)
class Interval:
    """Closed integer timestep window [lo, hi] with 0 <= lo <= hi."""

    lo: int
    hi: int

    def __post_init__(self):
        try:
            lo = operator.index(self.lo)
            hi = operator.index(self.hi)
        except TypeError:
            raise FormulaError("interval bounds must be whole timesteps") from None
        if lo < 0:
            raise FormulaError(f"interval lower bound must be nonnegative, got {lo}")
        if hi < lo:
            raise FormulaError(f"interval is reversed: [{lo},{hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def width(self):
        return self.hi - self.lo

    def __str__(self):
        return f"[{self.lo},{self.hi}]"


class _Formula:
    """Shared connective sugar for all node kinds."""

    __slots__ = ()

    def __and__(self, other):
        return conj(self, other)

    def __or__(self, other):
        return disj(self, other)

    def __invert__(self):
        return Not(self)

    def always(self, lo, hi):
        return Always(Interval(lo, hi), self)

    def eventually(self, lo, hi):
        return Eventually(Interval(lo, hi), self)

    def until(self, other, lo, hi):
        return Until(Interval(lo, hi), self, other)

    def release(self, other, lo, hi):
        return Release(Interval(lo, hi), self, other)

    def __str__(self):
        return format_formula(self)


def _require_formula(x, what="operand"):
    if not isinstance(x, _Formula):
        raise FormulaError(f"{what} must be a formula, got {type(x).__name__}")
    return x


@dataclass(frozen=True)
class Pred(_Formula):
    predicate: Predicate

    def __post_init__(self):
        if not isinstance(self.predicate, (LinearPredicate, CallablePredicate)):
            raise FormulaError("Pred wraps a LinearPredicate or CallablePredicate")


@dataclass(frozen=True)
class Not(_Formula):
    child: "Formula"

    def __post_init__(self):
        _require_formula(self.child, "negation operand")


def _check_connective_children(children, kind):
    children = tuple(children)
    if len(children) < 2:
        raise FormulaError(f"{kind} needs at least two children; use conj()/disj() to build")
    for c in children:
        _require_formula(c, f"{kind} child")
        if type(c).__name__ == kind:
            raise FormulaError(
                f"{kind} directly under {kind} is not allowed; child lists stay flattened"
            )
    return children


@dataclass(frozen=True)
class And(_Formula):
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", _check_connective_children(self.children, "And"))


@dataclass(frozen=True)
class Or(_Formula):
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", _check_connective_children(self.children, "Or"))


@dataclass(frozen=True)
class Always(_Formula):
    interval: Interval
    child: "Formula"

    def __post_init__(self):
        _require_formula(self.child, "always operand")


@dataclass(frozen=True)
class Eventually(_Formula):
    interval: Interval
    child: "Formula"

    def __post_init__(self):
        _require_formula(self.child, "eventually operand")


@dataclass(frozen=True)
class Until(_Formula):
    interval: Interval
    left: "Formula"
    right: "Formula"

    def __post_init__(self):
        _require_formula(self.left, "until operand")
        _require_formula(self.right, "until operand")


@dataclass(frozen=True)
class Release(_Formula):
    interval: Interval
    left: "Formula"
    right: "Formula"

    def __post_init__(self):
        _require_formula(self.left, "release operand")
        _require_formula(self.right, "release operand")


Formula = Union[Pred, Not, And, Or, Always, Eventually, Until, Release]


def _flatten(formulas, node_type):
    out = []
    for f in formulas:
        _require_formula(f)
        if isinstance(f, node_type):
            out.extend(f.children)
        else:
            out.append(f)
    return out


def conj(*formulas):
    """N-ary conjunction; splices nested And children, collapses arity 1."""
    flat = _flatten(formulas, And)
    if not flat:
        raise FormulaError("conjunction of nothing")
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(*formulas):
    """N-ary disjunction; splices nested Or children, collapses arity 1."""
    flat = _flatten(formulas, Or)
    if not flat:
        raise FormulaError("disjunction of nothing")
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def node_count(phi):
    """Number of AST nodes (predicate atoms count as one node each)."""
    if isinstance(phi, Pred):
        return 1
    if isinstance(phi, Not):
        return 1 + node_count(phi.child)
    if isinstance(phi, (And, Or)):
        return 1 + sum(node_count(c) for c in phi.children)
    if isinstance(phi, (Always, Eventually)):
        return 1 + node_count(phi.child)
    if isinstance(phi, (Until, Release)):
        return 1 + node_count(phi.left) + node_count(phi.right)
    raise FormulaError(f"not a formula node: {type(phi).__name__}")


def is_nnf(phi):
    """True when negation appears only directly above predicates."""
    if isinstance(phi, Pred):
        return True
    if isinstance(phi, Not):
        return isinstance(phi.child, Pred)
    if isinstance(phi, (And, Or)):
        return all(is_nnf(c) for c in phi.children)
    if isinstance(phi, (Always, Eventually)):
        return is_nnf(phi.child)
    if isinstance(phi, (Until, Release)):
        return is_nnf(phi.left) and is_nnf(phi.right)
    raise FormulaError(f"not a formula node: {type(phi).__name__}")


def to_nnf(phi):
    """Negation normal form.

    Pushes negations down to the atoms using the usual dualities:
    and/or, always/eventually and until/release swap under negation.
    The result has the same exact robustness as the input on every
    signal, is idempotent under repeated application, and at most
    doubles the node count.
    """
    return _nnf_pos(phi)


def _nnf_pos(phi):
    if isinstance(phi, Pred):
        return phi
    if isinstance(phi, Not):
        return _nnf_neg(phi.child)
    if isinstance(phi, And):
        return conj(*[_nnf_pos(c) for c in phi.children])
    if isinstance(phi, Or):
        return disj(*[_nnf_pos(c) for c in phi.children])
    if isinstance(phi, Always):
        return Always(phi.interval, _nnf_pos(phi.child))
    if isinstance(phi, Eventually):
        return Eventually(phi.interval, _nnf_pos(phi.child))
    if isinstance(phi, Until):
        return Until(phi.interval, _nnf_pos(phi.left), _nnf_pos(phi.right))
    if isinstance(phi, Release):
        return Release(phi.interval, _nnf_pos(phi.left), _nnf_pos(phi.right))
    raise FormulaError(f"not a formula node: {type(phi).__name__}")


def _nnf_neg(phi):
    if isinstance(phi, Pred):
        return Not(phi)
    if isinstance(phi, Not):
        return _nnf_pos(phi.child)
    if isinstance(phi, And):
        return disj(*[_nnf_neg(c) for c in phi.children])
    if isinstance(phi, Or):
        return conj(*[_nnf_neg(c) for c in phi.children])
    if isinstance(phi, Always):
        return Eventually(phi.interval, _nnf_neg(phi.child))
    if isinstance(phi, Eventually):
        return Always(phi.interval, _nnf_neg(phi.child))
    if isinstance(phi, Until):
        return Release(phi.interval, _nnf_neg(phi.left), _nnf_neg(phi.right))
    if isinstance(phi, Release):
        return Until(phi.interval, _nnf_neg(phi.left), _nnf_neg(phi.right))
    raise FormulaError(f"not a formula node: {type(phi).__name__}")


def horizon(phi):
    """Number of future timesteps the formula can look at from its start.

    A signal must provide samples at t .. t+horizon(phi) for evaluation
    at time t to be defined.
    """
    if isinstance(phi, Pred):
        return 0
    if isinstance(phi, Not):
        return horizon(phi.child)
    if isinstance(phi, (And, Or)):
        return max(horizon(c) for c in phi.children)
    if isinstance(phi, (Always, Eventually)):
        return phi.interval.hi + horizon(phi.child)
    if isinstance(phi, (Until, Release)):
        return phi.interval.hi + max(horizon(phi.left), horizon(phi.right))
    raise FormulaError(f"not a formula node: {type(phi).__name__}")


# Printing. Precedence levels, loosest first: or < and < until/release <
# unary (not, always, eventually) < atoms. The emitted text reparses to a
# structurally identical tree.

_PREC_OR = 1
_PREC_AND = 2
_PREC_UNTIL = 3
_PREC_UNARY = 4
_PREC_ATOM = 5


def format_formula(phi):
    """Render a formula in the textual grammar accepted by parse()."""
    return _fmt(phi, 0)


def _fmt(phi, min_prec):
    text, prec = _fmt_node(phi)
    if prec < min_prec:
        return "(" + text + ")"
    return text


def _fmt_node(phi):
    if isinstance(phi, Pred):
        return _fmt_predicate(phi.predicate), _PREC_ATOM
    if isinstance(phi, Not):
        return "not " + _fmt(phi.child, _PREC_UNARY), _PREC_UNARY
    if isinstance(phi, And):
        return " and ".join(_fmt(c, _PREC_UNTIL) for c in phi.children), _PREC_AND
    if isinstance(phi, Or):
        return " or ".join(_fmt(c, _PREC_AND) for c in phi.children), _PREC_OR
    if isinstance(phi, Always):
        return f"G{phi.interval} " + _fmt(phi.child, _PREC_UNARY), _PREC_UNARY
    if isinstance(phi, Eventually):
        return f"F{phi.interval} " + _fmt(phi.child, _PREC_UNARY), _PREC_UNARY
    if isinstance(phi, Until):
        left = _fmt(phi.left, _PREC_UNTIL)
        right = _fmt(phi.right, _PREC_UNARY)
        return f"{left} U{phi.interval} {right}", _PREC_UNTIL
    if isinstance(phi, Release):
        left = _fmt(phi.left, _PREC_UNTIL)
        right = _fmt(phi.right, _PREC_UNARY)
        return f"{left} R{phi.interval} {right}", _PREC_UNTIL
    raise FormulaError(f"not a formula node: {type(phi).__name__}")


def _fmt_predicate(pred):
    if isinstance(pred, CallablePredicate):
        raise FormulaError(
            "callable predicates have no textual form; only affine atoms print"
        )
    parts = []
    for d, c in enumerate(pred.coefficients):
        if c == 0.0:
            continue
        mag = repr(abs(c))
        if not parts:
            sign = "-" if c < 0 else ""
            parts.append(f"{sign}{mag}*y{d}")
        else:
            joiner = " - " if c < 0 else " + "
            parts.append(f"{joiner}{mag}*y{d}")
    if not parts:
        parts.append(f"{repr(0.0)}*y0")
    return "".join(parts) + f" >= {repr(pred.offset)}"


_RESERVED_WORDS = {"not", "and", "or", "G", "F", "U", "R"}


def _looks_like_signal_var(name):
    return len(name) > 1 and name[0] == "y" and name[1:].isdigit()


class RegionTable:
    """Named axis-aligned boxes over signal dimensions.

    A region maps a subset of signal dimensions to (lo, hi) bounds. The
    textual grammar lets a region name stand in for the conjunction of its
    face inequalities; `not <name>` expands to the disjunction of the
    negated faces, so membership and avoidance both stay in negation
    normal form after parsing.
    """

    def __init__(self, regions: Mapping[str, Mapping] | None = None):
        table = {}
        for name, faces in (regions or {}).items():
            table[name] = self._check_region(name, faces)
        self._table = table

    @staticmethod
    def _check_region(name, faces):
        if not isinstance(name, str) or not name.isidentifier():
            raise FormulaError(f"region name must be an identifier, got {name!r}")
        if name in _RESERVED_WORDS or _looks_like_signal_var(name):
            raise FormulaError(f"region name {name!r} collides with the grammar")
        if not faces:
            raise FormulaError(f"region {name!r} has no dimensions")
        checked = {}
        for dim, bounds in faces.items():
            d = operator.index(dim) if not isinstance(dim, str) else int(dim)
            if d < 0:
                raise FormulaError(f"region {name!r}: dimension must be nonnegative")
            lo, hi = bounds
            lo = _check_finite_scalar(lo, f"region {name!r} lower bound")
            hi = _check_finite_scalar(hi, f"region {name!r} upper bound")
            if not lo < hi:
                raise FormulaError(
                    f"region {name!r} dimension {d}: need lower < upper, got [{lo}, {hi}]"
                )
            checked[d] = (lo, hi)
        return dict(sorted(checked.items()))

    def __contains__(self, name):
        return name in self._table

    def __getitem__(self, name):
        return {d: b for d, b in self._table[name].items()}

    def __iter__(self):
        return iter(self._table)

    def __len__(self):
        return len(self._table)

    def __eq__(self, other):
        if not isinstance(other, RegionTable):
            return NotImplemented
        return self._table == other._table

    def __repr__(self):
        return f"RegionTable({self._table!r})"

    def names(self):
        return list(self._table)

    def items(self):
        return [(name, self[name]) for name in self._table]

    def _faces(self, name, p):
        if name not in self._table:
            raise FormulaError(f"unknown region {name!r}")
        faces = []
        for d, (lo, hi) in self._table[name].items():
            if d >= p:
                raise FormulaError(
                    f"region {name!r} uses dimension {d} but the signal has {p}"
                )
            unit = [0.0] * p
            unit[d] = 1.0
            faces.append(LinearPredicate(tuple(unit), lo, label=f"{name}: y{d} >= {lo}"))
            unit = [0.0] * p
            unit[d] = -1.0
            faces.append(LinearPredicate(tuple(unit), -hi, label=f"{name}: y{d} <= {hi}"))
        return faces

    def conjunction(self, name, p):
        """Membership formula: the and of all face inequalities."""
        return conj(*[Pred(f) for f in self._faces(name, p)])

    def complement(self, name, p):
        """Avoidance formula: the or of all negated faces, already in NNF."""
        return disj(*[Pred(f.negated()) for f in self._faces(name, p)])

    def inflated(self, margin, names=None):
        """Copy with selected regions grown by margin on every face."""
        margin = _check_finite_scalar(margin, "inflation margin")
        if margin < 0:
            raise FormulaError("inflation margin must be nonnegative")
        grown = {}
        for name in self._table:
            body = self[name]
            if names is None or name in names:
                body = {d: (lo - margin, hi + margin) for d, (lo, hi) in body.items()}
            grown[name] = body
        return RegionTable(grown)

    def to_json_dict(self):
        return {
            name: {str(d): [lo, hi] for d, (lo, hi) in self._table[name].items()}
            for name in self._table
        }

    @classmethod
    def from_json_dict(cls, data):
        regions = {}
        for name, faces in data.items():
            try:
                regions[name] = {int(d): tuple(b) for d, b in faces.items()}
            except (TypeError, ValueError) as exc:
                raise FormulaError(f"region {name!r}: malformed bounds") from exc
        return cls(regions)
