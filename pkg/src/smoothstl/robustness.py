"""Robust semantics for formulas over discrete-time signals.

Three interchangeable semantics share one recursion over the formula tree:

  exact   true min/max. The sign of the result decides satisfaction.
  ef      every min is replaced by a log-sum-exp soft minimum and every
          max by a Boltzmann-weighted soft maximum. Both substitutions
          under-approximate, so a positive smooth value still certifies
          satisfaction, and both are smooth in the signal, which is what
          the gradient and synthesis modules rely on.
  lse     the classical log-sum-exp pair. Its soft maximum sits above the
          true maximum, so a positive value proves nothing; it exists as
          a baseline to compare against.

The smooth semantics require negation normal form (use to_nnf first):
negation is folded into the atoms so that only soft minima and maxima
remain, keeping every step differentiable and one-sided.

Sharpness conventions: k1 > 0 tightens the soft minimum (gap at most
log(m)/k1 for m arguments), k2 >= 0 tightens the soft maximum, with
k2 = 0 degenerating to the arithmetic mean. The lse baseline uses a
single sharpness k > 0 for both.
"""

from __future__ import annotations

import csv
import math
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass

import numpy as np

from .formula import (
    And,
    Always,
    CallablePredicate,
    Eventually,
    FormulaError,
    Not,
    Or,
    Pred,
    Release,
    Until,
    horizon,
    is_nnf,
)

__all__ = [
    "SemanticsError",
    "Signal",
    "SemanticsConfig",
    "EXACT",
    "smooth_min",
    "smooth_max",
    "lse_min",
    "lse_max",
    "min_error_bound",
    "max_error_bound",
    "evaluate",
    "OperatorCounter",
    "count_operator_evals",
    "save_signal_csv",
    "load_signal_csv",
]


class SemanticsError(ValueError):
    """Raised when a formula/signal/configuration combination is invalid."""


class Signal:
    """A finite discrete-time signal: samples y_0 .. y_T, each of length p.

    Values are stored as a read-only float array of shape (T+1, p). A 1-D
    input is treated as a scalar signal of shape (T+1, 1). All entries must
    be finite.
    """

    __slots__ = ("values",)

    def __init__(self, values):
        arr = np.asarray(values, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise SemanticsError(f"signal must be 2-D (time by dimension), got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise SemanticsError("signal needs at least one sample of at least one dimension")
        if not np.isfinite(arr).all():
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise SemanticsError(f"signal has a non-finite entry at t={bad[0]}, dim={bad[1]}")
        arr = arr.copy()
        arr.setflags(write=False)
        self.values = arr

    @property
    def p(self):
        return self.values.shape[1]

    @property
    def T(self):
        """Index of the last sample."""
        return self.values.shape[0] - 1

    def __len__(self):
        return self.values.shape[0]

    def sample(self, t):
        return self.values[t]

    def __repr__(self):
        return f"Signal(T={self.T}, p={self.p})"


def as_signal(signal):
    return signal if isinstance(signal, Signal) else Signal(signal)


@dataclass(frozen=True)
class SemanticsConfig:
    """Which semantics to evaluate, and at what sharpness.

    kind is one of "exact", "ef", "lse", "agm". Build instances through
    the classmethods; they validate the sharpness parameters each kind
    needs ("agm" is a recognized name whose evaluation is intentionally
    unimplemented).
    """

    kind: str
    k1: float | None = None
    k2: float | None = None
    k: float | None = None

    def __post_init__(self):
        if self.kind not in ("exact", "ef", "lse", "agm"):
            raise SemanticsError(f"unknown semantics kind {self.kind!r}")
        if self.kind == "ef":
            if self.k1 is None or not (float(self.k1) > 0):
                raise SemanticsError("ef semantics needs k1 > 0")
            if self.k2 is None or not (float(self.k2) >= 0):
                raise SemanticsError("ef semantics needs k2 >= 0")
            object.__setattr__(self, "k1", float(self.k1))
            object.__setattr__(self, "k2", float(self.k2))
        elif self.kind == "lse":
            if self.k is None or not (float(self.k) > 0):
                raise SemanticsError("lse semantics needs k > 0")
            object.__setattr__(self, "k", float(self.k))
        else:
            if self.k1 is not None or self.k2 is not None or self.k is not None:
                raise SemanticsError(f"{self.kind} semantics takes no sharpness parameters")

    @classmethod
    def exact(cls):
        return cls("exact")

    @classmethod
    def ef(cls, k1, k2):
        return cls("ef", k1=k1, k2=k2)

    @classmethod
    def lse(cls, k):
        return cls("lse", k=k)

    @classmethod
    def agm(cls):
        return cls("agm")


EXACT = SemanticsConfig.exact()


# Scalar soft operators. Both are computed in shifted form so that the
# exponent arguments are bounded above by zero: no overflow for any finite
# input or sharpness, and the under-approximation survives in floating
# point (the correction term is a sum of one-signed quantities).

_counter_var: ContextVar = ContextVar("smoothstl_op_counter", default=None)


class OperatorCounter:
    """Tallies soft-operator work inside a count_operator_evals() block.

    applications counts operator calls; scalars counts the total number of
    arguments they processed, which is the cost model used by the scaling
    sweeps; forwards counts whole smooth evaluations, so scalars/forwards
    is the per-evaluation cost of a formula.
    """

    __slots__ = ("applications", "scalars", "forwards")

    def __init__(self):
        self.applications = 0
        self.scalars = 0
        self.forwards = 0


@contextmanager
def count_operator_evals():
    counter = OperatorCounter()
    token = _counter_var.set(counter)
    try:
        yield counter
    finally:
        _counter_var.reset(token)


def _tick(n):
    counter = _counter_var.get()
    if counter is not None:
        counter.applications += 1
        counter.scalars += n


def _as_vector(a, what="input"):
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 0:
        arr = arr[None]
    if arr.ndim != 1:
        raise ValueError(f"{what} must be a vector, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{what} must be nonempty")
    if not np.isfinite(arr).all():
        raise ValueError(f"{what} must be finite")
    return arr


def smooth_min(a, k1):
    """Soft minimum: min(a) shifted down by a log-sum-exp correction.

    Never exceeds the true minimum, and trails it by at most log(m)/k1 for
    m arguments; exact for a single argument. Larger k1 is tighter.
    """
    a = _as_vector(a)
    k1 = float(k1)
    if not k1 > 0:
        raise ValueError(f"k1 must be positive, got {k1}")
    _tick(a.size)
    m = float(a.min())
    return m - math.log(float(np.exp(-k1 * (a - m)).sum())) / k1


def smooth_max(a, k2):
    """Soft maximum: the Boltzmann-weighted average of the arguments.

    Never exceeds the true maximum. At k2 = 0 it is the arithmetic mean;
    as k2 grows the weights concentrate on the largest entries. The gap to
    the true maximum shrinks with both k2 and the runner-up margin (see
    max_error_bound).
    """
    a = _as_vector(a)
    k2 = float(k2)
    if not k2 >= 0:
        raise ValueError(f"k2 must be nonnegative, got {k2}")
    _tick(a.size)
    m = float(a.max())
    w = np.exp(k2 * (a - m))
    w /= w.sum()
    return m + float(np.dot(w, a - m))


def lse_max(a, k):
    """Log-sum-exp maximum: an over-approximation (at least the true max).

    A positive value therefore certifies nothing about the true sign; this
    operator exists as the baseline the sound pair is compared against.
    """
    a = _as_vector(a)
    k = float(k)
    if not k > 0:
        raise ValueError(f"k must be positive, got {k}")
    _tick(a.size)
    m = float(a.max())
    return m + math.log(float(np.exp(k * (a - m)).sum())) / k


def lse_min(a, k):
    """Log-sum-exp minimum; coincides with smooth_min."""
    return smooth_min(a, k)


def min_error_bound(m, k1):
    """Worst-case gap  min(a) - smooth_min(a, k1)  over m arguments."""
    m = int(m)
    if m < 1:
        raise ValueError("m must be at least 1")
    k1 = float(k1)
    if not k1 > 0:
        raise ValueError(f"k1 must be positive, got {k1}")
    return math.log(m) / k1


def max_error_bound(a, k2):
    """Gap bound  max(a) - smooth_max(a, k2)  for a sorted descending.

    Requires at least two entries, sorted from largest to smallest. The
    bound tightens exponentially in k2 times the gap between the top two
    entries.
    """
    a = _as_vector(a)
    if a.size < 2:
        raise ValueError("need at least two entries")
    if np.any(np.diff(a) > 0):
        raise ValueError("entries must be sorted in descending order")
    k2 = float(k2)
    if not k2 >= 0:
        raise ValueError(f"k2 must be nonnegative, got {k2}")
    m = a.size
    spread = float(a[0] - a[-1])
    x = k2 * float(a[0] - a[1])
    if x > 700.0:
        # asymptotic form; slightly larger than the exact expression, so
        # still a valid upper bound, and it cannot overflow
        return spread * (m - 1) * math.exp(-x)
    return spread / (math.exp(x) / (m - 1) + 1.0)


# Shared forward recursion. Every scalar produced during evaluation gets a
# slot; operator applications record which slots they consumed. The tape is
# what reverse-mode differentiation walks backwards, and recording it
# unconditionally keeps plain evaluation and gradient evaluation on the
# exact same floating-point path.


class _Trace:
    __slots__ = ("values", "records", "root")

    def __init__(self):
        self.values = []
        self.records = []
        self.root = None


def _pred_series(signal, pred):
    if pred.dim != signal.p:
        raise SemanticsError(
            f"predicate expects {pred.dim} signal dimensions, signal has {signal.p}"
        )
    if isinstance(pred, CallablePredicate):
        vals = np.array([pred.value(row) for row in signal.values], dtype=float)
        if not np.isfinite(vals).all():
            raise SemanticsError("callable predicate produced a non-finite margin")
        return vals
    coeffs = np.asarray(pred.coefficients, dtype=float)
    return signal.values @ coeffs - pred.offset


class _SmoothForward:
    """One smooth evaluation pass, memoized per (node, time)."""

    def __init__(self, signal, config, classic_until):
        self.signal = signal
        self.classic_until = classic_until
        if config.kind == "ef":
            self.k_min, self.k_max = config.k1, config.k2
            self.min_kind, self.max_kind = "smin", "smax"
            self.min_op, self.max_op = smooth_min, smooth_max
        else:
            self.k_min, self.k_max = config.k, config.k
            self.min_kind, self.max_kind = "lsemin", "lsemax"
            self.min_op, self.max_op = lse_min, lse_max
        self.trace = _Trace()
        self.memo = {}
        self.series = {}

    def run(self, phi, t):
        self.trace.root = self.slot(phi, t)
        return self.trace

    def _push(self, value, record):
        self.trace.values.append(float(value))
        self.trace.records.append(record)
        return len(self.trace.values) - 1

    def _leaf(self, pred, t, sign):
        key = (id(pred), t, sign)
        slot = self.memo.get(key)
        if slot is None:
            series = self.series.get(id(pred))
            if series is None:
                series = _pred_series(self.signal, pred)
                self.series[id(pred)] = series
            slot = self._push(sign * series[t], ("leaf", pred, t, sign))
            self.memo[key] = slot
        return slot

    def _apply_min(self, slots):
        vals = np.array([self.trace.values[i] for i in slots])
        out = self.min_op(vals, self.k_min)
        return self._push(out, (self.min_kind, self.k_min, np.asarray(slots)))

    def _apply_max(self, slots):
        vals = np.array([self.trace.values[i] for i in slots])
        out = self.max_op(vals, self.k_max)
        return self._push(out, (self.max_kind, self.k_max, np.asarray(slots)))

    def slot(self, node, t):
        key = (id(node), t)
        cached = self.memo.get(key)
        if cached is not None:
            return cached
        if isinstance(node, Pred):
            slot = self._leaf(node.predicate, t, 1.0)
        elif isinstance(node, Not):
            if not isinstance(node.child, Pred):
                raise SemanticsError("smooth semantics requires negation normal form")
            slot = self._leaf(node.child.predicate, t, -1.0)
        elif isinstance(node, And):
            slot = self._apply_min([self.slot(c, t) for c in node.children])
        elif isinstance(node, Or):
            slot = self._apply_max([self.slot(c, t) for c in node.children])
        elif isinstance(node, Always):
            lo, hi = node.interval.lo, node.interval.hi
            slot = self._apply_min([self.slot(node.child, t + tau) for tau in range(lo, hi + 1)])
        elif isinstance(node, Eventually):
            lo, hi = node.interval.lo, node.interval.hi
            slot = self._apply_max([self.slot(node.child, t + tau) for tau in range(lo, hi + 1)])
        elif isinstance(node, Until):
            slot = self._until(node, t)
        elif isinstance(node, Release):
            slot = self._release(node, t)
        else:
            raise SemanticsError(f"not a formula node: {type(node).__name__}")
        self.memo[key] = slot
        return slot

    def _until(self, node, t):
        lo, hi = node.interval.lo, node.interval.hi
        pair_slots = []
        if self.classic_until:
            # hold the left operand from t, hit the right operand at t'
            for tp in range(t + lo, t + hi + 1):
                hist = self._apply_min([self.slot(node.left, u) for u in range(t, tp + 1)])
                pair_slots.append(self._apply_min([self.slot(node.right, tp), hist]))
        else:
            # pointwise left at t', history of the right from t+lo to t'
            for tp in range(t + lo, t + hi + 1):
                hist = self._apply_min([self.slot(node.right, u) for u in range(t + lo, tp + 1)])
                pair_slots.append(self._apply_min([self.slot(node.left, tp), hist]))
        return self._apply_max(pair_slots)

    def _release(self, node, t):
        lo, hi = node.interval.lo, node.interval.hi
        pair_slots = []
        if self.classic_until:
            # soft transcription of the exact dual form used by the exact
            # evaluator in classic mode, so it converges to it
            for tp in range(t + lo, t + hi + 1):
                hist = self._apply_max([self.slot(node.left, u) for u in range(t, tp + 1)])
                pair_slots.append(self._apply_max([self.slot(node.right, tp), hist]))
            return self._apply_min(pair_slots)
        # pointwise right at t', history of the left from t+lo to t'
        for tp in range(t + lo, t + hi + 1):
            hist = self._apply_min([self.slot(node.left, u) for u in range(t + lo, tp + 1)])
            pair_slots.append(self._apply_min([self.slot(node.right, tp), hist]))
        return self._apply_max(pair_slots)


class _ExactEval:
    """Literal recursion with true min/max, memoized per (node, time)."""

    def __init__(self, signal, classic_until):
        self.signal = signal
        self.classic_until = classic_until
        self.memo = {}
        self.series = {}

    def _pred(self, pred, t):
        series = self.series.get(id(pred))
        if series is None:
            series = _pred_series(self.signal, pred)
            self.series[id(pred)] = series
        return float(series[t])

    def eval(self, node, t):
        key = (id(node), t)
        cached = self.memo.get(key)
        if cached is not None:
            return cached
        if isinstance(node, Pred):
            out = self._pred(node.predicate, t)
        elif isinstance(node, Not):
            out = -self.eval(node.child, t)
        elif isinstance(node, And):
            out = min(self.eval(c, t) for c in node.children)
        elif isinstance(node, Or):
            out = max(self.eval(c, t) for c in node.children)
        elif isinstance(node, Always):
            lo, hi = node.interval.lo, node.interval.hi
            out = min(self.eval(node.child, t + tau) for tau in range(lo, hi + 1))
        elif isinstance(node, Eventually):
            lo, hi = node.interval.lo, node.interval.hi
            out = max(self.eval(node.child, t + tau) for tau in range(lo, hi + 1))
        elif isinstance(node, Until):
            out = self._until(node, t)
        elif isinstance(node, Release):
            out = self._release(node, t)
        else:
            raise SemanticsError(f"not a formula node: {type(node).__name__}")
        self.memo[key] = out
        return out

    def _until(self, node, t):
        lo, hi = node.interval.lo, node.interval.hi
        best = -math.inf
        for tp in range(t + lo, t + hi + 1):
            if self.classic_until:
                hist = min(self.eval(node.left, u) for u in range(t, tp + 1))
                cand = min(self.eval(node.right, tp), hist)
            else:
                hist = min(self.eval(node.right, u) for u in range(t + lo, tp + 1))
                cand = min(self.eval(node.left, tp), hist)
            best = max(best, cand)
        return best

    def _release(self, node, t):
        # the negation dual of the until form in effect, so that rewriting
        # not (a U b) into (not a) R (not b) preserves the exact value
        lo, hi = node.interval.lo, node.interval.hi
        worst = math.inf
        for tp in range(t + lo, t + hi + 1):
            if self.classic_until:
                hist = max(self.eval(node.left, u) for u in range(t, tp + 1))
                cand = max(self.eval(node.right, tp), hist)
            else:
                hist = max(self.eval(node.right, u) for u in range(t + lo, tp + 1))
                cand = max(self.eval(node.left, tp), hist)
            worst = min(worst, cand)
        return worst


def _check_eval_args(phi, signal, t):
    signal = as_signal(signal)
    if t < 0:
        raise SemanticsError(f"evaluation time must be nonnegative, got {t}")
    need = t + horizon(phi)
    if need > signal.T:
        raise SemanticsError(
            f"signal too short: evaluation at t={t} needs samples through "
            f"t={need} but the signal ends at t={signal.T}"
        )
    return signal


def smooth_forward(phi, signal, t, config, classic_until=False):
    """Run the smooth recursion and return the full evaluation trace.

    Internal surface shared with the gradient module; plain evaluation
    reads only trace.values[trace.root] from it.
    """
    signal = _check_eval_args(phi, signal, t)
    if config.kind not in ("ef", "lse"):
        raise SemanticsError(f"smooth_forward needs ef or lse semantics, got {config.kind!r}")
    if not is_nnf(phi):
        raise SemanticsError(
            "smooth semantics requires negation normal form; apply to_nnf first"
        )
    fw = _SmoothForward(signal, config, classic_until)
    trace = fw.run(phi, int(t))
    counter = _counter_var.get()
    if counter is not None:
        counter.forwards += 1
    return trace, signal


def evaluate(phi, signal, t=0, config=EXACT, classic_until=False):
    """Robustness of phi over the signal, evaluated at time t.

    @param phi:           formula; smooth kinds additionally require NNF
    @param signal:        Signal, or anything Signal() accepts
    @param t:             evaluation timestep (default 0)
    @param config:        SemanticsConfig choosing exact / ef / lse
    @param classic_until: switch the until operator (and the release dual)
                          to the convention where the held operand's
                          history starts at t instead of t plus the window
                          start, with the hold on the left operand

    The signal must reach t + horizon(phi). Positive exact robustness
    means the formula is satisfied; positive ef robustness implies
    positive exact robustness, while lse offers no such guarantee.
    """
    if not isinstance(config, SemanticsConfig):
        raise SemanticsError("config must be a SemanticsConfig")
    if config.kind == "agm":
        raise NotImplementedError(
            "agm semantics is a recognized name but is intentionally not "
            "implemented here; use exact, ef or lse"
        )
    if config.kind == "exact":
        signal = _check_eval_args(phi, signal, t)
        return _ExactEval(signal, classic_until).eval(phi, int(t))
    trace, _ = smooth_forward(phi, signal, t, config, classic_until)
    return trace.values[trace.root]


# Signal file format: a header row  t,y0,...,y{p-1}  followed by one row
# per timestep. Values are written with repr, which round-trips float64
# exactly.


def save_signal_csv(signal, path):
    signal = as_signal(signal)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"y{j}" for j in range(signal.p)])
        for t in range(len(signal)):
            writer.writerow([t] + [repr(float(v)) for v in signal.values[t]])


def load_signal_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SemanticsError(f"{path}: empty signal file") from None
        if not header or header[0] != "t" or len(header) < 2:
            raise SemanticsError(f"{path}: expected header t,y0,... got {header!r}")
        for j, name in enumerate(header[1:]):
            if name != f"y{j}":
                raise SemanticsError(f"{path}: column {j + 1} should be y{j}, got {name!r}")
        rows = []
        for lineno, row in enumerate(reader):
            if not row:
                continue
            if len(row) != len(header):
                raise SemanticsError(f"{path}: row {lineno + 2} has {len(row)} fields")
            if int(row[0]) != len(rows):
                raise SemanticsError(f"{path}: timesteps must run 0,1,2,... without gaps")
            rows.append([float(v) for v in row[1:]])
    if not rows:
        raise SemanticsError(f"{path}: no samples")
    return Signal(np.array(rows))
