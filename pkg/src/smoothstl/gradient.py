"""Analytic gradients of the smooth robustness value.

The smooth evaluator records every soft-operator application on a tape;
this module sweeps that tape backwards, multiplying adjoints by the
operators' weight vectors, and accumulates the result at the predicate
leaves. One forward plus one backward pass costs a small constant times
one evaluation, independent of the signal dimension.

Weight facts used by tests and by the chain rule through dynamics:

  soft minimum   weights are a softmax of -k1 * a: positive, sum to one,
                 concentrated on the smallest entries.
  soft maximum   weights are w_i * (1 + k2 * (a_i - softmax value)) with w
                 the Boltzmann weights; they also sum to one but entries
                 can be negative, so the soft maximum is not monotone in
                 its arguments even though it stays below the true max.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .robustness import SemanticsError, as_signal, evaluate, smooth_forward

__all__ = [
    "RobustnessGradient",
    "grad_smooth_min",
    "grad_smooth_max",
    "eval_with_gradient",
    "finite_difference_gradient",
    "save_gradient_csv",
    "load_gradient_csv",
]


def grad_smooth_min(a, k1):
    """Gradient of smooth_min(a, k1) with respect to a.

    @param a:  argument vector
    @param k1: sharpness, positive
    @return:   vector of positive weights summing to one
    """
    a = np.asarray(a, dtype=float)
    k1 = float(k1)
    if not k1 > 0:
        raise ValueError(f"k1 must be positive, got {k1}")
    e = np.exp(-k1 * (a - a.min()))
    return e / e.sum()


def grad_smooth_max(a, k2):
    """Gradient of smooth_max(a, k2) with respect to a.

    Sums to one; individual entries may be negative for arguments far
    below the soft maximum.
    """
    a = np.asarray(a, dtype=float)
    k2 = float(k2)
    if not k2 >= 0:
        raise ValueError(f"k2 must be nonnegative, got {k2}")
    w = np.exp(k2 * (a - a.max()))
    w /= w.sum()
    soft = float(np.dot(w, a))
    return w * (1.0 + k2 * (a - soft))


@dataclass
class RobustnessGradient:
    """Smooth robustness value plus its derivative in every signal entry.

    dsignal has the signal's own shape (T+1, p). Entries at timesteps the
    formula never looks at are exactly zero.
    """

    value: float
    dsignal: np.ndarray


def eval_with_gradient(phi, signal, t=0, config=None, classic_until=False):
    """Smooth robustness and its gradient with respect to the signal.

    Only the ef semantics is differentiable here; the value returned is
    bit-identical to evaluate() with the same arguments because both run
    the same forward recursion.
    """
    if config is None or config.kind != "ef":
        raise SemanticsError("eval_with_gradient needs ef semantics")
    trace, signal = smooth_forward(phi, signal, t, config, classic_until)
    values = np.asarray(trace.values)
    adjoint = np.zeros(len(values))
    adjoint[trace.root] = 1.0
    dsignal = np.zeros_like(signal.values)
    for slot in range(len(values) - 1, -1, -1):
        a = adjoint[slot]
        if a == 0.0:
            continue
        record = trace.records[slot]
        kind = record[0]
        if kind == "leaf":
            _, pred, ts, sign = record
            dsignal[ts] += (a * sign) * pred.gradient(signal.values[ts])
        elif kind == "smin":
            _, k, slots = record
            np.add.at(adjoint, slots, a * grad_smooth_min(values[slots], k))
        elif kind == "smax":
            _, k, slots = record
            np.add.at(adjoint, slots, a * grad_smooth_max(values[slots], k))
        else:
            raise SemanticsError(f"cannot differentiate through operator {kind!r}")
    return RobustnessGradient(value=float(values[trace.root]), dsignal=dsignal)


def finite_difference_gradient(phi, signal, t=0, config=None, h=1e-5, classic_until=False):
    """Central-difference estimate of d robustness / d signal.

    Slow (two evaluations per signal entry); exists as the reference the
    analytic gradient is checked against.
    """
    signal = as_signal(signal)
    if config is None:
        raise SemanticsError("finite_difference_gradient needs a semantics config")
    h = float(h)
    if not h > 0:
        raise ValueError("h must be positive")
    base = signal.values.copy()
    out = np.zeros_like(base)
    for ts in range(base.shape[0]):
        for j in range(base.shape[1]):
            bumped = base.copy()
            bumped[ts, j] = base[ts, j] + h
            hi = evaluate(phi, bumped, t, config, classic_until)
            bumped[ts, j] = base[ts, j] - h
            lo = evaluate(phi, bumped, t, config, classic_until)
            out[ts, j] = (hi - lo) / (2.0 * h)
    return out


# Gradient file format mirrors the signal format with d_ prefixes.


def save_gradient_csv(grad, path):
    dsig = np.asarray(grad.dsignal, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"d_y{j}" for j in range(dsig.shape[1])])
        for ts in range(dsig.shape[0]):
            writer.writerow([ts] + [repr(float(v)) for v in dsig[ts]])


def load_gradient_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "t" or len(header) < 2:
            raise SemanticsError(f"{path}: expected header t,d_y0,... got {header!r}")
        for j, name in enumerate(header[1:]):
            if name != f"d_y{j}":
                raise SemanticsError(f"{path}: column {j + 1} should be d_y{j}, got {name!r}")
        rows = []
        for row in reader:
            if not row:
                continue
            if int(row[0]) != len(rows):
                raise SemanticsError(f"{path}: timesteps must run 0,1,2,... without gaps")
            rows.append([float(v) for v in row[1:]])
    return np.array(rows)
