"""Gradient-based control synthesis against a smooth robustness objective.

The objective is J(u) = rho_smooth(y(u)) - w * sum_t u_t . u_t, the smooth
(ef) robustness of the rolled-out output signal minus an optional control
effort penalty. Each restart climbs J with a limited-memory quasi-Newton
ascent: search directions come from the usual two-loop recursion over
recent (step, gradient-change) pairs, steps are chosen by a backtracking
line search that only ever accepts a non-decrease of J, and the ascent
stops when the gradient's infinity norm drops below tolerance or the
iteration budget runs out.

Restart 0 always starts from u = 0; the remaining restarts start from
seeded uniform noise (over the control bounds when given, otherwise over
[-1, 1] per entry). The reported result is the restart with the highest
exact robustness, with ties broken by objective value and then by restart
index, a rule that is independent of completion order, so threaded and
serial runs pick the same winner.

Everything here is deterministic for a fixed seed: same problem, same
seed, bit-identical result.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .concurrency import map_ordered
from .dynamics import RolloutDivergence, rollout, rollout_with_sensitivities
from .formula import horizon, is_nnf
from .gradient import eval_with_gradient
from .robustness import EXACT, SemanticsConfig, evaluate

__all__ = [
    "SynthesisFailure",
    "SynthesisProblem",
    "RestartRecord",
    "ContinuationStage",
    "SynthesisResult",
    "objective",
    "synthesize",
    "k_continuation",
    "DEFAULT_TOLERANCE",
    "DEFAULT_MAX_ITERS",
    "DEFAULT_RESTARTS",
]

DEFAULT_TOLERANCE = 1e-6
DEFAULT_MAX_ITERS = 500
DEFAULT_RESTARTS = 10

_LBFGS_MEMORY = 10
_ARMIJO_C1 = 1e-4
_MAX_BACKTRACKS = 40


class SynthesisFailure(RuntimeError):
    """Every restart failed to produce a finite trajectory."""


@dataclass(frozen=True)
class SynthesisProblem:
    """One synthesis instance: model, start state, formula and knobs.

    @param model:          SystemModel to drive
    @param x0:             initial state, length model.n
    @param phi:            formula in negation normal form
    @param T:              trajectory length minus one (controls are (T+1, m))
    @param k1, k2:         sharpness of the smooth semantics
    @param control_weight: effort penalty coefficient w >= 0
    @param control_bounds: optional per-dimension (lo, hi) pairs, length m;
                           used to sample restart initializations and, when
                           hard_clamp is set, to project iterates
    @param hard_clamp:     project iterates onto the bound box
    @param restarts:       number of seeded random restarts (the u = 0
                           baseline always runs in addition, as restart 0)
    @param seed:           RNG seed for the restart initializations
    """

    model: object
    x0: tuple
    phi: object
    T: int
    k1: float
    k2: float
    control_weight: float = 0.0
    control_bounds: tuple | None = None
    hard_clamp: bool = False
    restarts: int = DEFAULT_RESTARTS
    seed: int = 0
    max_iters: int = DEFAULT_MAX_ITERS
    tolerance: float = DEFAULT_TOLERANCE
    classic_until: bool = False

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(v) for v in np.asarray(self.x0).reshape(-1)))
        if len(self.x0) != self.model.n:
            raise ValueError(f"x0 must have length {self.model.n}, got {len(self.x0)}")
        if not is_nnf(self.phi):
            raise ValueError("phi must be in negation normal form; apply to_nnf first")
        T = int(self.T)
        object.__setattr__(self, "T", T)
        if horizon(self.phi) > T:
            raise ValueError(
                f"formula looks {horizon(self.phi)} steps ahead but the horizon is T={T}"
            )
        if not float(self.control_weight) >= 0:
            raise ValueError("control_weight must be nonnegative")
        object.__setattr__(self, "control_weight", float(self.control_weight))
        if self.control_bounds is not None:
            bounds = tuple((float(lo), float(hi)) for lo, hi in self.control_bounds)
            if len(bounds) != self.model.m:
                raise ValueError(f"control_bounds needs {self.model.m} (lo, hi) pairs")
            for lo, hi in bounds:
                if not lo < hi:
                    raise ValueError(f"control bound ({lo}, {hi}) is empty")
            object.__setattr__(self, "control_bounds", bounds)
        if int(self.restarts) < 0:
            raise ValueError("restarts must be nonnegative")
        object.__setattr__(self, "restarts", int(self.restarts))
        if int(self.max_iters) < 1:
            raise ValueError("max_iters must be positive")
        object.__setattr__(self, "max_iters", int(self.max_iters))
        if not float(self.tolerance) > 0:
            raise ValueError("tolerance must be positive")
        object.__setattr__(self, "tolerance", float(self.tolerance))
        object.__setattr__(self, "k1", float(self.k1))
        object.__setattr__(self, "k2", float(self.k2))

    @property
    def config(self):
        return SemanticsConfig.ef(self.k1, self.k2)


def objective(problem, u):
    """J(u) and dJ/du for one control sequence of shape (T+1, m)."""
    u = np.asarray(u, dtype=float)
    sens = rollout_with_sensitivities(problem.model, problem.x0, u)
    grad = eval_with_gradient(
        problem.phi, sens.signal, 0, problem.config, problem.classic_until
    )
    du = sens.control_gradient(grad.dsignal)
    w = problem.control_weight
    J = grad.value - w * float(np.sum(u * u))
    dJ = du - 2.0 * w * u
    return J, dJ


@dataclass
class RestartRecord:
    """Outcome of one local ascent."""

    index: int
    rho_exact: float
    rho_smooth: float
    objective: float
    iterations: int
    converged: bool
    wall_ms: float
    failed: bool = False


@dataclass
class ContinuationStage:
    """One sharpness stage of k_continuation.

    u_init is None for the first stage, which is a full multi-restart
    solve rather than a single warm-started ascent.
    """

    k: float
    u_init: np.ndarray | None
    u_star: np.ndarray
    rho_exact: float
    iterations: int


@dataclass
class SynthesisResult:
    """Winning trajectory of a synthesize() call.

    objective_trace holds J at every accepted iterate of the winning
    ascent, which is non-decreasing by construction (for k_continuation it
    is the concatenation of the per-stage traces and may drop at stage
    boundaries, where J changes meaning).
    """

    u_star: np.ndarray
    y_star: object
    rho_smooth: float
    rho_exact: float
    satisfied: bool
    iterations: int
    objective_trace: list
    wall_time: float
    restart_index: int
    restart_records: list
    stages: list = field(default_factory=list)


def _clamp(u, bounds):
    if bounds is None:
        return u
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    return np.clip(u, lo, hi)


def _lbfgs_direction(g, pairs):
    """Ascent direction from the two-loop recursion; pairs hold flattened
    (s, gdiff) with gdiff = g_old - g_new, the gradient-change convention
    for a maximization."""
    q = -g.ravel()
    alphas = []
    rhos = []
    for s, y in reversed(pairs):
        rho = 1.0 / float(np.dot(y, s))
        alpha = rho * float(np.dot(s, q))
        q = q - alpha * y
        alphas.append(alpha)
        rhos.append(rho)
    if pairs:
        s, y = pairs[-1]
        gamma = float(np.dot(s, y)) / float(np.dot(y, y))
        q *= gamma
    for (s, y), alpha, rho in zip(pairs, reversed(alphas), reversed(rhos)):
        beta = rho * float(np.dot(y, q))
        q += s * (alpha - beta)
    return (-q).reshape(g.shape)


def _ascend(evaluate_obj, u0, problem):
    """Maximize J from u0; returns (u, J, g, trace, iterations, converged).

    evaluate_obj returns (J, dJ) or raises RolloutDivergence; a divergence
    at the start marks the ascent failed, one inside the line search just
    rejects that step length.
    """
    bounds = problem.control_bounds if problem.hard_clamp else None
    u = _clamp(np.asarray(u0, dtype=float), bounds)
    try:
        J, g = evaluate_obj(u)
    except RolloutDivergence:
        return None
    if not (math.isfinite(J) and np.isfinite(g).all()):
        return None
    trace = [J]
    pairs = []
    iterations = 0
    converged = False
    for it in range(problem.max_iters):
        gnorm = float(np.abs(g).max())
        if gnorm < problem.tolerance:
            converged = True
            break
        d = _lbfgs_direction(g, pairs)
        slope = float(np.sum(d * g))
        if not np.isfinite(d).all() or slope <= 0.0:
            d = g.copy()
            slope = float(np.sum(g * g))
            pairs.clear()
        alpha = 1.0 if it > 0 else 1.0 / max(1.0, gnorm)
        accepted = None
        for _ in range(_MAX_BACKTRACKS):
            cand = _clamp(u + alpha * d, bounds)
            gain = float(np.sum(g * (cand - u)))
            try:
                Jc, gc = evaluate_obj(cand)
            except RolloutDivergence:
                alpha *= 0.5
                continue
            if math.isfinite(Jc) and np.isfinite(gc).all() and Jc >= J + _ARMIJO_C1 * max(gain, 0.0) and Jc >= J:
                accepted = (cand, Jc, gc)
                break
            alpha *= 0.5
        if accepted is None:
            break
        cand, Jc, gc = accepted
        s = (cand - u).ravel()
        ydiff = (g - gc).ravel()
        if float(np.dot(s, ydiff)) > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(ydiff)):
            pairs.append((s, ydiff))
            if len(pairs) > _LBFGS_MEMORY:
                pairs.pop(0)
        step = float(np.abs(cand - u).max())
        u, J, g = cand, Jc, gc
        trace.append(J)
        iterations = it + 1
        if step < 1e-14:
            break
    return u, J, g, trace, iterations, converged


def _initial_controls(problem):
    """Restart starting points: the zero baseline plus seeded uniform draws."""
    shape = (problem.T + 1, problem.model.m)
    inits = [np.zeros(shape)]
    rng = np.random.default_rng(problem.seed)
    if problem.control_bounds is not None:
        lo = np.array([b[0] for b in problem.control_bounds])
        hi = np.array([b[1] for b in problem.control_bounds])
    else:
        lo, hi = -1.0, 1.0
    for _ in range(problem.restarts):
        inits.append(rng.uniform(lo, hi, size=shape))
    return inits


def _run_restart(problem, index, u0):
    start = time.perf_counter()
    outcome = _ascend(lambda u: objective(problem, u), u0, problem)
    wall_ms = (time.perf_counter() - start) * 1e3
    if outcome is None:
        record = RestartRecord(
            index=index, rho_exact=-math.inf, rho_smooth=-math.inf,
            objective=-math.inf, iterations=0, converged=False,
            wall_ms=wall_ms, failed=True,
        )
        return record, None
    u, J, _, trace, iterations, converged = outcome
    y = rollout(problem.model, problem.x0, u)
    rho_exact = evaluate(problem.phi, y, 0, EXACT, problem.classic_until)
    rho_smooth = evaluate(problem.phi, y, 0, problem.config, problem.classic_until)
    record = RestartRecord(
        index=index, rho_exact=rho_exact, rho_smooth=rho_smooth,
        objective=J, iterations=iterations, converged=converged, wall_ms=wall_ms,
    )
    return record, (u, y, trace)


def synthesize(problem):
    """Search for controls maximizing exact satisfaction margin.

    Runs the baseline plus problem.restarts seeded ascents (possibly on
    threads, see the concurrency module), then reports the restart with
    the highest exact robustness; ties fall to the higher objective, then
    the lower restart index. Raises SynthesisFailure when every restart
    diverges, so a non-finite answer is never returned silently.
    """
    start = time.perf_counter()
    inits = _initial_controls(problem)
    outcomes = map_ordered(
        lambda iu: _run_restart(problem, iu[0], iu[1]), list(enumerate(inits))
    )
    records = [rec for rec, _ in outcomes]
    candidates = [(rec, payload) for rec, payload in outcomes if not rec.failed]
    if not candidates:
        raise SynthesisFailure(
            f"all {len(outcomes)} restarts diverged; the model or start state "
            "is producing non-finite trajectories"
        )
    best_rec, best_payload = max(
        candidates, key=lambda rp: (rp[0].rho_exact, rp[0].objective, -rp[0].index)
    )
    u, y, trace = best_payload
    wall = time.perf_counter() - start
    return SynthesisResult(
        u_star=u,
        y_star=y,
        rho_smooth=best_rec.rho_smooth,
        rho_exact=best_rec.rho_exact,
        satisfied=best_rec.rho_exact > 0.0,
        iterations=best_rec.iterations,
        objective_trace=trace,
        wall_time=wall,
        restart_index=best_rec.index,
        restart_records=records,
    )


def k_continuation(problem, k_schedule):
    """Sharpness continuation: solve soft, then re-solve sharper, warm.

    The first stage is a full synthesize() at the smallest sharpness; each
    later stage runs a single ascent warm-started from the previous
    stage's winner with k1 = k2 = k. The result reports robustness at the
    final sharpness. A one-element schedule is exactly synthesize().
    """
    ks = [float(k) for k in k_schedule]
    if not ks:
        raise ValueError("k_schedule must be nonempty")
    if any(k <= 0 for k in ks):
        raise ValueError("k_schedule entries must be positive")
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValueError("k_schedule must be strictly increasing")

    start = time.perf_counter()
    stage_problem = replace(problem, k1=ks[0], k2=ks[0])
    result = synthesize(stage_problem)
    if len(ks) == 1:
        return result

    stages = [
        ContinuationStage(
            k=ks[0], u_init=None, u_star=result.u_star,
            rho_exact=result.rho_exact, iterations=result.iterations,
        )
    ]
    u = result.u_star
    trace = list(result.objective_trace)
    iterations = result.iterations
    for k in ks[1:]:
        stage_problem = replace(problem, k1=k, k2=k)
        outcome = _ascend(lambda v: objective(stage_problem, v), u, stage_problem)
        if outcome is None:
            raise SynthesisFailure(f"continuation stage k={k} diverged from its warm start")
        u_init = u
        u, J, _, stage_trace, stage_iters, _ = outcome
        y = rollout(stage_problem.model, stage_problem.x0, u)
        rho_exact = evaluate(stage_problem.phi, y, 0, EXACT, stage_problem.classic_until)
        stages.append(
            ContinuationStage(
                k=k, u_init=u_init, u_star=u, rho_exact=rho_exact, iterations=stage_iters
            )
        )
        trace.extend(stage_trace)
        iterations += stage_iters

    final_problem = replace(problem, k1=ks[-1], k2=ks[-1])
    y = rollout(final_problem.model, final_problem.x0, u)
    rho_exact = evaluate(final_problem.phi, y, 0, EXACT, final_problem.classic_until)
    rho_smooth = evaluate(final_problem.phi, y, 0, final_problem.config, final_problem.classic_until)
    return SynthesisResult(
        u_star=u,
        y_star=y,
        rho_smooth=rho_smooth,
        rho_exact=rho_exact,
        satisfied=rho_exact > 0.0,
        iterations=iterations,
        objective_trace=trace,
        wall_time=time.perf_counter() - start,
        restart_index=result.restart_index,
        restart_records=result.restart_records,
        stages=stages,
    )
