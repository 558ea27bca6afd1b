"""Built-in benchmark scenarios plus config-file plumbing.

A scenario bundles everything a synthesis run needs: a plant model, a
horizon, named box regions, a formula written against those regions, the
sharpness and effort knobs, and how the initial state is chosen. Four
builtins ship with the package:

  two_target        reach one of two targets, then a goal, around a block
  tunnel            squeeze through a one-unit gap between two walls
  charging          three timed service stops on the way to a goal
  table2_diffdrive  the two-target task on differential-drive dynamics,
                    random start in the unit square, no control bound

Region coordinates are data, not contracts: every builtin can be saved to
JSON, edited, and loaded back. run_bench and run_scaling drive repeated
synthesize() calls for statistics; their CSV formats are documented on
the writers.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .concurrency import map_ordered, thread_limit
from .dynamics import builtin_model
from .formula import FormulaError, RegionTable, horizon, to_nnf
from .optimizer import (
    DEFAULT_MAX_ITERS,
    DEFAULT_TOLERANCE,
    SynthesisFailure,
    SynthesisProblem,
    synthesize,
)
from .parser import ParseError, parse
from .robustness import EXACT, count_operator_evals, evaluate

__all__ = [
    "ScenarioError",
    "ScenarioConfig",
    "BUILTIN_SCENARIOS",
    "builtin_scenario",
    "scenario_from_json_dict",
    "scenario_to_json_dict",
    "load_scenario",
    "save_scenario",
    "sample_x0",
    "build_problem",
    "dwell_steps",
    "BenchRecord",
    "BenchAggregate",
    "run_bench",
    "aggregate_bench",
    "save_bench_csv",
    "load_bench_csv",
    "ScalingRecord",
    "run_scaling",
    "save_scaling_csv",
    "load_scaling_csv",
]


class ScenarioError(ValueError):
    """Raised for malformed scenario configs; names the offending key."""


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ScenarioConfig:
    """One synthesis scenario, fully determined up to the RNG seed.

    @param name:           display name (builtin name or config file stem)
    @param model:          builtin model name, see dynamics.builtin_model
    @param T:              horizon; trajectories have T+1 samples
    @param regions:        named boxes the spec text may reference
    @param spec:           formula source parsed against the regions
    @param dt:             model sampling period
    @param k1, k2:         smooth semantics sharpness
    @param control_weight: effort penalty w in the objective
    @param control_bounds: per-input (lo, hi) pairs or None for unbounded
    @param x0:             fixed initial state, or None to sample
    @param x0_box:         per-position (lo, hi) sampling box when x0 is None
    @param theta0_range:   heading sampling range, differential drive only
    @param restarts:       random restarts per synthesize() call
    @param seed:           base RNG seed
    @param obstacle_inflation: margin added to every obs* region, to absorb
                           the corner clipping that time discretization allows

    Validation happens on construction: the spec must parse against the
    declared regions and fit inside the horizon, and exactly one of x0 and
    x0_box must be given.
    """

    name: str
    model: str
    T: int
    regions: RegionTable
    spec: str
    dt: float = 1.0
    k1: float = 2.0
    k2: float = 2.0
    control_weight: float = 0.0
    control_bounds: tuple | None = None
    x0: tuple | None = None
    x0_box: tuple | None = None
    theta0_range: tuple | None = None
    restarts: int = 10
    seed: int = 0
    obstacle_inflation: float = 0.0
    max_iters: int = DEFAULT_MAX_ITERS
    tolerance: float = DEFAULT_TOLERANCE
    hard_clamp: bool = False

    def __post_init__(self):
        def bad(key, why):
            return ScenarioError(f"{key}: {why}")

        try:
            model = builtin_model(self.model, self.dt)
        except ValueError as exc:
            raise bad("model", exc) from None
        if not isinstance(self.regions, RegionTable):
            try:
                object.__setattr__(self, "regions", RegionTable(self.regions))
            except FormulaError as exc:
                raise bad("regions", exc) from None
        object.__setattr__(self, "T", int(self.T))
        if self.T < 1:
            raise bad("T", "horizon must be at least 1")
        for key in ("k1", "k2", "control_weight", "obstacle_inflation", "dt"):
            value = float(getattr(self, key))
            object.__setattr__(self, key, value)
            if not math.isfinite(value):
                raise bad(key, "must be finite")
        if self.k1 <= 0:
            raise bad("k1", "sharpness must be positive")
        if self.k2 < 0:
            raise bad("k2", "sharpness must be nonnegative")
        if self.control_weight < 0:
            raise bad("control_weight", "must be nonnegative")
        if self.obstacle_inflation < 0:
            raise bad("obstacle_inflation", "must be nonnegative")
        if self.control_bounds is not None:
            bounds = tuple((float(lo), float(hi)) for lo, hi in self.control_bounds)
            if len(bounds) != model.m:
                raise bad("control_bounds", f"needs {model.m} (lo, hi) pairs")
            if any(not lo < hi for lo, hi in bounds):
                raise bad("control_bounds", "every pair needs lo < hi")
            object.__setattr__(self, "control_bounds", bounds)

        if (self.x0 is None) == (self.x0_box is None):
            raise bad("x0", "exactly one of x0 and x0_box must be set")
        if self.x0 is not None:
            x0 = tuple(float(v) for v in self.x0)
            if len(x0) != model.n:
                raise bad("x0", f"needs {model.n} entries for {self.model}")
            object.__setattr__(self, "x0", x0)
        else:
            box = tuple((float(lo), float(hi)) for lo, hi in self.x0_box)
            # the box covers position only; heading has its own range
            want = 2 if self.model == "differential_drive" else model.n
            if len(box) != want:
                raise bad("x0_box", f"needs {want} (lo, hi) pairs for {self.model}")
            if any(not lo <= hi for lo, hi in box):
                raise bad("x0_box", "every pair needs lo <= hi")
            object.__setattr__(self, "x0_box", box)
        if self.theta0_range is not None:
            if self.model != "differential_drive":
                raise bad("theta0_range", "only meaningful for differential_drive")
            lo, hi = (float(v) for v in self.theta0_range)
            if not lo <= hi:
                raise bad("theta0_range", "needs lo <= hi")
            object.__setattr__(self, "theta0_range", (lo, hi))
        elif self.model == "differential_drive" and self.x0_box is not None:
            raise bad("theta0_range", "required when sampling differential_drive starts")

        if int(self.restarts) < 0:
            raise bad("restarts", "must be nonnegative")
        object.__setattr__(self, "restarts", int(self.restarts))
        if int(self.max_iters) < 1:
            raise bad("max_iters", "must be positive")
        object.__setattr__(self, "max_iters", int(self.max_iters))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "tolerance", float(self.tolerance))

        try:
            phi = self.formula()
        except (ParseError, FormulaError) as exc:
            raise bad("spec", exc) from None
        if horizon(phi) > self.T:
            raise bad(
                "T", f"spec looks {horizon(phi)} steps ahead but T is {self.T}"
            )

    def system_model(self):
        return builtin_model(self.model, self.dt)

    def effective_regions(self):
        """Regions with every obs* box grown by the inflation margin."""
        if self.obstacle_inflation == 0.0:
            return self.regions
        grow = tuple(n for n in self.regions.names() if n.startswith("obs"))
        return self.regions.inflated(self.obstacle_inflation, grow)

    def formula(self):
        """The spec parsed against the (inflated) regions, in NNF."""
        model = builtin_model(self.model, self.dt)
        return to_nnf(parse(self.spec, self.effective_regions(), p=model.p))


# JSON layout: one object, one key per field. regions is nested as
# {name: {dim: [lo, hi]}}. Keys absent from the file take the dataclass
# defaults; unknown keys are rejected rather than ignored.

_REQUIRED_KEYS = ("model", "T", "regions", "spec")
_OPTIONAL_KEYS = (
    "name",
    "dt",
    "k1",
    "k2",
    "control_weight",
    "control_bounds",
    "x0",
    "x0_box",
    "theta0_range",
    "restarts",
    "seed",
    "obstacle_inflation",
    "max_iters",
    "tolerance",
    "hard_clamp",
)


def scenario_from_json_dict(data, name=None):
    if not isinstance(data, dict):
        raise ScenarioError("config must be a JSON object")
    for key in _REQUIRED_KEYS:
        if key not in data:
            raise ScenarioError(f"missing key {key!r}")
    for key in data:
        if key not in _REQUIRED_KEYS and key not in _OPTIONAL_KEYS:
            raise ScenarioError(f"unknown key {key!r}")
    fields = dict(data)
    try:
        fields["regions"] = RegionTable.from_json_dict(fields["regions"])
    except (FormulaError, AttributeError) as exc:
        raise ScenarioError(f"regions: {exc}") from None
    for key in ("control_bounds", "x0", "x0_box", "theta0_range"):
        if fields.get(key) is not None:
            try:
                value = fields[key]
                if key in ("control_bounds", "x0_box"):
                    value = tuple(tuple(pair) for pair in value)
                else:
                    value = tuple(value)
                fields[key] = value
            except TypeError as exc:
                raise ScenarioError(f"{key}: {exc}") from None
    fields.setdefault("name", name or "scenario")
    try:
        return ScenarioConfig(**fields)
    except TypeError as exc:
        raise ScenarioError(str(exc)) from None


def scenario_to_json_dict(config):
    out = {
        "name": config.name,
        "model": config.model,
        "dt": config.dt,
        "T": config.T,
        "regions": config.regions.to_json_dict(),
        "spec": config.spec,
        "k1": config.k1,
        "k2": config.k2,
        "control_weight": config.control_weight,
        "restarts": config.restarts,
        "seed": config.seed,
        "obstacle_inflation": config.obstacle_inflation,
        "max_iters": config.max_iters,
        "tolerance": config.tolerance,
        "hard_clamp": config.hard_clamp,
    }
    if config.control_bounds is not None:
        out["control_bounds"] = [list(pair) for pair in config.control_bounds]
    if config.x0 is not None:
        out["x0"] = list(config.x0)
    if config.x0_box is not None:
        out["x0_box"] = [list(pair) for pair in config.x0_box]
    if config.theta0_range is not None:
        out["theta0_range"] = list(config.theta0_range)
    return out


def load_scenario(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path} is not valid JSON: {exc}") from None
    return scenario_from_json_dict(data, name=path.stem)


def save_scenario(config, path):
    Path(path).write_text(json.dumps(scenario_to_json_dict(config), indent=2) + "\n")


# ---------------------------------------------------------------------------
# builtin geometry
#
# Coordinates are chosen, not measured: they only have to admit a
# satisfying run with some margin and keep the narrative of each task
# (detour around a block, squeeze through a gap, timed stops). All are
# overridable through the JSON config path.

_TWO_TARGET_REGIONS = {
    "obs": {0: (2.0, 4.0), 1: (2.0, 4.0)},
    "target1": {0: (0.5, 2.0), 1: (4.5, 6.0)},
    "target2": {0: (4.0, 5.5), 1: (4.5, 6.0)},
    "goal": {0: (2.5, 3.5), 1: (6.5, 7.5)},
    "ubox": {2: (-2.0, 2.0), 3: (-2.0, 2.0)},
}

_TUNNEL_REGIONS = {
    "obs1": {0: (3.5, 5.0), 1: (0.0, 4.5)},
    "obs2": {0: (3.5, 5.0), 1: (5.5, 10.0)},
    "goal": {0: (7.0, 8.0), 1: (4.5, 5.5)},
    "ubox": {2: (-1.0, 1.0), 3: (-1.0, 1.0)},
}

# Service clusters sit on three horizontal rows with a free column at
# x ~ 2.1..2.9 running through all of them; the first station of every
# cluster lies on that column. Obstacles flank the column between rows.
_CHARGING_WINDOWS = ((1, 10), (12, 17), (20, 25))
_CHARGING_DWELLS = (3, 5, 3)
_CHARGING_ROWS = ((2.2, 3.0), (4.6, 5.4), (7.0, 7.8))
_STATION_X_START = 2.1
_STATION_PITCH = 1.2
_STATION_WIDTH = 0.8

_CHARGING_FIXED_REGIONS = {
    "goal": {0: (7.0, 8.2), 1: (8.6, 9.8)},
    "obs1": {0: (0.5, 1.7), 1: (1.2, 2.0)},
    "obs2": {0: (3.5, 4.7), 1: (1.2, 2.0)},
    "obs3": {0: (0.5, 1.7), 1: (3.6, 4.4)},
    "obs4": {0: (3.5, 4.7), 1: (3.6, 4.4)},
    "obs5": {0: (0.8, 2.0), 1: (6.0, 6.8)},
    "obs6": {0: (5.9, 6.9), 1: (6.2, 6.9)},
    "ubox": {2: (-1.0, 1.0), 3: (-1.0, 1.0)},
}


def _station_grid(counts):
    stations = {}
    for row, count in enumerate(counts):
        lo_y, hi_y = _CHARGING_ROWS[row]
        for j in range(count):
            x = _STATION_X_START + _STATION_PITCH * j
            stations[f"chg{row + 1}_{j + 1}"] = {
                0: (x, x + _STATION_WIDTH),
                1: (lo_y, hi_y),
            }
    return stations


def _charging_spec(n, counts):
    parts = [f"F[0,{n}] goal"]
    for row, count in enumerate(counts):
        lo, hi = _CHARGING_WINDOWS[row]
        dwell = _CHARGING_DWELLS[row]
        hi = min(hi, n - dwell)
        if hi < lo:
            raise ScenarioError(f"T: horizon {n} cannot fit service window {row + 1}")
        names = " or ".join(f"chg{row + 1}_{j + 1}" for j in range(count))
        if count > 1:
            names = f"({names})"
        parts.append(f"F[{lo},{hi}] G[0,{dwell}] {names}")
    avoid = " or ".join(sorted(r for r in _CHARGING_FIXED_REGIONS if r.startswith("obs")))
    parts.append(f"G[0,{n}] not ({avoid})")
    parts.append(f"G[0,{n}] ubox")
    return " and ".join(parts)


def _single_station_spec(n):
    # the length-scaling variant: keep only the first cluster's first
    # station, cap its service window so the dwell still fits
    lo, hi = _CHARGING_WINDOWS[0]
    dwell = _CHARGING_DWELLS[0]
    hi = min(hi, n - dwell)
    if hi < lo:
        raise ScenarioError(f"horizon {n} is too short for the dwell; need at least {lo + dwell + 1}")
    avoid = " or ".join(sorted(r for r in _CHARGING_FIXED_REGIONS if r.startswith("obs")))
    return (
        f"F[0,{n}] goal and F[{lo},{hi}] G[0,{dwell}] chg1_1"
        f" and G[0,{n}] not ({avoid}) and G[0,{n}] ubox"
    )


def _two_target():
    return ScenarioConfig(
        name="two_target",
        model="single_integrator_2d",
        T=10,
        regions=RegionTable(_TWO_TARGET_REGIONS),
        spec=(
            "G[0,10] not obs and F[0,10] (target1 or target2)"
            " and F[0,10] goal and G[0,10] ubox"
        ),
        k1=2.0,
        k2=2.0,
        control_weight=0.01,
        control_bounds=((-2.0, 2.0), (-2.0, 2.0)),
        x0=(0.0, 0.0),
    )


def _tunnel():
    # the control bound covers only the first half of the horizon; that
    # asymmetry is part of the task as posed
    return ScenarioConfig(
        name="tunnel",
        model="single_integrator_2d",
        T=20,
        regions=RegionTable(_TUNNEL_REGIONS),
        spec="G[0,20] not (obs1 or obs2) and F[0,20] goal and G[0,10] ubox",
        k1=10.0,
        k2=10.0,
        control_weight=0.01,
        control_bounds=((-1.0, 1.0), (-1.0, 1.0)),
        x0=(1.0, 5.0),
    )


def _charging():
    counts = (4, 3, 3)
    regions = dict(_CHARGING_FIXED_REGIONS)
    regions.update(_station_grid(counts))
    return ScenarioConfig(
        name="charging",
        model="single_integrator_2d",
        T=30,
        regions=RegionTable(regions),
        spec=_charging_spec(30, counts),
        k1=10.0,
        k2=10.0,
        control_weight=0.005,
        control_bounds=((-1.0, 1.0), (-1.0, 1.0)),
        x0=(2.5, 0.5),
    )


def _table2_diffdrive():
    regions = {k: v for k, v in _TWO_TARGET_REGIONS.items() if k != "ubox"}
    return ScenarioConfig(
        name="table2_diffdrive",
        model="differential_drive",
        T=11,
        regions=RegionTable(regions),
        spec="G[0,11] not obs and F[0,11] (target1 or target2) and F[0,11] goal",
        k1=1.0,
        k2=1.0,
        control_weight=0.01,
        x0_box=((0.0, 1.0), (0.0, 1.0)),
        theta0_range=(0.0, 2.0 * math.pi),
        restarts=3,
    )


_BUILTINS = {
    "two_target": _two_target,
    "tunnel": _tunnel,
    "charging": _charging,
    "table2_diffdrive": _table2_diffdrive,
}

BUILTIN_SCENARIOS = tuple(_BUILTINS)


def builtin_scenario(name):
    try:
        factory = _BUILTINS[name]
    except KeyError:
        known = ", ".join(BUILTIN_SCENARIOS)
        raise ScenarioError(f"unknown scenario {name!r}; builtins are {known}") from None
    return factory()


# ---------------------------------------------------------------------------
# running scenarios


def _x0_rng(seed):
    # a stream separate from the restart initializer, which seeds on the
    # bare integer
    return np.random.default_rng((int(seed), 1))


def sample_x0(config, rng=None):
    """Draw an initial state; fixed-x0 configs return it unchanged."""
    if config.x0 is not None:
        return np.array(config.x0, dtype=float)
    if rng is None:
        rng = _x0_rng(config.seed)
    parts = [rng.uniform(lo, hi) for lo, hi in config.x0_box]
    if config.theta0_range is not None:
        parts.append(rng.uniform(*config.theta0_range))
    return np.array(parts, dtype=float)


def build_problem(config, x0=None, seed=None, **overrides):
    """Materialize a SynthesisProblem from a scenario.

    Keyword overrides (k1, k2, restarts, max_iters, ...) replace the
    scenario's values; x0 defaults to the fixed start or, for sampling
    scenarios, a draw seeded by the seed in effect.
    """
    seed = config.seed if seed is None else int(seed)
    if x0 is None:
        x0 = sample_x0(config, _x0_rng(seed))
    fields = dict(
        model=config.system_model(),
        x0=tuple(np.asarray(x0, dtype=float).reshape(-1)),
        phi=config.formula(),
        T=config.T,
        k1=config.k1,
        k2=config.k2,
        control_weight=config.control_weight,
        control_bounds=config.control_bounds,
        hard_clamp=config.hard_clamp,
        restarts=config.restarts,
        seed=seed,
        max_iters=config.max_iters,
        tolerance=config.tolerance,
    )
    unknown = set(overrides) - set(fields)
    if unknown:
        raise ScenarioError(f"unknown override {sorted(unknown)[0]!r}")
    fields.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return SynthesisProblem(**fields)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None


def dwell_steps(config, signal):
    """Timesteps spent inside any attraction region (not obs*, not boxes
    over control dimensions). The conservativeness metric: low sharpness
    should park trajectories inside targets for longer."""
    model = config.system_model()
    attract = []
    for name, faces in config.regions.items():
        if name.startswith("obs") or any(d >= 2 for d in faces):
            continue
        attract.append(config.regions.conjunction(name, model.p))
    if not attract:
        return 0
    count = 0
    for t in range(len(signal)):
        if any(evaluate(phi, signal, t, EXACT) > 0 for phi in attract):
            count += 1
    return count


# ---------------------------------------------------------------------------
# benchmarking


@dataclass(frozen=True)
class BenchRecord:
    """One synthesis trial; failed trials keep NaN robustness fields."""

    trial: int
    seed: int
    x0: tuple
    rho_exact: float
    rho_smooth: float
    satisfied: bool
    iterations: int
    wall_ms: float

    @property
    def failed(self):
        return math.isnan(self.rho_exact)


@dataclass(frozen=True)
class BenchAggregate:
    """Mean/stddev summary over completed trials, population convention."""

    trials: int
    completed: int
    mean_rho: float
    std_rho: float
    median_rho: float
    mean_wall_ms: float
    std_wall_ms: float
    success_rate: float


def _run_trial(config, trial):
    seed = config.seed + trial
    x0 = sample_x0(config, _x0_rng(seed))
    start = time.perf_counter()
    try:
        result = synthesize(build_problem(config, x0=x0, seed=seed))
    except SynthesisFailure:
        wall_ms = (time.perf_counter() - start) * 1e3
        return BenchRecord(trial, seed, tuple(x0), float("nan"), float("nan"),
                           False, 0, wall_ms)
    wall_ms = (time.perf_counter() - start) * 1e3
    return BenchRecord(
        trial=trial,
        seed=seed,
        x0=tuple(x0),
        rho_exact=result.rho_exact,
        rho_smooth=result.rho_smooth,
        satisfied=result.satisfied,
        iterations=result.iterations,
        wall_ms=wall_ms,
    )


def run_bench(config, trials, time_budget_s=None):
    """Repeat synthesis with per-trial seeds and starts.

    Trials run in submission-order waves sized by the thread limit. When a
    time budget is given, no new wave starts once it is spent; in-flight
    trials always finish and at least one trial always runs.
    """
    trials = int(trials)
    if trials < 1:
        raise ScenarioError("trials must be at least 1")
    start = time.perf_counter()
    records = []
    done = 0
    while done < trials:
        if time_budget_s is not None and records:
            if time.perf_counter() - start >= time_budget_s:
                break
        wave = range(done, min(trials, done + thread_limit()))
        records.extend(map_ordered(lambda i: _run_trial(config, i), wave))
        done = records[-1].trial + 1
    return records, aggregate_bench(records)


def aggregate_bench(records):
    ok = [r for r in records if not r.failed]
    rho = np.array([r.rho_exact for r in ok])
    wall = np.array([r.wall_ms for r in ok])
    nan = float("nan")
    return BenchAggregate(
        trials=len(records),
        completed=len(ok),
        mean_rho=float(rho.mean()) if ok else nan,
        std_rho=float(rho.std()) if ok else nan,
        median_rho=float(np.median(rho)) if ok else nan,
        mean_wall_ms=float(wall.mean()) if ok else nan,
        std_wall_ms=float(wall.std()) if ok else nan,
        success_rate=sum(r.satisfied for r in records) / len(records),
    )


def save_bench_csv(records, path):
    """Header: trial,seed,x0_0,...,rho_exact,rho_smooth,satisfied,iters,wall_ms."""
    if not records:
        raise ScenarioError("nothing to save: no bench records")
    n = len(records[0].x0)
    header = ["trial", "seed"] + [f"x0_{i}" for i in range(n)]
    header += ["rho_exact", "rho_smooth", "satisfied", "iters", "wall_ms"]
    lines = [",".join(header)]
    for r in records:
        row = [str(r.trial), str(r.seed)]
        row += [repr(float(v)) for v in r.x0]
        row += [repr(r.rho_exact), repr(r.rho_smooth), str(int(r.satisfied)),
                str(r.iterations), repr(r.wall_ms)]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_bench_csv(path):
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ScenarioError(f"{path} is empty")
    header = lines[0].split(",")
    n = sum(1 for h in header if h.startswith("x0_"))
    want = 2 + n + 5
    if len(header) != want or header[0] != "trial":
        raise ScenarioError(f"{path} does not look like a bench CSV")
    records = []
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != want:
            raise ScenarioError(f"{path}: row has {len(cells)} cells, expected {want}")
        records.append(
            BenchRecord(
                trial=int(cells[0]),
                seed=int(cells[1]),
                x0=tuple(float(c) for c in cells[2 : 2 + n]),
                rho_exact=float(cells[2 + n]),
                rho_smooth=float(cells[3 + n]),
                satisfied=bool(int(cells[4 + n])),
                iterations=int(cells[5 + n]),
                wall_ms=float(cells[6 + n]),
            )
        )
    return records


# ---------------------------------------------------------------------------
# scaling sweeps


@dataclass(frozen=True)
class ScalingRecord:
    """Cost of one synthesize() call at one sweep point.

    op_count is the number of scalar arguments the soft operators consumed
    per smooth evaluation; it is a pure function of the formula shape and
    horizon, so it is the hardware-independent cost signal. wall_ms covers
    the whole synthesize call; forwards counts smooth evaluations inside
    it, so wall_ms/forwards approximates per-iteration cost.
    """

    sweep: str
    value: int
    wall_ms: float
    op_count: float
    forwards: int
    iterations: int
    rho_exact: float


def _measure(config):
    problem = build_problem(config)
    with count_operator_evals() as counter:
        start = time.perf_counter()
        result = synthesize(problem)
        wall_ms = (time.perf_counter() - start) * 1e3
    per_forward = counter.scalars / counter.forwards if counter.forwards else float("nan")
    return wall_ms, per_forward, counter.forwards, result


def run_scaling(n_values=(), p_values=(), base=None, restarts=2, max_iters=40):
    """Cost sweeps over horizon length and station count.

    The N sweep keeps a single service station (first station, first
    cluster) and stretches the horizon; the P sweep fixes the horizon at
    29 and regenerates the station grid with P stations per cluster. base
    supplies geometry and knobs and defaults to the charging builtin;
    restarts and max_iters are deliberately small because the sweep
    measures cost per evaluation, not solution quality.
    """
    base = builtin_scenario("charging") if base is None else base
    records = []
    for n in n_values:
        n = int(n)
        cfg = dataclasses.replace(
            base,
            name=f"{base.name}_n{n}",
            T=n,
            spec=_single_station_spec(n),
            restarts=restarts,
            max_iters=max_iters,
        )
        wall_ms, per_forward, forwards, result = _measure(cfg)
        records.append(
            ScalingRecord("N", n, wall_ms, per_forward, forwards,
                          result.iterations, result.rho_exact)
        )
    for p in p_values:
        p = int(p)
        if p < 1:
            raise ScenarioError(f"station count must be positive, got {p}")
        counts = (p, p, p)
        kept = {
            name: dict(base.regions[name])
            for name in base.regions.names()
            if not name.startswith("chg")
        }
        kept.update(_station_grid(counts))
        cfg = dataclasses.replace(
            base,
            name=f"{base.name}_p{p}",
            T=29,
            regions=RegionTable(kept),
            spec=_charging_spec(29, counts),
            restarts=restarts,
            max_iters=max_iters,
        )
        wall_ms, per_forward, forwards, result = _measure(cfg)
        records.append(
            ScalingRecord("P", p, wall_ms, per_forward, forwards,
                          result.iterations, result.rho_exact)
        )
    return records


def save_scaling_csv(records, path):
    """Header: sweep,value,wall_ms,op_count."""
    lines = ["sweep,value,wall_ms,op_count"]
    for r in records:
        lines.append(f"{r.sweep},{r.value},{r.wall_ms!r},{r.op_count!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_scaling_csv(path):
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "sweep,value,wall_ms,op_count":
        raise ScenarioError(f"{path} does not look like a scaling CSV")
    out = []
    for line in lines[1:]:
        sweep, value, wall_ms, op_count = line.split(",")
        out.append(
            ScalingRecord(sweep, int(value), float(wall_ms), float(op_count), 0, 0, float("nan"))
        )
    return out
