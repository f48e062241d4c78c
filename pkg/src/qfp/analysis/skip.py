"""Maximum allowable latency, phase-skip feasibility and maximum clock frequency."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

from ..cells import AqfpCellParams, Buffer, CellKind, arity, logic_function
from ..clocking import Benchmark, ClockSpec, Design, build_skip_chain
from ..engine import SimConfig
from .logic import LogicTestPlan
from .margins import NoPassingPoint, margin_search
from .verify import verify_logic


def hop_benchmark(kind: CellKind, clock: ClockSpec, params: AqfpCellParams, prbs_length: int = 16, seed: int = 0x5A) -> Benchmark:
    """Driver gate on phase 0 feeding ``kind`` on phase 1 (skew = clock.T), then a load."""
    if arity(kind) != (1, 1):
        raise ValueError("the hop test needs a single-input, single-output gate")
    d = Design()
    d.add_input("in")
    d.add_gate("src", Buffer(), 0, [("in", False)])
    d.add_gate("dst", kind, 1, [("src", False)])
    d.add_gate("load", Buffer(), 2, [("dst", False)])
    d.labels.update(A="src", Q="dst")
    plan = LogicTestPlan.exhaustive(["in"], logic_function(kind), prbs_length, seed)
    return Benchmark(d, clock, params, plan, ["dst"], "dst", "hop")


def _grid_bisect(ok, lo: int, hi: int) -> int:
    """Largest i in [lo, hi) with ok(i), given ok(lo) and not ok(hi)."""
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass
class TmaxResult:
    tmax: float
    resolution: float
    f: float
    bracketed: bool = True
    evaluations: dict[float, bool] = field(default_factory=dict)


def tmax_estimate(
    kind: CellKind,
    clock: ClockSpec,
    params: AqfpCellParams,
    resolution: float = 1e-12,
    t_min: float = 5e-12,
    t_max: float | None = None,
    config: SimConfig | None = None,
    mode: str | None = None,
) -> TmaxResult:
    """Largest single-hop skew that still verifies, by bisection on a ``resolution`` grid.

    The search spans [t_min, t_max] (default half a clock period); clock.T
    is ignored.  Raises NoPassingPoint if even t_min fails.
    """
    t_max = 0.5 * clock.period if t_max is None else t_max
    evals: dict[float, bool] = {}

    def ok(i: int) -> bool:
        T = t_min + i * resolution
        if T not in evals:
            evals[T] = verify_logic(hop_benchmark(kind, replace(clock, T=T), params), config, mode).passed
        return evals[T]

    n = int(math.floor((t_max - t_min) / resolution + 1e-9))
    if not ok(0):
        raise NoPassingPoint(f"a hop of {t_min:g} s already fails")
    if ok(n):
        return TmaxResult(t_min + n * resolution, resolution, clock.f, False, evals)
    i = _grid_bisect(ok, 0, n)
    return TmaxResult(t_min + i * resolution, resolution, clock.f, True, evals)


def predicted_feasible(k: int, T: float, tmax: float) -> bool:
    return (k + 1) * T <= tmax


@dataclass
class SkipEntry:
    T: float
    k: int
    passed: bool
    errors: int
    margin_db: float | None = None
    predicted: bool | None = None
    diagnostic: str = ""


@dataclass
class SkipFeasibilityMatrix:
    f: float
    T_values: list[float]
    k_values: list[int]
    entries: dict[tuple[float, int], SkipEntry]
    tmax: float | None = None

    def __post_init__(self):
        for T in self.T_values:
            for k in self.k_values:
                if (T, k) not in self.entries:
                    raise ValueError(f"missing entry for T={T:g}, k={k}")

    def passed(self, T: float, k: int) -> bool:
        return self.entries[(T, k)].passed

    def passing_k(self, T: float) -> list[int]:
        return [k for k in self.k_values if self.passed(T, k)]

    def monotone(self) -> bool:
        """Once a k fails at some T, every larger k fails too."""
        for T in self.T_values:
            failed = False
            for k in sorted(self.k_values):
                if failed and self.passed(T, k):
                    return False
                failed = failed or not self.passed(T, k)
        return True

    def agreement(self) -> float | None:
        cells = [e for e in self.entries.values() if e.predicted is not None]
        if not cells:
            return None
        return sum(e.predicted == e.passed for e in cells) / len(cells)


def _skip_cell(args) -> SkipEntry:
    T, k, clock, params, with_margin, prbs_length, config, mode = args
    ck = replace(clock, T=T)
    res = verify_logic(build_skip_chain(k, ck, params, prbs_length=prbs_length), config, mode)
    entry = SkipEntry(T, k, res.passed, res.errors, diagnostic=res.diagnostic)
    if with_margin and res.passed:
        m = margin_search(lambda c: build_skip_chain(k, c, params, prbs_length=prbs_length), ck, config=config, mode=mode)
        entry.margin_db = m.width_db
    return entry


def run_cells(fn, cells: list, jobs: int = 1) -> list:
    """Evaluate independent grid cells, in order, optionally in worker processes."""
    if jobs <= 1 or len(cells) <= 1:
        return [fn(c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, cells))


def skip_scan(
    T_values: Sequence[float],
    k_values: Sequence[int],
    clock: ClockSpec,
    params: AqfpCellParams,
    tmax: float | None = None,
    with_margin: bool = False,
    prbs_length: int = 16,
    config: SimConfig | None = None,
    mode: str | None = None,
    jobs: int = 1,
) -> SkipFeasibilityMatrix:
    """Verify a k-skip chain for every (T, k); ``tmax`` adds the predicted feasibility."""
    T_values = list(T_values)
    k_values = list(k_values)
    cells = [(T, k, clock, params, with_margin, prbs_length, config, mode) for T in T_values for k in k_values]
    results = run_cells(_skip_cell, cells, jobs)
    entries = {}
    for e in results:
        if tmax is not None:
            e.predicted = predicted_feasible(e.k, e.T, tmax)
        entries[(e.T, e.k)] = e
    return SkipFeasibilityMatrix(clock.f, T_values, k_values, entries, tmax)


@dataclass
class FrequencyLimit:
    k: int
    T: float
    f_max: float
    resolution: float
    bracketed: bool
    evaluations: dict[float, bool] = field(default_factory=dict)


def max_frequency(
    k: int,
    clock: ClockSpec,
    params: AqfpCellParams,
    f_low: float = 1e9,
    f_high: float = 8e9,
    resolution: float = 0.05e9,
    prbs_length: int = 16,
    config: SimConfig | None = None,
    mode: str | None = None,
) -> FrequencyLimit:
    """Highest passing clock frequency of the k-skip chain at the clock's T (bisection)."""
    evals: dict[float, bool] = {}

    def ok(i: int) -> bool:
        f = round(f_low + i * resolution, 3)
        if f not in evals:
            evals[f] = verify_logic(build_skip_chain(k, replace(clock, f=f), params, prbs_length=prbs_length), config, mode).passed
        return evals[f]

    n = int(math.floor((f_high - f_low) / resolution + 1e-9))
    if not ok(0):
        raise NoPassingPoint(f"k = {k} chain fails already at {f_low:g} Hz")
    if ok(n):
        return FrequencyLimit(k, clock.T, f_low + n * resolution, resolution, False, evals)
    i = _grid_bisect(ok, 0, n)
    return FrequencyLimit(k, clock.T, round(f_low + i * resolution, 3), resolution, True, evals)
