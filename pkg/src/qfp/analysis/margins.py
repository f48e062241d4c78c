"""Operating-margin search over excitation power."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from ..clocking import Benchmark, ClockSpec
from ..engine import SimConfig
from .verify import verify_logic


class NoPassingPoint(RuntimeError):
    pass


@dataclass
class MarginResult:
    f: float
    T: float
    p_low: float | None  # dBm
    p_high: float | None
    passed: bool
    nominal: float | None = None
    resolution: float = 0.1
    clipped: tuple[bool, bool] = (False, False)  # pass region reached the window edge
    evaluations: dict[float, bool] = field(default_factory=dict)
    diagnostic: str = ""

    def __post_init__(self):
        if self.passed and not (self.p_low is not None and self.p_high is not None and self.p_low <= self.p_high):
            raise ValueError("a passing margin needs p_low <= p_high")

    @property
    def width_db(self) -> float:
        if not self.passed:
            return 0.0
        return self.p_high - self.p_low


def margin_width(p_low: float, p_high: float) -> float:
    return p_high - p_low


def margin_search(
    builder: Callable[[ClockSpec], Benchmark],
    clock: ClockSpec,
    span_db: float = 10.0,
    resolution: float = 0.1,
    config: SimConfig | None = None,
    mode: str | None = None,
    seed_step_db: float = 1.0,
) -> MarginResult:
    """Bisect outward from the clock's nominal power to the lowest and highest passing Px.

    Points live on a grid of ``resolution`` around the nominal power so the
    reported bounds pass and the points one step beyond them fail.  If the
    nominal power fails, the window is scanned at ``seed_step_db`` for a
    passing seed; none found gives ``passed=False``.
    """
    if not resolution > 0:
        raise ValueError("resolution must be > 0")
    nominal = clock.power_dbm
    n_span = int(math.floor(span_db / resolution + 1e-9))
    cache: dict[int, bool] = {}

    def ok(i: int) -> bool:
        if i not in cache:
            res = verify_logic(builder(clock.with_px(nominal + i * resolution)), config, mode)
            cache[i] = res.passed
        return cache[i]

    def result(lo, hi, passed, clipped=(False, False), diag=""):
        evals = {round(nominal + i * resolution, 9): v for i, v in sorted(cache.items())}
        to_p = lambda i: None if i is None else round(nominal + i * resolution, 9)
        return MarginResult(clock.f, clock.T, to_p(lo), to_p(hi), passed, nominal, resolution, clipped, evals, diag)

    seed = None
    if ok(0):
        seed = 0
    else:
        step = max(1, int(round(seed_step_db / resolution)))
        for m in range(step, n_span + 1, step):
            for i in (-m, m):
                if ok(i):
                    seed = i
                    break
            if seed is not None:
                break
    if seed is None:
        return result(None, None, False, diag=str(NoPassingPoint(f"no passing Px within nominal +-{span_db} dB")))

    def edge(direction: int) -> tuple[int, bool]:
        # find a failing point beyond the seed, then bisect
        good = seed
        bad = None
        step = max(1, int(round(1.0 / resolution)))
        while bad is None:
            cand = seed + direction * step
            if abs(cand) > n_span:
                cand = direction * n_span
                if ok(cand):
                    return cand, True
                bad = cand
                break
            if ok(cand):
                good = cand
                step *= 2
            else:
                bad = cand
        while abs(bad - good) > 1:
            mid = (good + bad) // 2
            if ok(mid):
                good = mid
            else:
                bad = mid
        return good, False

    lo, clip_lo = edge(-1)
    hi, clip_hi = edge(+1)
    return result(lo, hi, True, (clip_lo, clip_hi))
