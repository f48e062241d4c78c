"""Logic test plans, PRBS stimulus and signal-current decoding."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ..cells import SignalProbeSpec
from ..engine import Waveform


class ProbeMissing(KeyError):
    pass


def prbs7(length: int, seed: int = 0x5A) -> str:
    """Bits of the x^7 + x^6 + 1 linear-feedback shift register."""
    state = seed & 0x7F
    if state == 0:
        raise ValueError("PRBS seed must be non-zero in its low 7 bits")
    out = []
    for _ in range(length):
        new = ((state >> 6) ^ (state >> 5)) & 1
        out.append(str(state & 1))
        state = ((state << 1) | new) & 0x7F
    return "".join(out)


def exhaustive_patterns(n_inputs: int) -> list[str]:
    """Per-input bit streams that walk through every input combination once."""
    combos = list(itertools.product("01", repeat=n_inputs))
    return ["".join(c[i] for c in combos) for i in range(n_inputs)]


@dataclass
class LogicTestPlan:
    """Stimulus and expectation for a logic check.

    ``patterns`` maps each input port to its scored bit stream.  The first
    ``settle`` cycles replay the stream's tail so the circuit starts in a
    representative state; only the cycles after them are scored.
    """

    inputs: tuple[str, ...]
    patterns: dict[str, str]
    expected: Callable[..., int]
    settle: int = 3
    threshold: float | None = None  # None: use each probe's own threshold

    def __post_init__(self):
        if self.settle < 2:
            raise ValueError("settle cycles must be >= 2")
        lengths = {len(self.patterns[p]) for p in self.inputs}
        if len(lengths) != 1 or 0 in lengths:
            raise ValueError("all input patterns must be non-empty and of equal length")
        for i in range(self.n_scored):
            self.expected(*(int(self.patterns[p][i]) for p in self.inputs))

    @property
    def n_scored(self) -> int:
        return len(self.patterns[self.inputs[0]])

    @property
    def n_cycles(self) -> int:
        return self.settle + self.n_scored

    def stimulus(self) -> dict[str, str]:
        out = {}
        for p in self.inputs:
            s = self.patterns[p]
            pre = (s * (self.settle // len(s) + 1))[-self.settle:]
            out[p] = pre + s
        return out

    def expected_bits(self) -> list[int]:
        return [int(self.expected(*(int(self.patterns[p][i]) for p in self.inputs))) for i in range(self.n_scored)]

    @classmethod
    def exhaustive(cls, inputs: Sequence[str], expected, prbs_length: int = 0, seed: int = 0x5A, settle: int = 3):
        inputs = tuple(inputs)
        pats = exhaustive_patterns(len(inputs))
        if prbs_length:
            bits = prbs7(prbs_length * len(inputs), seed)
            pats = [p + bits[i :: len(inputs)] for i, p in enumerate(pats)]
        return cls(inputs, dict(zip(inputs, pats)), expected, settle)


def decode(waveform: Waveform, probe: SignalProbeSpec, sample_times: Sequence[float], threshold: float | None = None) -> list[int | None]:
    """Sign of I_st at each sampling instant: 1, 0, or None when inside +-threshold."""
    if probe.label not in waveform:
        raise ProbeMissing(f"waveform has no column {probe.label}")
    th = probe.threshold if threshold is None else threshold
    vals = probe.polarity * waveform.value_at(probe.label, np.asarray(sample_times) + probe.sample_offset)
    return [1 if v > th else 0 if v < -th else None for v in vals]


@dataclass
class LogicResult:
    passed: bool
    errors: int
    first_failure: int | None
    decoded: list[int | None]
    expected: list[int]
    diagnostic: str = ""
    extra: dict = field(default_factory=dict)


def score(decoded: Sequence[int | None], expected: Sequence[int]) -> LogicResult:
    wrong = [i for i, (d, e) in enumerate(zip(decoded, expected)) if d != e]
    return LogicResult(not wrong, len(wrong), wrong[0] if wrong else None, list(decoded), list(expected))


def bits_to_str(bits: Sequence[int | None]) -> str:
    return "".join("x" if b is None else str(b) for b in bits)


def signal_amplitudes(waveform: Waveform, probes: Mapping[str, SignalProbeSpec], times: Mapping[str, Sequence[float]]) -> dict[str, np.ndarray]:
    return {g: waveform.value_at(p.label, np.asarray(times[g])) for g, p in probes.items()}
