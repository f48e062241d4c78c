"""Logic verification of benchmarks and latency measurement on signal currents."""

from __future__ import annotations

import numpy as np

from ..clocking import Benchmark, BuiltCircuit, DesignRun
from ..engine import EngineError, SimConfig
from ..netlist import NetlistError
from .logic import LogicResult, ProbeMissing, bits_to_str, decode, score


def score_run(run: DesignRun, bench: Benchmark, threshold: float | None = None) -> LogicResult:
    c = run.circuit
    plan = bench.plan
    gate = c.design.resolve(bench.output)
    if gate not in c.probes:
        raise ProbeMissing(f"no signal probe on {bench.output}")
    times = c.sample_times(gate, range(plan.settle, plan.n_cycles))
    th = threshold if threshold is not None else plan.threshold
    res = score(decode(run.waveform, c.probes[gate], times, th), plan.expected_bits())
    if not res.passed:
        res.diagnostic = f"decoded {bits_to_str(res.decoded)}, expected {bits_to_str(res.expected)}"
    return res


def verify_logic(bench: Benchmark, config: SimConfig | None = None, mode: str | None = None) -> LogicResult:
    """Simulate ``bench`` and score its output; engine failures count as a fail."""
    try:
        run = bench.run(config, mode)
    except (EngineError, NetlistError, ArithmeticError) as e:
        n = bench.plan.n_scored
        return LogicResult(False, n, 0, [None] * n, bench.plan.expected_bits(), f"{type(e).__name__}: {e}")
    res = score_run(run, bench)
    res.extra["run"] = run
    return res


def switch_times(circuit: BuiltCircuit, waveform, gate: str, cycles, level: float = 0.5) -> np.ndarray:
    """Times at which |I_st| of ``gate`` first exceeds ``level`` of its peak in each cycle's rising half."""
    g = circuit.design.resolve(gate)
    label = circuit.probes[g].label
    out = []
    for n in cycles:
        t0, t1 = circuit.cycle_window(g, n)
        w = waveform.window(t0, t1)
        t = w.times
        a = np.abs(w[label])
        i_pk = int(np.argmax(a))
        thr = level * a[i_pk]
        idx = np.nonzero(a[: i_pk + 1] < thr)[0]
        j = int(idx[-1]) if idx.size else 0
        # linear interpolation between the bracketing samples
        if j + 1 < a.size and a[j + 1] != a[j]:
            out.append(t[j] + (thr - a[j]) / (a[j + 1] - a[j]) * (t[j + 1] - t[j]))
        else:
            out.append(t[j])
    return np.array(out)


def latency(run: DesignRun, src: str, dst: str, cycles=None) -> float:
    """Mean delay between the switching of ``src`` and ``dst`` for the same data bit."""
    c = run.circuit
    cycles = list(range(2, c.n_cycles)) if cycles is None else list(cycles)
    a = switch_times(c, run.waveform, src, cycles)
    b = switch_times(c, run.waveform, dst, cycles)
    return float(np.mean(b - a))
