"""Energy per operation from the excitation inductors of each gate."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..clocking import Benchmark, BuiltCircuit, DesignRun
from ..engine import MIDPOINT, SimConfig, energy_accounting


@dataclass
class EnergyEntry:
    f: float
    T: float
    energy: float  # J per operation, averaged over input combinations
    per_combination: dict[str, float]  # input bits -> J
    per_gate: dict[str, float]  # gate -> J, averaged over combinations
    scope: str = "cut"


@dataclass
class EnergySweepResult:
    entries: list[EnergyEntry] = field(default_factory=list)

    @property
    def T(self) -> list[float]:
        return [e.T for e in self.entries]

    @property
    def E(self) -> list[float]:
        return [e.energy for e in self.entries]


def gate_cycle_energy(run: DesignRun, gate: str, cycle: int, rule: str = MIDPOINT) -> float:
    """Energy delivered through a gate's excitation inductors over one excitation period."""
    c: BuiltCircuit = run.circuit
    window = c.cycle_window(gate, cycle)
    rep = energy_accounting(run.record, c.cells[gate].lx, window, rule)
    return rep.total


def energy_per_op(
    bench: Benchmark,
    config: SimConfig | None = None,
    mode: str | None = None,
    scope: str = "cut",
    rule: str = MIDPOINT,
) -> EnergyEntry:
    """Average over the scored input combinations of the summed per-gate cycle energy.

    ``scope`` is "cut" (the circuit under test) or "all" (every gate,
    peripheral buffers included).  The plan should settle for >= 4 cycles.
    The gates are simulated without the gray-zone dither.
    """
    # noise-free cells: the gray-zone dither flips sign between cycles and would
    # leave a spurious stored-energy difference in each window
    bench = replace(bench, params=replace(bench.params, gray_zone_current=0.0))
    run = bench.run(config, mode)
    c = run.circuit
    plan = bench.plan
    if scope == "cut":
        gates = list(bench.cut_gates)
    elif scope == "all":
        gates = sorted(c.cells)
    else:
        raise ValueError(f"unknown energy scope {scope!r}")
    stim = plan.stimulus()
    per_comb: dict[str, list[float]] = {}
    per_gate: dict[str, list[float]] = {g: [] for g in gates}
    for n in range(plan.settle, plan.n_cycles):
        key = "".join(stim[p][n] for p in plan.inputs)
        total = 0.0
        for g in gates:
            e = gate_cycle_energy(run, g, n, rule)
            per_gate[g].append(e)
            total += e
        per_comb.setdefault(key, []).append(total)
    combos = {k: float(np.mean(v)) for k, v in sorted(per_comb.items())}
    return EnergyEntry(
        bench.clock.f,
        bench.clock.T,
        float(np.mean(list(combos.values()))),
        combos,
        {g: float(np.mean(v)) for g, v in per_gate.items()},
        scope,
    )


def energy_sweep(builder, clocks: Sequence, config: SimConfig | None = None, mode: str | None = None, scope: str = "cut") -> EnergySweepResult:
    return EnergySweepResult([energy_per_op(builder(ck), config, mode, scope) for ck in clocks])
