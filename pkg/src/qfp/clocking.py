"""Delay-line excitation network, phase assignment and benchmark circuits.

The excitation current runs from a matched source through every phase in
turn: the gates of one phase are threaded in series, then a delay line of
length T leads to the next phase, and the last phase ends in a matched
terminator.  A gate on phase i therefore sees the excitation delayed by i*T.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .analysis.logic import LogicTestPlan
from .cells import (
    AqfpCellParams,
    And,
    Buffer,
    CellFragment,
    CellKind,
    Coil,
    Majority3,
    Or,
    SignalProbeSpec,
    XorMacro,
    build_cell,
    couple,
    driver,
    load_coil,
    logic_function,
    xor_structure,
)
from .engine import FULL_LINE, IDEAL_DELAY, RunRecord, SimConfig, Simulator
from .netlist import (
    CurrentSource,
    Dc,
    Device,
    Netlist,
    Pwl,
    Resistor,
    Sine,
    TransmissionLine,
)


class ClockingError(ValueError):
    pass


class EmptyPhase(ClockingError):
    pass


class UnsupportedCut(ClockingError):
    pass


class SkipTooLarge(ClockingError):
    pass


class InfeasibleEdge(ClockingError):
    pass


# --------------------------------------------------------------------------
# excitation power


def px_to_amplitude(px_dbm: float, z0: float = 50.0) -> float:
    """Sine amplitude whose average power into ``z0`` is ``px_dbm``."""
    if not z0 > 0:
        raise ValueError("Z0 must be > 0")
    return math.sqrt(2.0 * 10.0 ** (px_dbm / 10.0) * 1e-3 / z0)


def amplitude_to_px(amplitude: float, z0: float = 50.0) -> float:
    if not (z0 > 0 and amplitude > 0):
        raise ValueError("amplitude and Z0 must be > 0")
    return 10.0 * math.log10(amplitude * amplitude * z0 / 2.0 / 1e-3)


@dataclass(frozen=True)
class ClockSpec:
    """Excitation: sine of amplitude A (or power px) at f, dc offset, per-stage delay T.

    Give exactly one of ``px`` (dBm) or ``amplitude`` (A); the other is derived.
    ``dc`` of None means the cell parameters' nominal offset.
    """

    f: float
    T: float
    px: float | None = None
    amplitude: float | None = None
    dc: float | None = None
    z0: float = 50.0
    terminator: float = 50.0
    ramp_cycles: float = 2.0  # linear turn-on of the dc offset

    def __post_init__(self):
        if not self.f > 0:
            raise ValueError("clock frequency must be > 0")
        if not self.T > 0:
            raise ValueError("stage delay T must be > 0")
        if not (self.z0 > 0 and self.terminator > 0):
            raise ValueError("impedances must be > 0")
        if (self.px is None) == (self.amplitude is None):
            raise ValueError("give exactly one of px or amplitude")
        if self.amplitude is not None and not self.amplitude > 0:
            raise ValueError("amplitude must be > 0")

    @property
    def period(self) -> float:
        return 1.0 / self.f

    @property
    def amp(self) -> float:
        return self.amplitude if self.amplitude is not None else px_to_amplitude(self.px, self.z0)

    @property
    def power_dbm(self) -> float:
        return self.px if self.px is not None else amplitude_to_px(self.amplitude, self.z0)

    def with_px(self, px: float) -> "ClockSpec":
        return replace(self, px=px, amplitude=None)

    def with_amplitude(self, amplitude: float) -> "ClockSpec":
        return replace(self, px=None, amplitude=amplitude)

    def peak_time(self, phase: int, cycle: int) -> float:
        """Excitation peak of ``phase`` that processes input bit ``cycle``."""
        P = self.period
        return (cycle + 1) * P + 0.25 * P + phase * self.T


def nominal_clock(params: AqfpCellParams, f: float = 5e9, T: float = 10e-12, **kw) -> ClockSpec:
    return ClockSpec(f=f, T=T, amplitude=params.drive_amplitude, dc=params.dc_offset, **kw)


def build_clock_network(
    groups: Sequence[Sequence[str]],
    clock: ClockSpec,
    dc: float,
    mode: str = FULL_LINE,
) -> tuple[list[Device], dict[str, tuple[str, str]]]:
    """Excitation network for ``groups[i]`` = gate names on phase i.

    Returns the network devices and each gate's excitation node pair.  An
    empty group is a skipped phase: in full-line mode its delay line stays.
    """
    if not groups:
        raise EmptyPhase("at least one phase is required")
    A = clock.amp
    ramp = clock.ramp_cycles * clock.period
    devs: list[Device] = []
    ports: dict[str, tuple[str, str]] = {}

    def thread(i: int, start: str, end: str) -> None:
        gates = list(groups[i])
        nodes = [start] + [f"xe{i}_{j}" for j in range(1, len(gates))] + [end]
        for j, g in enumerate(gates):
            ports[g] = (nodes[j], nodes[j + 1])

    if mode == FULL_LINE:
        # Norton source: 2*I in parallel with Z0 drives I into the matched line
        devs.append(CurrentSource("ix", "0", "xs", Sine(0.0, 2.0 * A, clock.f)))
        devs.append(CurrentSource("idc", "0", "xs", Dc(2.0 * dc, ramp)))
        devs.append(Resistor("rsrc", "xs", "0", clock.z0))
        start = "xs"
        n = len(groups)
        for i in range(n):
            end = start if not groups[i] else f"xo{i}"
            thread(i, start, end)
            if i + 1 < n:
                nxt = f"xp{i + 1}"
                devs.append(TransmissionLine(f"t{i + 1}", end, "0", nxt, "0", clock.z0, clock.T))
                start = nxt
            else:
                devs.append(Resistor("rterm", end, "0", clock.terminator))
    elif mode == IDEAL_DELAY:
        for i, group in enumerate(groups):
            if not group:
                continue
            start = f"xp{i}"
            devs.append(CurrentSource(f"ix{i}", "0", start, Sine(0.0, A, clock.f, i * clock.T)))
            devs.append(CurrentSource(f"idc{i}", "0", start, Dc(dc, ramp)))
            thread(i, start, "0")
    else:
        raise ValueError(f"unknown excitation mode {mode!r}")
    return devs, ports


# --------------------------------------------------------------------------
# gate-level designs


@dataclass
class GateNode:
    name: str
    kind: CellKind
    phase: int
    inputs: list[tuple[str, bool]]  # (source gate or primary input, inverted)


@dataclass
class Design:
    """A phase-annotated gate DAG with primary inputs and labeled gates."""

    inputs: list[str] = field(default_factory=list)
    gates: dict[str, GateNode] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    labels: dict[str, str] = field(default_factory=dict)
    skipped: set[int] = field(default_factory=set)

    def add_input(self, name: str) -> None:
        self.inputs.append(name)

    def add_gate(self, name: str, kind: CellKind, phase: int, inputs: Sequence[tuple[str, bool]]) -> None:
        if name in self.gates or name in self.inputs:
            raise ClockingError(f"duplicate gate name {name!r}")
        if phase < 0:
            raise ClockingError("phases are non-negative")
        self.gates[name] = GateNode(name, kind, phase, list(inputs))

    def set_output(self, gate: str) -> None:
        self.outputs.append(gate)

    @property
    def n_phases(self) -> int:
        top = max((g.phase + (2 if isinstance(g.kind, XorMacro) else 0) for g in self.gates.values()), default=0)
        return max([top] + list(self.skipped)) + 1

    def expanded(self) -> list[GateNode]:
        """Gate list with XOR macros replaced by their sub-gates."""
        out: list[GateNode] = []
        for g in self.gates.values():
            if isinstance(g.kind, XorMacro):
                port = {"a": g.inputs[0], "b": g.inputs[1]}
                for sg in xor_structure(g.name):
                    ins = []
                    for src, inv in sg.inputs:
                        if src in port:
                            s, i0 = port[src]
                            ins.append((self.resolve(s), i0 != inv))
                        else:
                            ins.append((src, inv))
                    out.append(GateNode(sg.name, sg.kind, g.phase + sg.phase_offset, ins))
            else:
                out.append(GateNode(g.name, g.kind, g.phase, [(self.resolve(s), inv) for s, inv in g.inputs]))
        return out

    def resolve(self, name: str) -> str:
        g = self.gates.get(name)
        if g is not None and isinstance(g.kind, XorMacro):
            return f"{name}_q"
        return name

    def phase_of(self, name: str) -> int:
        for g in self.expanded():
            if g.name == self.resolve(name):
                return g.phase
        raise KeyError(name)

    def check_phases(self) -> None:
        """Every data edge must run from a lower to a strictly higher phase."""
        gates = {g.name: g for g in self.expanded()}
        for g in gates.values():
            for src, _ in g.inputs:
                if src in gates and not gates[src].phase < g.phase:
                    raise ClockingError(f"edge {src}->{g.name} does not advance in phase")


def driver_wave(bits: str, clock: ClockSpec, phase: int, amplitude: float) -> Pwl:
    """Return-to-zero input current, present while a phase-``phase`` gate decides.

    It mimics the output of a gate one stage earlier: each bit is a pulse
    from 0.2 P before to 0.3 P after the receiving phase's excitation zero
    crossing, with 0.05 P ramps, so no stray input leaks past the window.
    """
    P = clock.period
    pts = [(0.0, 0.0)]
    for n, b in enumerate(bits):
        c = (n + 1) * P + phase * clock.T
        v = amplitude if b == "1" else -amplitude
        pts += [(c - 0.2 * P, 0.0), (c - 0.15 * P, v), (c + 0.25 * P, v), (c + 0.3 * P, 0.0)]
    return Pwl(tuple(pts))


def dither_wave(name: str, clock: ClockSpec, phase: int, n_cycles: int, amplitude: float) -> Pwl:
    """Seeded random-sign current, constant through each decision and flipped at excitation minima."""
    P = clock.period
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    signs = rng.choice((-1.0, 1.0), size=n_cycles + 2)
    r = 0.05 * P
    pts = [(0.0, amplitude * signs[0])]
    for n in range(n_cycles + 1):
        # boundary between cycle n-1 and n: the excitation minimum before peak n
        b = clock.peak_time(phase, n) - 0.5 * P
        pts += [(b - r, amplitude * signs[n]), (b + r, amplitude * signs[n + 1])]
    return Pwl(tuple(pts))


@dataclass
class BuiltCircuit:
    netlist: Netlist
    design: Design
    clock: ClockSpec
    params: AqfpCellParams
    phases: dict[str, int]  # expanded gate -> phase
    cells: dict[str, CellFragment]
    probes: dict[str, SignalProbeSpec]
    n_cycles: int
    mode: str

    def sample_times(self, gate: str, cycles: Sequence[int] | None = None) -> np.ndarray:
        ph = self.phases[self.design.resolve(gate)]
        cycles = range(self.n_cycles) if cycles is None else cycles
        return np.array([self.clock.peak_time(ph, n) for n in cycles])

    def cycle_window(self, gate: str, cycle: int) -> tuple[float, float]:
        """One full excitation period of ``gate`` centered on its peak for ``cycle``."""
        t = self.clock.peak_time(self.phases[self.design.resolve(gate)], cycle)
        return t - 0.5 * self.clock.period, t + 0.5 * self.clock.period

    @property
    def t_stop(self) -> float:
        last = max(self.phases.values())
        return self.clock.peak_time(last, self.n_cycles - 1) + 0.5 * self.clock.period

    def probe_labels(self) -> list[str]:
        return sorted({p.label for p in self.probes.values()})


def build_design(
    design: Design,
    clock: ClockSpec,
    params: AqfpCellParams,
    bits: Mapping[str, str],
    mode: str = FULL_LINE,
    check: bool = True,
) -> BuiltCircuit:
    """Netlist of a design: gates, data couplings, input drivers and the excitation network."""
    design.check_phases()
    gates = design.expanded()
    n_phases = design.n_phases
    groups: list[list[str]] = [[] for _ in range(n_phases)]
    for g in gates:
        groups[g.phase].append(g.name)
    for i in design.skipped:
        if groups[i]:
            raise ClockingError(f"phase {i} is marked skipped but holds gates")
    for i, grp in enumerate(groups):
        if not grp and i not in design.skipped and mode == FULL_LINE and 0 < i < n_phases - 1:
            raise EmptyPhase(f"phase {i} has no gates and is not marked skipped")
    dc = clock.dc if clock.dc is not None else params.dc_offset
    devices, ports = build_clock_network(groups, clock, dc, mode)

    cells: dict[str, CellFragment] = {}
    for g in gates:
        frag = build_cell(g.kind, params, g.name, ports[g.name], check=check)
        cells[g.name] = frag
        devices += frag.devices

    lengths = {len(s) for s in bits.values()}
    if set(bits) != set(design.inputs) or len(lengths) != 1:
        raise ClockingError("give one equal-length bit stream per primary input")
    n_cycles = lengths.pop()
    used: dict[str, int] = {}
    for g in gates:
        frag = cells[g.name]
        if len(g.inputs) != len(frag.inputs):
            raise ClockingError(f"{g.name}: {len(frag.inputs)} input(s) expected, {len(g.inputs)} wired")
        for idx, (src, inv) in enumerate(g.inputs):
            if src in design.inputs:
                tag = f"{src}_{g.name}" + (f"_{idx}" if any(s == src for s, _ in g.inputs[:idx]) else "")
                ddevs, coil = driver(tag, driver_wave(bits[src], clock, g.phase, params.signal_current), params)
                devices += ddevs
                devices.append(couple(coil, frag.inputs[idx], params, f"kd_{tag}", inv))
                continue
            if src not in cells:
                raise ClockingError(f"{g.name}: unknown input {src!r}")
            k = used.get(src, 0)
            if k >= len(cells[src].outputs):
                raise ClockingError(f"{src} has no free output for {g.name}")
            used[src] = k + 1
            devices.append(couple(cells[src].outputs[k], frag.inputs[idx], params, f"ke{k + 1}_{src}_{g.name}", inv))
    if params.gray_zone_current > 0:
        for g in gates:
            core = cells[g.name].core
            if core is not None:
                wave = dither_wave(g.name, clock, g.phase, n_cycles, params.gray_zone_current)
                devices.append(CurrentSource(f"ign_{g.name}", "0", core, wave))
    for name, frag in cells.items():
        for k in range(used.get(name, 0), len(frag.outputs)):
            ldevs, coil = load_coil(f"{name}_{k + 1}", params)
            devices += ldevs
            devices.append(couple(frag.outputs[k], coil, params, f"kl{k + 1}_{name}"))

    netlist = Netlist("aqfp design", tuple(devices), {}, {params.model.name: params.model})
    probes = {n: f.probe for n, f in cells.items() if f.probe is not None}
    phases = {g.name: g.phase for g in gates}
    return BuiltCircuit(netlist, design, clock, params, phases, cells, probes, n_cycles, mode)


@dataclass
class DesignRun:
    circuit: BuiltCircuit
    record: RunRecord

    @property
    def waveform(self):
        return self.record.waveform


def simulate_design(
    design: Design,
    clock: ClockSpec,
    params: AqfpCellParams,
    bits: Mapping[str, str],
    config: SimConfig | None = None,
    mode: str | None = None,
    check: bool = True,
) -> DesignRun:
    config = config or SimConfig()
    mode = mode or config.excitation_mode
    circuit = build_design(design, clock, params, bits, mode, check)
    config = replace(config, t_stop=circuit.t_stop, excitation_mode=mode)
    record = Simulator(circuit.netlist).run(config, circuit.probe_labels())
    return DesignRun(circuit, record)


# --------------------------------------------------------------------------
# benchmarks


@dataclass
class Benchmark:
    design: Design
    clock: ClockSpec
    params: AqfpCellParams
    plan: LogicTestPlan
    cut_gates: list[str]  # expanded gate names that form the circuit under test
    output: str = "q"
    name: str = ""

    def with_clock(self, clock: ClockSpec) -> "Benchmark":
        return replace(self, clock=clock)

    def with_plan(self, plan: LogicTestPlan) -> "Benchmark":
        return replace(self, plan=plan)

    def build(self, mode: str = FULL_LINE) -> BuiltCircuit:
        return build_design(self.design, self.clock, self.params, self.plan.stimulus(), mode)

    def run(self, config: SimConfig | None = None, mode: str | None = None) -> DesignRun:
        return simulate_design(self.design, self.clock, self.params, self.plan.stimulus(), config, mode)


def build_benchmark(
    cut: CellKind,
    clock: ClockSpec,
    params: AqfpCellParams,
    n_pre: int = 2,
    n_post: int = 2,
    prbs_length: int = 0,
    seed: int = 0x5A,
    settle: int = 3,
) -> Benchmark:
    """CUT surrounded by buffers: inputs A/B (phase 0) -> n_pre buffers -> CUT -> n_post buffers (last is Q) -> load."""
    if isinstance(cut, Buffer):
        n_in = 1
    elif isinstance(cut, (And, Or, XorMacro)):
        n_in = 2
    elif isinstance(cut, Majority3):
        n_in = 3
    else:
        raise UnsupportedCut(f"unsupported circuit under test {cut!r}")
    if n_post < 1:
        raise ClockingError("at least one output buffer is required")
    letters = "abc"[:n_in]
    d = Design()
    tails = []
    for L in letters:
        d.add_input(f"in_{L}")
        d.add_gate(L, Buffer(), 0, [(f"in_{L}", False)])
        prev = L
        for j in range(1, n_pre + 1):
            d.add_gate(f"p{L}{j}", Buffer(), j, [(prev, False)])
            prev = f"p{L}{j}"
        tails.append(prev)
        d.labels[L.upper()] = L
    p = n_pre + 1
    d.add_gate("cut", cut, p, [(t, False) for t in tails])
    span = 3 if isinstance(cut, XorMacro) else 1
    prev = "cut"
    for j in range(1, n_post + 1):
        name = "q" if j == n_post else f"q{j}"
        d.add_gate(name, Buffer(), p + span - 1 + j, [(prev, False)])
        prev = name
    d.add_gate("load", Buffer(), p + span + n_post, [("q", False)])
    d.labels["Q"] = "q"
    d.set_output("q")
    if isinstance(cut, XorMacro):
        cut_gates = [sg.name for sg in xor_structure("cut")]
    else:
        cut_gates = ["cut"]
    plan = LogicTestPlan.exhaustive([f"in_{L}" for L in letters], logic_function(cut), prbs_length, seed, settle)
    return Benchmark(d, clock, params, plan, cut_gates, "q", type(cut).__name__.lower())


@dataclass(frozen=True)
class ChainSpec:
    length: int
    skipped: frozenset[int]
    input_port: str = "in"
    output_port: str = "q"

    def __post_init__(self):
        if any(s <= 0 or s >= self.length - 1 for s in self.skipped):
            raise SkipTooLarge("only interior phases may be skipped")


def skip_chain_spec(k: int, stages: int = 5) -> ChainSpec:
    """Phases of a skip chain: stages on 0, 1, then k empty phases, the remaining stages, a load."""
    if k < 0:
        raise SkipTooLarge("k must be >= 0")
    return ChainSpec(stages + k + 1, frozenset(range(2, 2 + k)))


def build_skip_chain(
    k: int,
    clock: ClockSpec,
    params: AqfpCellParams,
    stages: int = 5,
    max_k: int = 4,
    prbs_length: int = 16,
    seed: int = 0x5A,
    settle: int = 3,
) -> Benchmark:
    """Buffer chain whose edge across the gap skips ``k`` phases (skew (k+1) T).

    Populated stages are numbered st1..st5; the gap follows st2.  A load
    buffer closes the chain.
    """
    if k > max_k or k > stages + 2:
        raise SkipTooLarge(f"k = {k} exceeds the supported maximum {max_k}")
    spec = skip_chain_spec(k, stages)
    d = Design()
    d.add_input("in")
    prev = "in"
    phase = 0
    for s in range(1, stages + 1):
        if s == 3:
            phase += k
        name = f"st{s}"
        d.add_gate(name, Buffer(), phase, [(prev, False)])
        d.labels[name.upper()] = name
        prev = name
        phase += 1
    d.add_gate("load", Buffer(), phase, [(prev, False)])
    d.skipped = set(spec.skipped)
    d.set_output(prev)
    plan = LogicTestPlan.exhaustive(["in"], lambda a: a, prbs_length, seed, settle)
    return Benchmark(d, clock, params, plan, [f"st{s}" for s in range(1, stages + 1)], prev, f"skip{k}")


# --------------------------------------------------------------------------
# phase assignment


@dataclass
class PhaseAssignment:
    phases: dict[str, int]
    T: float
    edges: list[tuple[str, str]]  # data edges after buffer removal
    inserted: list[tuple[str, str, list[int]]]  # (src, dst, phases of inserted buffers)
    removed: list[str]  # pass-through buffers dropped because the merged edge is allowed
    baseline_buffers: int  # buffers needed when every edge spans exactly one phase
    kept_buffers: int  # pass-through buffers that stay
    max_gap: int  # longest allowed edge in phases

    def skew(self, src: str, dst: str) -> float:
        return (self.phases[dst] - self.phases[src]) * self.T

    def skip(self, src: str, dst: str) -> int:
        return self.phases[dst] - self.phases[src] - 1

    @property
    def buffers_inserted(self) -> int:
        return sum(len(b) for _, _, b in self.inserted)

    @property
    def buffers_used(self) -> int:
        return self.kept_buffers + self.buffers_inserted

    @property
    def buffers_saved(self) -> int:
        return self.baseline_buffers - self.buffers_used


def assign_phases(
    dag: Mapping[str, Sequence[str]],
    T: float,
    tmax: float,
    safety: float = 0.8,
    removable: Sequence[str] = (),
) -> PhaseAssignment:
    """Longest-path phases for ``dag`` (gate -> list of fan-in gates).

    ``removable`` names pass-through buffers (one fan-in, one fan-out) that
    exist only to carry data one phase.  Each is dropped when the merged
    edge's skew stays within safety*tmax.  Remaining edges longer than
    floor(safety*tmax / T) phases are broken with inserted buffers.
    """
    if not tmax > T:
        raise InfeasibleEdge(f"a single hop T = {T:g} s already exceeds tmax = {tmax:g} s")
    limit = safety * tmax
    if T > limit * (1 + 1e-12):
        raise InfeasibleEdge(f"single hop T = {T:g} s exceeds safety*tmax = {limit:g} s")
    max_gap = int(math.floor(limit / T + 1e-9))
    nodes = set(dag) | {s for ins in dag.values() for s in ins}
    fanin = {n: list(dag.get(n, ())) for n in nodes}
    fanout: dict[str, list[str]] = {n: [] for n in nodes}
    for n, ins in fanin.items():
        for s in ins:
            fanout[s].append(n)
    for r in removable:
        if r not in nodes or len(fanin[r]) != 1 or len(fanout[r]) != 1:
            raise ClockingError(f"{r} is not a pass-through buffer")
    # longest-path levelization (Kahn order)
    order: list[str] = []
    indeg = {n: len(fanin[n]) for n in nodes}
    ready = sorted(n for n in nodes if indeg[n] == 0)
    while ready:
        n = ready.pop(0)
        order.append(n)
        for m in sorted(fanout[n]):
            indeg[m] -= 1
            if indeg[m] == 0:
                ready.append(m)
        ready.sort()
    if len(order) != len(nodes):
        raise ClockingError("gate graph has a cycle")
    phases: dict[str, int] = {}
    for n in order:
        phases[n] = max((phases[s] + 1 for s in fanin[n]), default=0)
    padding = sum(phases[n] - phases[s] - 1 for n in order for s in fanin[n])

    # drop pass-through buffers in topological order while the merged edge fits
    rm = set(removable)
    src_of = {}  # removed buffer -> the kept gate that now drives its fan-out
    removed = []
    for n in order:
        if n not in rm:
            continue
        s = fanin[n][0]
        s = src_of.get(s, s)
        if phases[fanout[n][0]] - phases[s] <= max_gap:
            src_of[n] = s
            removed.append(n)
    edges = [(src_of.get(s, s), n) for n in order if n not in src_of for s in fanin[n]]
    for n in removed:
        del phases[n]
    inserted = []
    for s, d in edges:
        gap = phases[d] - phases[s]
        if gap > max_gap:
            hops = math.ceil(gap / max_gap)
            step = gap / hops
            inserted.append((s, d, [phases[s] + int(round(step * h)) for h in range(1, hops)]))
    return PhaseAssignment(phases, T, edges, inserted, removed, padding + len(rm), len(rm) - len(removed), max_gap)
