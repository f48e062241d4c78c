"""Parameterized AQFP gate fragments.

Every elementary gate is the same two-junction core:

    J1 (a-gnd), L1 (a-c), L2 (b-c), J2 (b-gnd)
    center branch: c -> input coils -> output coils -> gnd

The excitation line passes through Lx1 and Lx2, coupled to L1 and L2 with
opposite signs so the applied flux adds around the J1-L1-L2-J2 loop and
cancels in the center branch.  The output (signal) current I_st is the
center-branch current; data moves between gates through mutual coupling of
a sender's output coil with a receiver's input coil.  A resistor across the
output coils damps the center-branch mode.

Input coils share ``lin`` and output coils share ``lq`` so every gate kind
has the same center inductance and hence the same switching threshold.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from .netlist import (
    ArityMismatch,
    CurrentSource,
    Dc,
    Device,
    Inductor,
    JjModel,
    Junction,
    MutualCoupling,
    Resistor,
    SourceWaveform,
)
from .units import PHI0

MODEL_NAME = "jj"


class UncalibratedParams(ValueError):
    pass


class CalibrationFailed(RuntimeError):
    pass


def default_model() -> JjModel:
    return JjModel(MODEL_NAME, ic=50e-6, c=0.15e-12, rsg=100.0, rn=34.0, vg=2.8e-3)


@dataclass(frozen=True)
class AqfpCellParams:
    model: JjModel = field(default_factory=default_model)
    l1: float = 1.6e-12
    l2: float = 1.6e-12
    lq: float = 2.0e-12
    lx1: float = 0.67e-12
    lx2: float = 0.67e-12
    kx: float = 0.5
    lin: float = 1.5e-12
    kin: float = 0.7
    kout: float = 0.7
    rd: float = 2.0  # damping resistor across the output coils
    drive_amplitude: float = 1.0e-3  # nominal excitation amplitude A
    dc_offset: float = 1.0e-3  # nominal dc offset I_d
    signal_current: float = 100e-6  # nominal |I_st| plateau of a loaded buffer (calibrated)
    const_fraction: float = 0.5  # constant-branch current / signal_current
    # thermal-noise stand-in: a random-sign current of this size at each gate core,
    # redrawn every cycle, so decisions taken on a vanishing input are not repeatable
    gray_zone_current: float = 2e-6

    def __post_init__(self):
        for name in ("l1", "l2", "lq", "lx1", "lx2", "lin", "rd", "drive_amplitude", "dc_offset", "signal_current"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be > 0, got {v!r}")
        for name in ("kx", "kin", "kout"):
            if not abs(getattr(self, name)) < 1:
                raise ValueError(f"|{name}| must be < 1")
        if not (math.isfinite(self.gray_zone_current) and self.gray_zone_current >= 0):
            raise ValueError("gray_zone_current must be >= 0")

    @property
    def m1(self) -> float:
        return self.kx * math.sqrt(self.lx1 * self.l1)

    @property
    def m2(self) -> float:
        return self.kx * math.sqrt(self.lx2 * self.l2)

    def loop_flux(self, current: float) -> float:
        """Flux applied around the junction loop by an excitation-line current."""
        return (self.m1 + self.m2) * current

    @property
    def edge_k(self) -> float:
        """Coupling coefficient between a sender's output coil and a receiver's input coil."""
        return math.copysign(math.sqrt(abs(self.kin * self.kout)), self.kin * self.kout)

    @property
    def threshold(self) -> float:
        return 0.2 * self.signal_current

    def check_calibration(self, tol: float = 0.05) -> None:
        target = 0.5 * PHI0
        for label, cur in (("ac", self.drive_amplitude), ("dc", self.dc_offset)):
            flux = self.loop_flux(cur)
            if not abs(flux - target) <= tol * target:
                raise UncalibratedParams(
                    f"{label} excitation flux {flux / PHI0:.3f} phi0 differs from 0.5 phi0 by more than {tol:.0%}"
                )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "AqfpCellParams":
        raw = json.loads(text)
        raw["model"] = JjModel(**raw["model"])
        return cls(**raw)


# --------------------------------------------------------------------------
# cell kinds


@dataclass(frozen=True)
class Buffer:
    pass


@dataclass(frozen=True)
class Inverter:
    pass


@dataclass(frozen=True)
class ConstantBranch:
    polarity: int = 1

    def __post_init__(self):
        if self.polarity not in (1, -1):
            raise ValueError("constant polarity must be +1 or -1")


@dataclass(frozen=True)
class Splitter:
    fanout: int = 2

    def __post_init__(self):
        if self.fanout not in (2, 3):
            raise ValueError("splitter fanout must be 2 or 3")


@dataclass(frozen=True)
class Majority3:
    pass


@dataclass(frozen=True)
class And:
    pass


@dataclass(frozen=True)
class Or:
    pass


@dataclass(frozen=True)
class XorMacro:
    pass


CellKind = Union[Buffer, Inverter, ConstantBranch, Splitter, Majority3, And, Or, XorMacro]

KIND_NAMES = {
    "buffer": Buffer(),
    "inverter": Inverter(),
    "splitter": Splitter(2),
    "splitter3": Splitter(3),
    "majority": Majority3(),
    "and": And(),
    "or": Or(),
    "xor": XorMacro(),
}


def kind_from_name(name: str) -> CellKind:
    try:
        return KIND_NAMES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown cell kind {name!r}; choose from {', '.join(KIND_NAMES)}") from None


def arity(kind: CellKind) -> tuple[int, int]:
    """(data inputs, outputs) seen by the outside world."""
    if isinstance(kind, (Buffer, Inverter)):
        return 1, 1
    if isinstance(kind, ConstantBranch):
        return 0, 1
    if isinstance(kind, Splitter):
        return 1, kind.fanout
    if isinstance(kind, Majority3):
        return 3, 1
    if isinstance(kind, (And, Or, XorMacro)):
        return 2, 1
    raise TypeError(f"not a cell kind: {kind!r}")


def logic_function(kind: CellKind):
    """Boolean function of the data inputs (first output for splitters)."""
    if isinstance(kind, (Buffer, Splitter)):
        return lambda a: a
    if isinstance(kind, Inverter):
        return lambda a: 1 - a
    if isinstance(kind, Majority3):
        return lambda a, b, c: int(a + b + c >= 2)
    if isinstance(kind, And):
        return lambda a, b: a & b
    if isinstance(kind, Or):
        return lambda a, b: a | b
    if isinstance(kind, XorMacro):
        return lambda a, b: a ^ b
    raise TypeError(f"{kind!r} has no logic function")


# --------------------------------------------------------------------------
# fragments


@dataclass(frozen=True)
class Coil:
    """A coupling coil: inductor name plus the sign it contributes to data coupling."""

    inductor: str
    polarity: int = 1


@dataclass(frozen=True)
class SignalProbeSpec:
    gate: str
    branch: str  # inductor carrying I_st
    threshold: float
    sample_offset: float = 0.0  # relative to the gate's excitation peak
    polarity: int = 1  # -1 when the output coupling is inverted (logic = -sign of the current)

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError("decode threshold must be > 0")

    @property
    def label(self) -> str:
        return f"I({self.branch})"


@dataclass
class CellFragment:
    name: str
    kind: CellKind
    devices: list[Device]
    inputs: list[Coil]
    outputs: list[Coil]
    probe: SignalProbeSpec | None
    excitation: tuple[str, str] | None  # series-through node pair
    lx: tuple[str, ...] = ()  # excitation inductors, for energy accounting
    core: str | None = None  # node joining L1, L2 and the input coils


def _core(name: str, params: AqfpCellParams, n_in: int, n_out: int, ex: tuple[str, str]) -> tuple[list[Device], list[str], list[str]]:
    a, b, c, x = f"a_{name}", f"b_{name}", f"c_{name}", f"x_{name}"
    devs: list[Device] = [
        Junction(f"b1_{name}", a, "0", MODEL_NAME),
        Junction(f"b2_{name}", b, "0", MODEL_NAME),
        Inductor(f"l1_{name}", a, c, params.l1),
        Inductor(f"l2_{name}", b, c, params.l2),
        Inductor(f"lx1_{name}", ex[0], x, params.lx1),
        Inductor(f"lx2_{name}", x, ex[1], params.lx2),
        MutualCoupling(f"kx1_{name}", f"lx1_{name}", f"l1_{name}", params.kx),
        MutualCoupling(f"kx2_{name}", f"lx2_{name}", f"l2_{name}", -params.kx),
    ]
    node = c
    ins = []
    for i in range(n_in):
        nxt = f"i{i + 1}_{name}"
        devs.append(Inductor(f"lin{i + 1}_{name}", node, nxt, params.lin / n_in))
        ins.append(f"lin{i + 1}_{name}")
        node = nxt
    top = node
    outs = []
    for i in range(n_out):
        nxt = "0" if i == n_out - 1 else f"o{i + 1}_{name}"
        devs.append(Inductor(f"lq{i + 1}_{name}", node, nxt, params.lq / n_out))
        outs.append(f"lq{i + 1}_{name}")
        node = nxt
    devs.append(Resistor(f"rd_{name}", top, "0", params.rd))
    return devs, ins, outs


def constant_source(name: str, polarity: int, params: AqfpCellParams) -> tuple[list[Device], Coil]:
    """A dc current in a coil that couples into a gate like a permanently held logic value."""
    i = polarity * params.const_fraction * params.signal_current
    coil = f"lk_{name}"
    devs: list[Device] = [
        Inductor(coil, f"k_{name}", "0", params.lq),
        CurrentSource(f"ik_{name}", "0", f"k_{name}", Dc(i)),
    ]
    return devs, Coil(coil, 1)


def driver(name: str, wave: SourceWaveform, params: AqfpCellParams) -> tuple[list[Device], Coil]:
    """External data input: a current source feeding a coil shaped like a gate output."""
    coil = f"ld_{name}"
    devs: list[Device] = [
        Inductor(coil, f"d_{name}", "0", params.lq),
        CurrentSource(f"id_{name}", "0", f"d_{name}", wave),
    ]
    return devs, Coil(coil, 1)


def load_coil(name: str, params: AqfpCellParams) -> tuple[list[Device], Coil]:
    coil = f"ll_{name}"
    return [Inductor(coil, f"ll_{name}", "0", params.lin)], Coil(coil, 1)


def build_cell(
    kind: CellKind,
    params: AqfpCellParams,
    name: str,
    excitation: tuple[str, str] | None = None,
    n_inputs: int | None = None,
    n_outputs: int | None = None,
    check: bool = True,
) -> CellFragment:
    """Netlist fragment for one gate.

    ``excitation`` is the node pair the excitation line threads through.
    ``n_inputs``/``n_outputs`` are checked against the kind's arity.
    And/Or carry their constant branch internally, so they expose 2 inputs.
    """
    want_in, want_out = arity(kind)
    if n_inputs is not None and n_inputs != want_in:
        raise ArityMismatch(f"{name}: {type(kind).__name__} takes {want_in} input(s), got {n_inputs}")
    if n_outputs is not None and n_outputs != want_out:
        raise ArityMismatch(f"{name}: {type(kind).__name__} drives {want_out} output(s), got {n_outputs}")
    if isinstance(kind, XorMacro):
        raise TypeError("XorMacro spans three phases; use expand_xor")
    if isinstance(kind, ConstantBranch):
        devs, coil = constant_source(name, kind.polarity, params)
        return CellFragment(name, kind, devs, [], [coil], None, None)
    if check:
        params.check_calibration()
    if excitation is None:
        raise ValueError(f"{name}: gates need an excitation node pair")
    core_in = 3 if isinstance(kind, (And, Or)) else want_in
    devs, ins, outs = _core(name, params, core_in, want_out, excitation)
    inputs = [Coil(i) for i in ins]
    out_pol = -1 if isinstance(kind, Inverter) else 1
    outputs = [Coil(o, out_pol) for o in outs]
    if isinstance(kind, (And, Or)):
        cdevs, ccoil = constant_source(name, -1 if isinstance(kind, And) else 1, params)
        devs += cdevs
        devs.append(couple(ccoil, inputs[2], params, f"kk_{name}"))
        inputs = inputs[:2]
    probe = SignalProbeSpec(name, outs[0], params.threshold, polarity=out_pol)
    return CellFragment(name, kind, devs, inputs, outputs, probe, excitation, (f"lx1_{name}", f"lx2_{name}"), f"c_{name}")


def couple(sender: Coil, receiver: Coil, params: AqfpCellParams, name: str, invert: bool = False) -> MutualCoupling:
    """Data coupling from a sender's output coil into a receiver's input coil."""
    sign = sender.polarity * receiver.polarity * (-1 if invert else 1)
    return MutualCoupling(name, sender.inductor, receiver.inductor, sign * params.edge_k)


# --------------------------------------------------------------------------
# XOR macro


@dataclass(frozen=True)
class SubGate:
    name: str
    kind: CellKind
    phase_offset: int
    # (source, inverted); sources are sub-gate names or the macro ports "a"/"b"
    inputs: tuple[tuple[str, bool], ...]


def xor_structure(name: str) -> list[SubGate]:
    """XOR(a, b) = OR(AND(a, not b), AND(not a, b)) on three consecutive phases."""
    sa, sb = f"{name}_sa", f"{name}_sb"
    g1, g2 = f"{name}_n1", f"{name}_n2"
    return [
        SubGate(sa, Splitter(2), 0, (("a", False),)),
        SubGate(sb, Splitter(2), 0, (("b", False),)),
        SubGate(g1, And(), 1, ((sa, False), (sb, True))),
        SubGate(g2, And(), 1, ((sa, True), (sb, False))),
        SubGate(f"{name}_q", Or(), 2, ((g1, False), (g2, False))),
    ]


@dataclass
class MacroFragment:
    name: str
    devices: list[Device]
    inputs: dict[str, Coil]  # "a", "b"
    output: Coil
    phases: dict[str, int]  # sub-gate -> phase offset
    gates: dict[str, CellFragment]
    probe: SignalProbeSpec


def expand_xor(
    name: str,
    params: AqfpCellParams,
    excitation: Sequence[tuple[str, str]],
) -> MacroFragment:
    """XOR built from splitters, two ANDs with one inverted input each, and an OR.

    ``excitation`` holds the node pair for each of the three phase offsets;
    sub-gates sharing a phase are threaded in series between that pair.
    """
    if len(excitation) != 3:
        raise ArityMismatch(f"{name}: XOR needs excitation ports for 3 phases")
    subs = xor_structure(name)
    by_phase: dict[int, list[SubGate]] = {}
    for sg in subs:
        by_phase.setdefault(sg.phase_offset, []).append(sg)
    gates: dict[str, CellFragment] = {}
    devices: list[Device] = []
    for off, group in sorted(by_phase.items()):
        start, end = excitation[off]
        nodes = [start] + [f"e{j}_{group[0].name}" for j in range(1, len(group))] + [end]
        for j, sg in enumerate(group):
            frag = build_cell(sg.kind, params, sg.name, (nodes[j], nodes[j + 1]))
            gates[sg.name] = frag
            devices += frag.devices
    used_out: dict[str, int] = {}
    inputs: dict[str, Coil] = {}
    for sg in subs:
        frag = gates[sg.name]
        for idx, (src, inv) in enumerate(sg.inputs):
            if src in ("a", "b"):
                inputs[src] = frag.inputs[idx]
                continue
            k = used_out.get(src, 0)
            used_out[src] = k + 1
            devices.append(couple(gates[src].outputs[k], frag.inputs[idx], params, f"k{k + 1}_{src}_{sg.name}", inv))
    out = gates[f"{name}_q"]
    return MacroFragment(
        name,
        devices,
        inputs,
        out.outputs[0],
        {sg.name: sg.phase_offset for sg in subs},
        gates,
        out.probe,
    )


# --------------------------------------------------------------------------
# calibration


@dataclass
class CalibrationReport:
    drive_amplitude: float
    dc_offset: float
    ac_flux: float  # achieved, in units of phi0
    dc_flux: float
    signal_current: float
    margin_db: float | None = None
    margin_low_dbm: float | None = None
    margin_high_dbm: float | None = None


def simulated_loop_flux(params: AqfpCellParams, clock, dt: float = 0.1e-12) -> tuple[float, float, float]:
    """Run one loaded buffer on a full excitation line and measure the applied loop flux.

    Returns (ac amplitude, dc offset) in webers and the |I_st| plateau.
    """
    from .clocking import Design, simulate_design
    from .engine import SimConfig

    design = Design()
    design.add_input("in")
    design.add_gate("g", Buffer(), 1, [("in", False)])
    design.set_output("g")
    run = simulate_design(design, replace(clock, amplitude=params.drive_amplitude, px=None), params,
                          {"in": "1111111"}, config=SimConfig(dt=dt), check=False)
    rec = run.record
    P = 1.0 / clock.f
    t = rec.times
    cycle = (t >= 4 * P) & (t < 5 * P)
    ix = rec.branch_current("lx1_g")[cycle]
    flux = params.loop_flux(1.0) * ix
    ac = 0.5 * (flux.max() - flux.min())
    dc = float(flux.mean())
    ist = np.abs(rec.branch_current("lq1_g")[cycle]).max()
    return float(ac), dc, float(ist)


def calibrate(params: AqfpCellParams, clock=None, margin: bool = False, tol: float = 0.02):
    """Set the excitation amplitude and dc offset so each loop sees 0.5 phi0 ac and 0.5 phi0 dc.

    Returns (calibrated params, report).  With ``margin`` the buffer margin at
    5 GHz, T = 20 ps is measured as well.
    """
    from .clocking import ClockSpec

    if clock is None:
        clock = ClockSpec(f=5e9, T=20e-12, amplitude=params.drive_amplitude, dc=params.dc_offset)
    if params.loop_flux(1.0) <= 0:
        raise CalibrationFailed("excitation does not couple into the gate loop (kx = 0)")
    target = 0.5 * PHI0
    p = replace(params, drive_amplitude=target / params.loop_flux(1.0), dc_offset=target / params.loop_flux(1.0))
    for _ in range(4):
        ac, dc, ist = simulated_loop_flux(p, replace(clock, dc=p.dc_offset))
        if abs(ac - target) <= tol * target and abs(dc - target) <= tol * target:
            break
        if ac <= 0 or dc <= 0:
            raise CalibrationFailed("no drive amplitude produces the target flux")
        p = replace(p, drive_amplitude=p.drive_amplitude * target / ac, dc_offset=p.dc_offset * target / dc)
    else:
        raise CalibrationFailed(f"loop flux did not converge (ac {ac / PHI0:.3f}, dc {dc / PHI0:.3f} phi0)")
    p = replace(p, signal_current=ist)
    report = CalibrationReport(p.drive_amplitude, p.dc_offset, ac / PHI0, dc / PHI0, ist)
    if margin:
        from .analysis.margins import margin_search
        from .clocking import build_benchmark

        c = ClockSpec(f=5e9, T=20e-12, amplitude=p.drive_amplitude, dc=p.dc_offset)
        res = margin_search(lambda ck: build_benchmark(Buffer(), ck, p), c)
        report.margin_db = res.width_db
        report.margin_low_dbm = res.p_low
        report.margin_high_dbm = res.p_high
    return p, report
