"""Circuit data model and the ``.jnt`` netlist dialect.

The dialect is a small, case-insensitive SPICE subset with Josephson
junctions (prefix ``B``) and lossless transmission lines (prefix ``T``)::

    .title buffer chain
    .model jj1 jj(ic=50u, c=150f, rsg=100, rn=34, vg=2.8m)
    .subckt buf a q
    b1 a 0 jj1 area=1
    l1 a q 1.6p
    .ends buf
    i1 0 1 sin(0 1m 5g 0)
    x1 buf 1 2
    r1 2 0 50
    .end

Current sources push their current from the first node through the
source into the second node, as in SPICE.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence, Union

import numpy as np

from .units import format_eng, parse_number

GROUND = "0"


# --------------------------------------------------------------------------
# errors


class NetlistError(Exception):
    """Base class for netlist problems; carries an optional source position."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.message = message
        self.line = line
        self.col = col
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {col}" if col is not None else "") + ": "
        super().__init__(where + message)


class NetlistSyntaxError(NetlistError):
    pass


class UnknownDeviceKind(NetlistError):
    pass


class DuplicateName(NetlistError):
    pass


class UnbalancedSubckt(NetlistError):
    pass


class BadNumber(NetlistError):
    pass


class BadValue(NetlistError):
    pass


class DanglingMutualReference(NetlistError):
    pass


class UndefinedModel(NetlistError):
    pass


class UndefinedSubckt(NetlistError):
    pass


class RecursionDetected(NetlistError):
    pass


class ArityMismatch(NetlistError):
    pass


# --------------------------------------------------------------------------
# source waveforms


@dataclass(frozen=True)
class Dc:
    value: float
    ramp: float = 0.0  # linear turn-on time, 0 = step at t=0

    def __post_init__(self):
        if not self.ramp >= 0:
            raise ValueError("dc ramp must be >= 0")

    def sample(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.ramp > 0:
            return self.value * np.clip(t / self.ramp, 0.0, 1.0)
        return np.full_like(t, self.value)


@dataclass(frozen=True)
class Sine:
    offset: float
    amplitude: float
    freq: float
    delay: float = 0.0

    def __post_init__(self):
        if not self.freq > 0:
            raise ValueError("sine frequency must be > 0")
        if not self.delay >= 0:
            raise ValueError("sine delay must be >= 0")

    def sample(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        arg = 2.0 * math.pi * self.freq * (t - self.delay)
        return np.where(t < self.delay, self.offset, self.offset + self.amplitude * np.sin(arg))


@dataclass(frozen=True)
class Pwl:
    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.points:
            raise ValueError("pwl needs at least one point")
        times = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("pwl times must be strictly increasing")

    def sample(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        ts = np.array([p[0] for p in self.points])
        vs = np.array([p[1] for p in self.points])
        return np.interp(t, ts, vs)


@dataclass(frozen=True)
class BitPattern:
    """Repeating bit stream; bit ``k`` occupies ``[delay + k*period, delay + (k+1)*period)``.

    Each boundary is a linear ramp of length ``rise`` from the previous level.
    The output is 0 before ``delay`` and ramps to the first bit's level.
    """

    bits: str
    period: float
    rise: float
    hi: float
    lo: float
    delay: float = 0.0

    def __post_init__(self):
        if not self.bits or set(self.bits) - {"0", "1"}:
            raise ValueError("bit pattern must be a non-empty string of 0/1")
        if not self.rise >= 0 or not self.delay >= 0:
            raise ValueError("rise time and delay must be >= 0")
        if not self.period > 4 * self.rise:
            raise ValueError("bit period must exceed 2*(rise+fall)")

    def sample(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        levels = np.array([self.hi if b == "1" else self.lo for b in self.bits])
        rel = t - self.delay
        k = np.floor(rel / self.period).astype(np.int64)
        nb = len(levels)
        cur = levels[np.mod(k, nb)]
        prev = np.where(k == 0, 0.0, levels[np.mod(k - 1, nb)])
        tau = rel - k * self.period
        if self.rise > 0:
            frac = np.clip(tau / self.rise, 0.0, 1.0)
        else:
            frac = np.ones_like(tau)
        out = prev + (cur - prev) * frac
        return np.where(rel < 0, 0.0, out)


SourceWaveform = Union[Dc, Sine, Pwl, BitPattern]


# --------------------------------------------------------------------------
# devices


@dataclass(frozen=True)
class JjModel:
    name: str
    ic: float
    c: float
    rsg: float
    rn: float
    vg: float

    def __post_init__(self):
        for f in ("ic", "c", "rsg", "rn", "vg"):
            if not getattr(self, f) > 0:
                raise ValueError(f"junction model {self.name}: {f} must be > 0")


def _positive(name: str, **values: float) -> None:
    for key, v in values.items():
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise ValueError(f"{name}: {key} must be a finite positive number, got {v!r}")


@dataclass(frozen=True)
class Resistor:
    name: str
    n1: str
    n2: str
    value: float

    def __post_init__(self):
        _positive(self.name, value=self.value)

    @property
    def nodes(self) -> tuple[str, ...]:
        return (self.n1, self.n2)


@dataclass(frozen=True)
class Inductor:
    name: str
    n1: str
    n2: str
    value: float

    def __post_init__(self):
        _positive(self.name, value=self.value)

    @property
    def nodes(self) -> tuple[str, ...]:
        return (self.n1, self.n2)


@dataclass(frozen=True)
class Capacitor:
    name: str
    n1: str
    n2: str
    value: float

    def __post_init__(self):
        _positive(self.name, value=self.value)

    @property
    def nodes(self) -> tuple[str, ...]:
        return (self.n1, self.n2)


@dataclass(frozen=True)
class MutualCoupling:
    name: str
    l1: str
    l2: str
    k: float

    def __post_init__(self):
        if not abs(self.k) < 1:
            raise ValueError(f"{self.name}: coupling |k| must be < 1, got {self.k}")
        if self.l1 == self.l2:
            raise ValueError(f"{self.name}: cannot couple {self.l1} to itself")

    @property
    def nodes(self) -> tuple[str, ...]:
        return ()


@dataclass(frozen=True)
class Junction:
    name: str
    n1: str
    n2: str
    model: str
    area: float = 1.0

    def __post_init__(self):
        _positive(self.name, area=self.area)

    @property
    def nodes(self) -> tuple[str, ...]:
        return (self.n1, self.n2)


@dataclass(frozen=True)
class TransmissionLine:
    name: str
    in1: str
    in2: str
    out1: str
    out2: str
    z0: float
    td: float

    def __post_init__(self):
        _positive(self.name, z0=self.z0, td=self.td)

    @property
    def nodes(self) -> tuple[str, ...]:
        return (self.in1, self.in2, self.out1, self.out2)


@dataclass(frozen=True)
class CurrentSource:
    name: str
    n1: str
    n2: str
    wave: SourceWaveform

    @property
    def nodes(self) -> tuple[str, ...]:
        return (self.n1, self.n2)


@dataclass(frozen=True)
class VoltageSource:
    name: str
    n1: str
    n2: str
    wave: SourceWaveform

    @property
    def nodes(self) -> tuple[str, ...]:
        return (self.n1, self.n2)


@dataclass(frozen=True)
class SubcktInstance:
    name: str
    subckt: str
    bindings: tuple[str, ...]

    @property
    def nodes(self) -> tuple[str, ...]:
        return self.bindings


Device = Union[
    Resistor,
    Inductor,
    Capacitor,
    MutualCoupling,
    Junction,
    TransmissionLine,
    CurrentSource,
    VoltageSource,
    SubcktInstance,
]

KIND_LETTER = {
    Resistor: "r",
    Inductor: "l",
    Capacitor: "c",
    MutualCoupling: "k",
    Junction: "b",
    TransmissionLine: "t",
    CurrentSource: "i",
    VoltageSource: "v",
    SubcktInstance: "x",
}


@dataclass(frozen=True)
class SubcircuitDef:
    name: str
    ports: tuple[str, ...]
    devices: tuple[Device, ...] = ()


@dataclass(frozen=True)
class Netlist:
    title: str = ""
    devices: tuple[Device, ...] = ()
    subckts: Mapping[str, SubcircuitDef] = field(default_factory=dict)
    models: Mapping[str, JjModel] = field(default_factory=dict)

    ground = GROUND

    @cached_property
    def _by_name(self) -> dict[str, Device]:
        return {d.name: d for d in self.devices}

    def device(self, name: str) -> Device:
        try:
            return self._by_name[name.lower()]
        except KeyError:
            raise KeyError(name) from None

    def nodes(self) -> list[str]:
        """Top-level node names in order of first appearance, ground included."""
        seen = {GROUND: None}
        for d in self.devices:
            for n in d.nodes:
                seen.setdefault(n, None)
        return list(seen)

    def count(self, kind: type) -> int:
        return sum(isinstance(d, kind) for d in self.devices)


def check_scope(devices: Sequence[Device], models: Mapping[str, JjModel], where: str = "") -> None:
    """Name uniqueness, coupling references and model references within one scope."""
    names: dict[str, Device] = {}
    for d in devices:
        if KIND_LETTER[type(d)] != d.name[:1]:
            raise UnknownDeviceKind(f"{where}device {d.name!r} does not start with its kind letter")
        if d.name in names:
            raise DuplicateName(f"{where}duplicate device name {d.name!r}")
        names[d.name] = d
    for d in devices:
        if isinstance(d, MutualCoupling):
            for ref in (d.l1, d.l2):
                if not isinstance(names.get(ref), Inductor):
                    raise DanglingMutualReference(f"{where}{d.name}: no inductor named {ref!r}")
        elif isinstance(d, Junction) and d.model not in models:
            raise UndefinedModel(f"{where}{d.name}: undefined junction model {d.model!r}")


def validate(netlist: Netlist) -> Netlist:
    """Check a programmatically built netlist; returns it unchanged."""
    check_scope(netlist.devices, netlist.models)
    for sub in netlist.subckts.values():
        check_scope(sub.devices, netlist.models, where=f"subckt {sub.name}: ")
    return netlist


# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"[(),=]|[^\s(),=]+")


@dataclass
class _Tok:
    text: str
    line: int
    col: int


def _logical_lines(text: str) -> Iterator[list[_Tok]]:
    current: list[_Tok] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("*"):
            continue
        toks = [_Tok(m.group(), lineno, m.start() + 1) for m in _TOKEN.finditer(raw)]
        if toks[0].text == "+" or toks[0].text.startswith("+"):
            if not current:
                raise NetlistSyntaxError("continuation line without a preceding card", lineno, 1)
            first = toks[0]
            if first.text == "+":
                toks = toks[1:]
            else:
                toks[0] = _Tok(first.text[1:], lineno, first.col + 1)
            current.extend(toks)
            continue
        if current:
            yield current
        current = toks
    if current:
        yield current


def _num(tok: _Tok) -> float:
    try:
        return parse_number(tok.text)
    except ValueError:
        raise BadNumber(f"cannot read number {tok.text!r}", tok.line, tok.col) from None


class _Cursor:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.i = 0

    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self, what: str) -> _Tok:
        tok = self.peek()
        if tok is None:
            last = self.toks[-1]
            raise NetlistSyntaxError(f"expected {what}", last.line, last.col + len(last.text))
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.next(repr(text))
        if tok.text.lower() != text:
            raise NetlistSyntaxError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def ident(self, what: str) -> str:
        tok = self.next(what)
        if tok.text in "(),=":
            raise NetlistSyntaxError(f"expected {what}, found {tok.text!r}", tok.line, tok.col)
        return tok.text.lower()

    def done(self) -> None:
        tok = self.peek()
        if tok is not None:
            raise NetlistSyntaxError(f"unexpected {tok.text!r}", tok.line, tok.col)

    def paren_args(self) -> list[_Tok]:
        """Tokens between ``(`` and ``)``, commas dropped."""
        self.expect("(")
        out = []
        while True:
            tok = self.next("')'")
            if tok.text == ")":
                return out
            if tok.text != ",":
                out.append(tok)

    def keyvals(self, toks: list[_Tok] | None = None) -> dict[str, tuple[float, _Tok]]:
        src = toks if toks is not None else self.toks[self.i:]
        out: dict[str, tuple[float, _Tok]] = {}
        j = 0
        while j < len(src):
            key = src[j]
            if key.text == ",":
                j += 1
                continue
            if j + 2 >= len(src) or src[j + 1].text != "=":
                raise NetlistSyntaxError(f"expected key=value at {key.text!r}", key.line, key.col)
            out[key.text.lower()] = (_num(src[j + 2]), src[j + 2])
            j += 3
        if toks is None:
            self.i = len(self.toks)
        return out


def _parse_wave(cur: _Cursor) -> SourceWaveform:
    head = cur.next("source waveform")
    kind = head.text.lower()
    try:
        if kind == "dc":
            value = _num(cur.next("dc value"))
            kv = cur.keyvals()
            unknown = set(kv) - {"ramp"}
            if unknown:
                raise NetlistSyntaxError(f"unknown dc option {unknown.pop()!r}", head.line, head.col)
            return Dc(value, kv["ramp"][0] if "ramp" in kv else 0.0)
        if kind == "sin":
            args = cur.paren_args()
            if len(args) not in (3, 4):
                raise NetlistSyntaxError("sin(offset amplitude freq [delay]) expected", head.line, head.col)
            vals = [_num(a) for a in args]
            return Sine(*vals)
        if kind == "pwl":
            args = cur.paren_args()
            if not args or len(args) % 2:
                raise NetlistSyntaxError("pwl needs (t, v) pairs", head.line, head.col)
            vals = [_num(a) for a in args]
            return Pwl(tuple(zip(vals[0::2], vals[1::2])))
        if kind == "bits":
            args = cur.paren_args()
            if len(args) not in (5, 6):
                raise NetlistSyntaxError("bits(pattern period trise hi lo [delay]) expected", head.line, head.col)
            vals = [_num(a) for a in args[1:]]
            return BitPattern(args[0].text, *vals)
        # bare number means dc
        return Dc(_num(head))
    except ValueError as exc:
        raise BadValue(str(exc), head.line, head.col) from None


def _parse_device(toks: list[_Tok]) -> Device:
    cur = _Cursor(toks)
    name_tok = cur.next("device name")
    name = name_tok.text.lower()
    kind = name[0]
    try:
        if kind in "rlc":
            n1, n2 = cur.ident("node"), cur.ident("node")
            value = _num(cur.next("value"))
            cur.done()
            cls = {"r": Resistor, "l": Inductor, "c": Capacitor}[kind]
            return cls(name, n1, n2, value)
        if kind == "k":
            l1, l2 = cur.ident("inductor name"), cur.ident("inductor name")
            k = _num(cur.next("coupling coefficient"))
            cur.done()
            return MutualCoupling(name, l1, l2, k)
        if kind == "b":
            n1, n2 = cur.ident("node"), cur.ident("node")
            model = cur.ident("model name")
            kv = cur.keyvals()
            if set(kv) - {"area"}:
                raise NetlistSyntaxError("junction accepts only area=", name_tok.line, name_tok.col)
            return Junction(name, n1, n2, model, kv["area"][0] if "area" in kv else 1.0)
        if kind == "t":
            nodes = [cur.ident("node") for _ in range(4)]
            kv = cur.keyvals()
            if set(kv) != {"z0", "td"}:
                raise NetlistSyntaxError("transmission line needs z0= and td=", name_tok.line, name_tok.col)
            return TransmissionLine(name, *nodes, z0=kv["z0"][0], td=kv["td"][0])
        if kind in "iv":
            n1, n2 = cur.ident("node"), cur.ident("node")
            wave = _parse_wave(cur)
            cur.done()
            return (CurrentSource if kind == "i" else VoltageSource)(name, n1, n2, wave)
        if kind == "x":
            sub = cur.ident("subcircuit name")
            nodes = []
            while cur.peek() is not None:
                nodes.append(cur.ident("node"))
            return SubcktInstance(name, sub, tuple(nodes))
    except ValueError as exc:
        raise BadValue(str(exc), name_tok.line, name_tok.col) from None
    raise UnknownDeviceKind(f"unknown device kind {name_tok.text[0]!r}", name_tok.line, name_tok.col)


def _parse_model(toks: list[_Tok]) -> JjModel:
    cur = _Cursor(toks)
    cur.next(".model")
    name = cur.ident("model name")
    kind = cur.next("model type")
    if kind.text.lower() != "jj":
        raise NetlistSyntaxError(f"unsupported model type {kind.text!r}", kind.line, kind.col)
    args = cur.paren_args()
    cur.done()
    kv = cur.keyvals(args)
    need = {"ic", "c", "rsg", "rn", "vg"}
    missing = need - set(kv)
    if missing or set(kv) - need:
        what = f"missing {sorted(missing)}" if missing else f"unknown {sorted(set(kv) - need)}"
        raise NetlistSyntaxError(f"model {name}: {what}", kind.line, kind.col)
    try:
        return JjModel(name, **{k: v[0] for k, v in kv.items()})
    except ValueError as exc:
        raise BadValue(str(exc), kind.line, kind.col) from None


def _check_scope_at(devices: list[Device], positions: list[_Tok], models, where: str) -> None:
    names: dict[str, Device] = {}
    for d, tok in zip(devices, positions):
        if d.name in names:
            raise DuplicateName(f"{where}duplicate device name {d.name!r}", tok.line, tok.col)
        names[d.name] = d
    for d, tok in zip(devices, positions):
        if isinstance(d, MutualCoupling):
            for ref in (d.l1, d.l2):
                if not isinstance(names.get(ref), Inductor):
                    raise DanglingMutualReference(f"{d.name}: no inductor named {ref!r}", tok.line, tok.col)
        elif isinstance(d, Junction) and d.model not in models:
            raise UndefinedModel(f"{d.name}: undefined junction model {d.model!r}", tok.line, tok.col)


def parse_netlist(text: str) -> Netlist:
    """Parse netlist source text into a validated :class:`Netlist`."""
    title = ""
    models: dict[str, JjModel] = {}
    subckts: dict[str, SubcircuitDef] = {}
    top: list[Device] = []
    top_pos: list[_Tok] = []
    scopes: list[tuple[str, tuple[str, ...], list[Device], list[_Tok], _Tok]] = []
    pending_subckts: list[tuple[str, tuple[str, ...], list[Device], list[_Tok], _Tok]] = []

    # .title keeps the raw remainder of its line
    raw_lines = text.splitlines()
    for toks in _logical_lines(text):
        head = toks[0]
        word = head.text.lower()
        if word.startswith("."):
            if word == ".title":
                raw = raw_lines[head.line - 1]
                title = raw[head.col - 1 + len(head.text):].strip()
            elif word == ".end":
                break
            elif word == ".model":
                m = _parse_model(toks)
                models[m.name] = m
            elif word == ".subckt":
                if scopes:
                    raise UnbalancedSubckt("nested .subckt definition", head.line, head.col)
                cur = _Cursor(toks)
                cur.next(".subckt")
                name = cur.ident("subcircuit name")
                ports = []
                while cur.peek() is not None:
                    ports.append(cur.ident("port"))
                if name in subckts or any(p[0] == name for p in pending_subckts):
                    raise DuplicateName(f"duplicate subcircuit {name!r}", head.line, head.col)
                scopes.append((name, tuple(ports), [], [], head))
            elif word == ".ends":
                if not scopes:
                    raise UnbalancedSubckt(".ends without .subckt", head.line, head.col)
                if len(toks) > 1 and toks[1].text.lower() != scopes[-1][0]:
                    raise UnbalancedSubckt(
                        f".ends {toks[1].text} closes .subckt {scopes[-1][0]}", head.line, head.col
                    )
                pending_subckts.append(scopes.pop())
            else:
                raise NetlistSyntaxError(f"unknown control card {head.text!r}", head.line, head.col)
            continue
        dev = _parse_device(toks)
        if scopes:
            scopes[-1][2].append(dev)
            scopes[-1][3].append(head)
        else:
            top.append(dev)
            top_pos.append(head)
    if scopes:
        head = scopes[-1][4]
        raise UnbalancedSubckt(f".subckt {scopes[-1][0]} has no .ends", head.line, head.col)

    for name, ports, devs, pos, head in pending_subckts:
        _check_scope_at(devs, pos, models, where=f"subckt {name}: ")
        subckts[name] = SubcircuitDef(name, ports, tuple(devs))
    _check_scope_at(top, top_pos, models, where="")
    return Netlist(title, tuple(top), subckts, models)


# --------------------------------------------------------------------------
# serialization


def _wave_text(w: SourceWaveform) -> str:
    f = format_eng
    if isinstance(w, Dc):
        return f"dc {f(w.value)}" + (f" ramp={f(w.ramp)}" if w.ramp else "")
    if isinstance(w, Sine):
        return f"sin({f(w.offset)} {f(w.amplitude)} {f(w.freq)} {f(w.delay)})"
    if isinstance(w, Pwl):
        return "pwl(" + " ".join(f"{f(t)} {f(v)}" for t, v in w.points) + ")"
    if isinstance(w, BitPattern):
        return (
            f"bits({w.bits} {f(w.period)} {f(w.rise)} {f(w.hi)} {f(w.lo)}"
            + (f" {f(w.delay)})" if w.delay else ")")
        )
    raise TypeError(w)


def device_line(d: Device) -> str:
    f = format_eng
    if isinstance(d, (Resistor, Inductor, Capacitor)):
        return f"{d.name} {d.n1} {d.n2} {f(d.value)}"
    if isinstance(d, MutualCoupling):
        return f"{d.name} {d.l1} {d.l2} {f(d.k)}"
    if isinstance(d, Junction):
        return f"{d.name} {d.n1} {d.n2} {d.model}" + (f" area={f(d.area)}" if d.area != 1.0 else "")
    if isinstance(d, TransmissionLine):
        return f"{d.name} {d.in1} {d.in2} {d.out1} {d.out2} z0={f(d.z0)} td={f(d.td)}"
    if isinstance(d, (CurrentSource, VoltageSource)):
        return f"{d.name} {d.n1} {d.n2} {_wave_text(d.wave)}"
    if isinstance(d, SubcktInstance):
        return " ".join((d.name, d.subckt) + d.bindings)
    raise TypeError(d)


def serialize(netlist: Netlist) -> str:
    f = format_eng
    lines = [f".title {netlist.title}".rstrip()]
    for m in netlist.models.values():
        lines.append(
            f".model {m.name} jj(ic={f(m.ic)}, c={f(m.c)}, rsg={f(m.rsg)}, rn={f(m.rn)}, vg={f(m.vg)})"
        )
    for sub in netlist.subckts.values():
        lines.append(" ".join((".subckt", sub.name) + sub.ports))
        lines.extend(device_line(d) for d in sub.devices)
        lines.append(f".ends {sub.name}")
    lines.extend(device_line(d) for d in netlist.devices)
    lines.append(".end")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# flattening


def _rename(d: Device, dev_map: Mapping[str, str], node_map) -> Device:
    name = dev_map[d.name]
    if isinstance(d, MutualCoupling):
        return replace(d, name=name, l1=dev_map[d.l1], l2=dev_map[d.l2])
    if isinstance(d, TransmissionLine):
        return replace(
            d, name=name, in1=node_map(d.in1), in2=node_map(d.in2), out1=node_map(d.out1), out2=node_map(d.out2)
        )
    if isinstance(d, SubcktInstance):
        return replace(d, name=name, bindings=tuple(node_map(n) for n in d.bindings))
    return replace(d, name=name, n1=node_map(d.n1), n2=node_map(d.n2))


def _expand(devices: Iterable[Device], subckts: Mapping[str, SubcircuitDef], stack: tuple[str, ...]) -> list[Device]:
    out: list[Device] = []
    for d in devices:
        if not isinstance(d, SubcktInstance):
            out.append(d)
            continue
        sub = subckts.get(d.subckt)
        if sub is None:
            raise UndefinedSubckt(f"{d.name}: undefined subcircuit {d.subckt!r}")
        if sub.name in stack:
            raise RecursionDetected(" -> ".join(stack + (sub.name,)))
        if len(d.bindings) != len(sub.ports):
            raise ArityMismatch(
                f"{d.name}: {len(d.bindings)} nodes bound to {len(sub.ports)}-port subcircuit {sub.name}"
            )
        inner = _expand(sub.devices, subckts, stack + (sub.name,))
        port_map = dict(zip(sub.ports, d.bindings))

        def node_map(n: str, _pm=port_map, _inst=d.name) -> str:
            if n == GROUND:
                return GROUND
            return _pm.get(n, f"{n}|{_inst}")

        dev_map = {x.name: f"{x.name}|{d.name}" for x in inner}
        out.extend(_rename(x, dev_map, node_map) for x in inner)
    return out


def flatten(netlist: Netlist) -> Netlist:
    """Expand every subcircuit instance; internal names get an ``|instance`` suffix."""
    if not any(isinstance(d, SubcktInstance) for d in netlist.devices):
        if not netlist.subckts:
            return netlist
        return Netlist(netlist.title, netlist.devices, {}, netlist.models)
    flat = _expand(netlist.devices, netlist.subckts, ())
    result = Netlist(netlist.title, tuple(flat), {}, netlist.models)
    check_scope(result.devices, result.models)
    return result
