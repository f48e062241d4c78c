"""Modified nodal analysis: unknown ordering and the constant system matrices.

Every circuit is written as the DAE ``Q x' + G x + f(x) = s(t)`` where
``f`` holds the junction supercurrent and the nonlinear part of the
junction quasiparticle conductance.  Unknowns, in order:

* node voltages (ground excluded)
* inductor currents
* voltage-source currents
* transmission-line port currents (two per line)
* junction phases
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..netlist import (
    GROUND,
    Capacitor,
    CurrentSource,
    Inductor,
    Junction,
    MutualCoupling,
    Netlist,
    NetlistError,
    Resistor,
    SubcktInstance,
    TransmissionLine,
    VoltageSource,
    SourceWaveform,
)
from ..units import PHI0


class SingularTopology(NetlistError):
    """The circuit equations have no unique solution (floating node, source loop...)."""


@dataclass
class JunctionStamp:
    name: str
    p: int
    n: int
    phase: int
    ic: float
    c: float
    rsg: float
    rn: float
    vg: float


@dataclass
class LineStamp:
    name: str
    a1: int
    b1: int
    a2: int
    b2: int
    i1: int
    i2: int
    z0: float
    td: float


@dataclass
class SourceStamp:
    name: str
    wave: SourceWaveform
    rows: tuple[int, int]
    signs: tuple[float, float]


@dataclass
class MnaSystem:
    """Assembled circuit: unknown map plus the ``Q`` and ``G`` matrices."""

    netlist: Netlist
    node_index: dict[str, int]
    branch_index: dict[str, int]  # inductor / voltage source name -> current unknown
    phase_index: dict[str, int]
    size: int
    Q: np.ndarray
    G: np.ndarray
    junctions: list[JunctionStamp]
    lines: list[LineStamp]
    sources: list[SourceStamp]
    mutuals: dict[tuple[str, str], float] = field(default_factory=dict)
    labels: list[str] = field(default_factory=list)
    kinds: np.ndarray = None  # 0 voltage, 1 current, 2 phase per unknown
    row_kinds: np.ndarray = None  # 0 KCL (A), 1 branch (V)

    def node(self, name: str) -> int:
        """Unknown index of a node voltage, -1 for ground."""
        name = name.lower()
        if name == GROUND:
            return -1
        return self.node_index[name]


def _idx(node_index: dict[str, int], name: str) -> int:
    return -1 if name == GROUND else node_index[name]


def _stamp2(M: np.ndarray, p: int, n: int, value: float) -> None:
    if p >= 0:
        M[p, p] += value
    if n >= 0:
        M[n, n] += value
    if p >= 0 and n >= 0:
        M[p, n] -= value
        M[n, p] -= value


def _dc_connectivity(netlist: Netlist) -> None:
    parent: dict[str, str] = {}

    def find(a: str) -> str:
        while parent.setdefault(a, a) != a:
            parent[a] = parent.setdefault(parent[a], parent[a])
            a = parent[a]
        return a

    def union(a: str, b: str) -> None:
        parent[find(a)] = find(b)

    find(GROUND)
    for d in netlist.devices:
        for n in d.nodes:
            find(n)
        if isinstance(d, (Resistor, Inductor, Junction, VoltageSource)):
            union(d.n1, d.n2)
        elif isinstance(d, TransmissionLine):
            union(d.in1, d.in2)
            union(d.out1, d.out2)
            union(d.in1, d.out1)
    root = find(GROUND)
    floating = [n for n in parent if find(n) != root]
    if floating:
        raise SingularTopology(f"node(s) {', '.join(sorted(floating))} have no dc path to ground")


def assemble(netlist: Netlist) -> MnaSystem:
    """Build the unknown ordering and constant matrices of a flat netlist."""
    if any(isinstance(d, SubcktInstance) for d in netlist.devices):
        raise ValueError("assemble() needs a flattened netlist")
    _dc_connectivity(netlist)

    node_index: dict[str, int] = {}
    for n in netlist.nodes():
        if n != GROUND:
            node_index[n] = len(node_index)
    k = len(node_index)
    branch_index: dict[str, int] = {}
    for d in netlist.devices:
        if isinstance(d, Inductor):
            branch_index[d.name] = k
            k += 1
    for d in netlist.devices:
        if isinstance(d, VoltageSource):
            branch_index[d.name] = k
            k += 1
    line_ports: dict[str, tuple[int, int]] = {}
    for d in netlist.devices:
        if isinstance(d, TransmissionLine):
            line_ports[d.name] = (k, k + 1)
            k += 2
    phase_index: dict[str, int] = {}
    for d in netlist.devices:
        if isinstance(d, Junction):
            phase_index[d.name] = k
            k += 1
    size = k

    labels = [f"V({n})" for n in node_index]
    labels += [f"I({name})" for name in branch_index]
    for name in line_ports:
        labels += [f"I({name}.1)", f"I({name}.2)"]
    labels += [f"P({name})" for name in phase_index]
    kinds = np.zeros(size, dtype=np.int64)
    kinds[len(node_index):] = 1
    for i in phase_index.values():
        kinds[i] = 2
    row_kinds = np.zeros(size, dtype=np.int64)
    row_kinds[len(node_index):] = 1

    Q = np.zeros((size, size))
    G = np.zeros((size, size))
    ix = lambda name: _idx(node_index, name)  # noqa: E731
    inductors = {d.name: d for d in netlist.devices if isinstance(d, Inductor)}
    junctions: list[JunctionStamp] = []
    lines: list[LineStamp] = []
    sources: list[SourceStamp] = []
    mutuals: dict[tuple[str, str], float] = {}
    kphi = 2.0 * math.pi / PHI0

    for d in netlist.devices:
        if isinstance(d, Resistor):
            _stamp2(G, ix(d.n1), ix(d.n2), 1.0 / d.value)
        elif isinstance(d, Capacitor):
            _stamp2(Q, ix(d.n1), ix(d.n2), d.value)
        elif isinstance(d, Inductor):
            r, p, n = branch_index[d.name], ix(d.n1), ix(d.n2)
            if p >= 0:
                G[p, r] += 1.0
                G[r, p] += 1.0
            if n >= 0:
                G[n, r] -= 1.0
                G[r, n] -= 1.0
            Q[r, r] -= d.value
        elif isinstance(d, MutualCoupling):
            la, lb = inductors[d.l1], inductors[d.l2]
            m = d.k * math.sqrt(la.value * lb.value)
            ra, rb = branch_index[la.name], branch_index[lb.name]
            Q[ra, rb] -= m
            Q[rb, ra] -= m
            mutuals[(la.name, lb.name)] = m
        elif isinstance(d, VoltageSource):
            r, p, n = branch_index[d.name], ix(d.n1), ix(d.n2)
            if p >= 0:
                G[p, r] += 1.0
                G[r, p] += 1.0
            if n >= 0:
                G[n, r] -= 1.0
                G[r, n] -= 1.0
            sources.append(SourceStamp(d.name, d.wave, (r, -1), (1.0, 0.0)))
        elif isinstance(d, CurrentSource):
            sources.append(SourceStamp(d.name, d.wave, (ix(d.n1), ix(d.n2)), (-1.0, 1.0)))
        elif isinstance(d, TransmissionLine):
            i1, i2 = line_ports[d.name]
            for (a, b, i) in ((ix(d.in1), ix(d.in2), i1), (ix(d.out1), ix(d.out2), i2)):
                if a >= 0:
                    G[a, i] += 1.0
                    G[i, a] += 1.0
                if b >= 0:
                    G[b, i] -= 1.0
                    G[i, b] -= 1.0
                G[i, i] -= d.z0
            lines.append(LineStamp(d.name, ix(d.in1), ix(d.in2), ix(d.out1), ix(d.out2), i1, i2, d.z0, d.td))
        elif isinstance(d, Junction):
            model = netlist.models[d.model]
            ic, c = model.ic * d.area, model.c * d.area
            rsg, rn = model.rsg / d.area, model.rn / d.area
            p, n, ph = ix(d.n1), ix(d.n2), phase_index[d.name]
            _stamp2(Q, p, n, c)
            _stamp2(G, p, n, 1.0 / rsg)
            # (phi0 / 2 pi) dphi/dt = v, scaled to volts like the other branch rows
            Q[ph, ph] = 1.0 / kphi
            if p >= 0:
                G[ph, p] -= 1.0
            if n >= 0:
                G[ph, n] += 1.0
            junctions.append(JunctionStamp(d.name, p, n, ph, ic, c, rsg, rn, model.vg))

    return MnaSystem(
        netlist=netlist,
        node_index=node_index,
        branch_index=branch_index,
        phase_index=phase_index,
        size=size,
        Q=Q,
        G=G,
        junctions=junctions,
        lines=lines,
        sources=sources,
        mutuals=mutuals,
        labels=labels,
        kinds=kinds,
        row_kinds=row_kinds,
    )
