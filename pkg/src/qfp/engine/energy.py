"""Energy bookkeeping on completed runs: per-device absorbed energy, stored energy, balance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ..netlist import (
    Capacitor,
    CurrentSource,
    Inductor,
    Junction,
    MutualCoupling,
    Resistor,
    TransmissionLine,
    VoltageSource,
)
from ..units import PHI0
from .transient import RunRecord

TRAPEZOID = "trapezoid"
# product of interval-averaged voltage and current; exactly consistent with the
# trapezoidal companion models, so reactive energy cancels to round-off over a cycle
MIDPOINT = "midpoint"


class WindowOutsideRun(ValueError):
    pass


@dataclass
class EnergyReport:
    t_start: float
    t_end: float
    per_device: dict[str, float]

    @property
    def total(self) -> float:
        return float(sum(self.per_device.values()))


@dataclass
class BalanceReport:
    source_energy: float  # delivered by sources
    dissipated: float
    delta_stored: float

    @property
    def residual(self) -> float:
        return abs(self.source_energy - self.dissipated - self.delta_stored) / max(abs(self.source_energy), 1e-18)


def _window(record: RunRecord, window: tuple[float, float] | None) -> tuple[int, int]:
    dt = record.config.dt
    last = record.n_samples - 1
    if window is None:
        return 0, last
    t0, t1 = window
    i0 = int(round(t0 / dt))
    i1 = int(round(t1 / dt))
    if t0 < -0.5 * dt or i1 > last or i0 >= i1:
        raise WindowOutsideRun(
            f"window [{t0:.6g}, {t1:.6g}] s is not inside the run [0, {last * dt:.6g}] s"
        )
    return i0, i1


def device_vi(record: RunRecord, name: str) -> list[tuple[np.ndarray, np.ndarray]]:
    """(voltage, current) pairs whose products give the device's absorbed power."""
    d = record.sim.netlist.device(name)
    if isinstance(d, MutualCoupling):
        raise ValueError(f"{name}: coupling energy is carried by its inductors")
    if isinstance(d, TransmissionLine):
        s = record.sim.system
        ln = next(x for x in s.lines if x.name == d.name)
        return [
            (record.pair(ln.a1, ln.b1), record.column(ln.i1)),
            (record.pair(ln.a2, ln.b2), record.column(ln.i2)),
        ]
    return [(record.branch_voltage(name), record.branch_current(name))]


def _integrate(pairs, i0: int, i1: int, dt: float, rule: str) -> float:
    total = 0.0
    for v, i in pairs:
        v = v[i0 : i1 + 1]
        i = i[i0 : i1 + 1]
        if rule == TRAPEZOID:
            p = v * i
            total += float(dt * (p.sum() - 0.5 * (p[0] + p[-1])))
        elif rule == MIDPOINT:
            total += float(dt * np.sum(0.25 * (v[1:] + v[:-1]) * (i[1:] + i[:-1])))
        else:
            raise ValueError(f"unknown quadrature rule {rule!r}")
    return total


def energy_accounting(
    record: RunRecord,
    devices: Iterable[str] | None = None,
    window: tuple[float, float] | None = None,
    rule: str = TRAPEZOID,
) -> EnergyReport:
    """Energy absorbed by each device over ``window`` (negative for net sources)."""
    i0, i1 = _window(record, window)
    if devices is None:
        devices = [d.name for d in record.sim.netlist.devices if not isinstance(d, MutualCoupling)]
    dt = record.config.dt
    per = {name: _integrate(device_vi(record, name), i0, i1, dt, rule) for name in devices}
    return EnergyReport(i0 * dt, i1 * dt, per)


def junction_resistive_power(record: RunRecord, name: str) -> np.ndarray:
    s = record.sim.system
    j = next(j for j in s.junctions if j.name == name)
    v = record.pair(j.p, j.n)
    return record.junction_conductance(j, v) * v * v


def cumulative_dissipation(record: RunRecord, name: str) -> np.ndarray:
    """Running dissipated energy of a resistor or a junction's resistive channel."""
    d = record.sim.netlist.device(name)
    if isinstance(d, Resistor):
        v = record.branch_voltage(name)
        p = v * v / d.value
    elif isinstance(d, Junction):
        p = junction_resistive_power(record, name)
    else:
        raise ValueError(f"{name} is not dissipative")
    dt = record.config.dt
    return np.concatenate([[0.0], np.cumsum(0.5 * dt * (p[1:] + p[:-1]))])


def stored_energy(record: RunRecord) -> np.ndarray:
    """Total energy stored in inductors, capacitors, junctions and lines at each sample."""
    s = record.sim.system
    net = record.sim.netlist
    dt = record.config.dt
    out = np.zeros(record.n_samples)
    inductors = [d for d in net.devices if isinstance(d, Inductor)]
    for d in inductors:
        i = record.column(s.branch_index[d.name])
        out += 0.5 * d.value * i * i
    for (a, b), m in s.mutuals.items():
        out += m * record.column(s.branch_index[a]) * record.column(s.branch_index[b])
    for d in net.devices:
        if isinstance(d, Capacitor):
            v = record.branch_voltage(d.name)
            out += 0.5 * d.value * v * v
    for j in s.junctions:
        v = record.pair(j.p, j.n)
        phi = record.column(j.phase)
        out += 0.5 * j.c * v * v + j.ic * PHI0 / (2 * math.pi) * (1.0 - np.cos(phi))
    for ln in s.lines:
        w1 = record.pair(ln.a1, ln.b1) + ln.z0 * record.column(ln.i1)
        w2 = record.pair(ln.a2, ln.b2) + ln.z0 * record.column(ln.i2)
        g = (w1 * w1 + w2 * w2) / (4.0 * ln.z0)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * dt * (g[1:] + g[:-1]))])
        t = record.times
        back = t - ln.td
        # the line holds its t=0 state for all earlier times
        cum_back = np.where(back >= 0, np.interp(np.maximum(back, 0.0), t, cum), g[0] * back)
        out += cum - cum_back
    return out


def energy_balance(record: RunRecord, window: tuple[float, float] | None = None, rule: str = MIDPOINT) -> BalanceReport:
    i0, i1 = _window(record, window)
    win = (i0 * record.config.dt, i1 * record.config.dt)
    net = record.sim.netlist
    sources = [d.name for d in net.devices if isinstance(d, (CurrentSource, VoltageSource))]
    lossy = [d.name for d in net.devices if isinstance(d, Resistor)]
    src = -energy_accounting(record, sources, win, rule).total
    diss = energy_accounting(record, lossy, win, rule).total
    dt = record.config.dt
    for j in record.sim.system.junctions:
        p = junction_resistive_power(record, j.name)[i0 : i1 + 1]
        diss += float(dt * (p.sum() - 0.5 * (p[0] + p[-1])))
    e = stored_energy(record)
    return BalanceReport(src, diss, float(e[i1] - e[i0]))
