"""Transient analysis driver: configuration, state, probes and waveforms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from ..netlist import (
    Capacitor,
    CurrentSource,
    Inductor,
    Junction,
    MutualCoupling,
    Netlist,
    Resistor,
    TransmissionLine,
    VoltageSource,
    flatten,
)
from ..units import PHI0
from . import kernel
from .mna import MnaSystem, SingularTopology, assemble
from .waveform import Waveform

FULL_LINE = "fullline"
IDEAL_DELAY = "idealdelay"


class EngineError(Exception):
    pass


class NewtonDivergence(EngineError):
    """Newton iteration failed; ``partial`` holds the waveform up to the last good step."""

    def __init__(self, time: float, iterations: int, partial: "Waveform | None" = None):
        self.time = time
        self.iterations = iterations
        self.partial = partial
        super().__init__(f"Newton iteration did not converge at t={time:.6g} s after {iterations} iterations")


class HistoryUnderflow(EngineError):
    pass


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1e-12
    t_stop: float = 1e-9
    newton_rel_tol: float = 1e-6
    newton_abs_tol_v: float = 1e-9
    newton_abs_tol_i: float = 1e-12
    max_newton_iters: int = 50
    excitation_mode: str = FULL_LINE
    # "V(node)", "I(inductor)" or "P(junction)" -> value at t = 0
    initial_conditions: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.t_stop >= 0:
            raise ValueError("t_stop must be >= 0")
        if not (self.newton_rel_tol > 0 and self.newton_abs_tol_v > 0 and self.newton_abs_tol_i > 0):
            raise ValueError("Newton tolerances must be > 0")
        if self.max_newton_iters < 2:
            raise ValueError("max_newton_iters must be >= 2")
        if self.excitation_mode not in (FULL_LINE, IDEAL_DELAY):
            raise ValueError(f"unknown excitation mode {self.excitation_mode!r}")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.t_stop / self.dt + 1e-9))


# --------------------------------------------------------------------------
# probes


@dataclass(frozen=True)
class NodeVoltage:
    node: str

    @property
    def label(self) -> str:
        return f"V({self.node})"


@dataclass(frozen=True)
class BranchCurrent:
    device: str

    @property
    def label(self) -> str:
        return f"I({self.device})"


@dataclass(frozen=True)
class JunctionPhase:
    device: str

    @property
    def label(self) -> str:
        return f"P({self.device})"


@dataclass(frozen=True)
class DevicePower:
    device: str

    @property
    def label(self) -> str:
        return f"W({self.device})"


Probe = Union[NodeVoltage, BranchCurrent, JunctionPhase, DevicePower]


def parse_probe(text: str) -> Probe:
    """``"V(n1)"``, ``"I(l1)"``, ``"P(b1)"`` or ``"W(r1)"``."""
    t = text.strip()
    if len(t) < 4 or t[1] != "(" or t[-1] != ")":
        raise ValueError(f"bad probe {text!r}")
    arg = t[2:-1].strip().lower()
    kind = t[0].upper()
    cls = {"V": NodeVoltage, "I": BranchCurrent, "P": JunctionPhase, "W": DevicePower}.get(kind)
    if cls is None:
        raise ValueError(f"bad probe {text!r}")
    return cls(arg)


# --------------------------------------------------------------------------
# state


@dataclass
class SystemState:
    """Solution at one accepted time point.

    ``x`` is the unknown vector, ``y`` the tracked derivative term of the
    trapezoidal rule, ``w1``/``w2`` the transmission-line wave histories.
    """

    sim: "Simulator"
    n: int
    dt: float
    x: np.ndarray
    y: np.ndarray
    w1: np.ndarray
    w2: np.ndarray

    @property
    def t(self) -> float:
        return self.n * self.dt

    @property
    def node_voltages(self) -> dict[str, float]:
        return {k: float(self.x[i]) for k, i in self.sim.system.node_index.items()}

    @property
    def branch_currents(self) -> dict[str, float]:
        out = {k: float(self.x[i]) for k, i in self.sim.system.branch_index.items()}
        for ln in self.sim.system.lines:
            out[f"{ln.name}.1"] = float(self.x[ln.i1])
            out[f"{ln.name}.2"] = float(self.x[ln.i2])
        return out

    @property
    def junction_phases(self) -> dict[str, float]:
        return {k: float(self.x[i]) for k, i in self.sim.system.phase_index.items()}

    @property
    def junction_voltages(self) -> dict[str, float]:
        out = {}
        for j in self.sim.system.junctions:
            out[j.name] = _pair(self.x, j.p, j.n)
        return out

    @property
    def tl_histories(self) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        return {ln.name: (self.w1[i].copy(), self.w2[i].copy()) for i, ln in enumerate(self.sim.system.lines)}


def _pair(x: np.ndarray, p: int, n: int) -> float:
    return (x[p] if p >= 0 else 0.0) - (x[n] if n >= 0 else 0.0)


# --------------------------------------------------------------------------
# simulator


@dataclass
class _Prepared:
    dt: float
    A: np.ndarray
    Ainv: np.ndarray
    Zw: np.ndarray
    Q2: np.ndarray
    D: np.ndarray
    ring: int


class Simulator:
    """Owns one assembled circuit; runs are independent and share no mutable state."""

    def __init__(self, netlist: Netlist):
        self.netlist = flatten(netlist)
        self.system: MnaSystem = assemble(self.netlist)
        self._prepared: dict[float, _Prepared] = {}
        s = self.system
        self._jj = (
            np.array([j.p for j in s.junctions], dtype=np.int64),
            np.array([j.n for j in s.junctions], dtype=np.int64),
            np.array([j.phase for j in s.junctions], dtype=np.int64),
            np.array([j.ic for j in s.junctions]),
            np.array([1.0 / j.rsg for j in s.junctions]),
            np.array([1.0 / j.rn for j in s.junctions]),
            np.array([j.vg for j in s.junctions]),
        )
        self._tl = tuple(
            np.array([getattr(ln, a) for ln in s.lines], dtype=np.int64)
            for a in ("a1", "b1", "a2", "b2", "i1", "i2")
        ) + (np.array([ln.z0 for ln in s.lines]),)
        self._src_rows = np.array([src.rows for src in s.sources], dtype=np.int64).reshape(-1, 2)
        self._src_signs = np.array([src.signs for src in s.sources], dtype=float).reshape(-1, 2)

    # -- matrices -------------------------------------------------------

    def prepare(self, dt: float) -> _Prepared:
        if dt in self._prepared:
            return self._prepared[dt]
        s = self.system
        D = np.array([ln.td / dt for ln in s.lines])
        D = np.where(np.abs(D - np.round(D)) < 1e-9, np.round(D), D)
        if np.any(D < 1.0):
            bad = [ln.name for ln, d in zip(s.lines, D) if d < 1.0]
            raise HistoryUnderflow(f"time step {dt:g} s exceeds the delay of line(s) {', '.join(bad)}")
        ring = int(np.ceil(D.max())) + 2 if len(D) else 1
        Q2 = (2.0 / dt) * s.Q
        A = Q2 + s.G
        if s.size and np.linalg.cond(A) > 1e14:
            raise SingularTopology("circuit matrix is singular (source loop or unconstrained branch)")
        Ainv = np.linalg.inv(A) if s.size else np.zeros((0, 0))
        U = np.zeros((s.size, len(s.junctions)))
        for k, j in enumerate(s.junctions):
            if j.p >= 0:
                U[j.p, k] += 1.0
            if j.n >= 0:
                U[j.n, k] -= 1.0
        Zw = np.ascontiguousarray(Ainv @ U)
        prep = _Prepared(dt, A, Ainv, Zw, Q2, D, ring)
        self._prepared[dt] = prep
        return prep

    def tolerances(self, config: SimConfig) -> tuple[np.ndarray, np.ndarray]:
        s = self.system
        dx_tol = np.where(s.kinds == 0, config.newton_abs_tol_v, config.newton_abs_tol_i)
        dx_tol = np.where(s.kinds == 2, 2 * math.pi / PHI0 * config.newton_abs_tol_v * config.dt / 2, dx_tol)
        res_tol = np.where(s.row_kinds == 0, config.newton_abs_tol_i, config.newton_abs_tol_v)
        return dx_tol.astype(float), res_tol.astype(float)

    def source_values(self, times: np.ndarray) -> np.ndarray:
        vals = np.zeros((len(times), len(self.system.sources)))
        for k, src in enumerate(self.system.sources):
            vals[:, k] = src.wave.sample(times)
        return vals

    # -- initial point --------------------------------------------------

    def _initial_vector(self, config: SimConfig) -> np.ndarray:
        s = self.system
        x = np.zeros(s.size)
        for key, value in config.initial_conditions.items():
            probe = parse_probe(key)
            if isinstance(probe, NodeVoltage):
                x[s.node(probe.node)] = value
            elif isinstance(probe, BranchCurrent):
                x[s.branch_index[probe.device]] = value
            elif isinstance(probe, JunctionPhase):
                x[s.phase_index[probe.device]] = value
            else:
                raise ValueError(f"cannot set initial condition {key!r}")
        return x

    def _nonlinear(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Junction nonlinear current vector and dense Jacobian contribution."""
        s = self.system
        f = np.zeros(s.size)
        J = np.zeros((s.size, s.size))
        p, n, ph, ic, gsg, gn, vg = self._jj
        for k in range(len(p)):
            v = _pair(x, p[k], n[k])
            i, d_phi, d_v = kernel.junction_current(v, x[ph[k]], ic[k], gsg[k], gn[k], vg[k])
            for row, sign in ((p[k], 1.0), (n[k], -1.0)):
                if row < 0:
                    continue
                f[row] += sign * i
                J[row, ph[k]] += sign * d_phi
                if p[k] >= 0:
                    J[row, p[k]] += sign * d_v
                if n[k] >= 0:
                    J[row, n[k]] -= sign * d_v
        return f, J

    def initial_state(self, config: SimConfig) -> SystemState:
        """Consistent state at t=0 from the stored-energy initial conditions.

        A backward-Euler micro-step of length 1e-6*dt settles the algebraic
        unknowns (and branch voltages across inductors) while the
        reactive state barely moves.
        """
        s = self.system
        prep = self.prepare(config.dt)
        x0 = self._initial_vector(config)
        h = 1e-6 * config.dt
        Ah = s.Q / h + s.G
        rhs = s.Q @ x0 / h
        s0 = self.source_values(np.array([0.0]))[0]
        for k, src in enumerate(s.sources):
            for row, sign in zip(src.rows, src.signs):
                if row >= 0:
                    rhs[row] += sign * s0[k]
        for ln in s.lines:
            w1 = _pair(x0, ln.a1, ln.b1) + ln.z0 * x0[ln.i1]
            w2 = _pair(x0, ln.a2, ln.b2) + ln.z0 * x0[ln.i2]
            rhs[ln.i1] += w2
            rhs[ln.i2] += w1
        x = x0.copy()
        dx_tol, res_tol = self.tolerances(config)
        for _ in range(config.max_newton_iters):
            f, J = self._nonlinear(x)
            F = Ah @ x + f - rhs
            dx = np.linalg.solve(Ah + J, F)
            x -= dx
            if np.all(np.abs(dx) <= config.newton_rel_tol * np.abs(x) + dx_tol):
                break
        else:
            raise NewtonDivergence(0.0, config.max_newton_iters)
        y = s.Q @ (x - x0) / h
        nt = len(s.lines)
        w1 = np.zeros((nt, prep.ring))
        w2 = np.zeros((nt, prep.ring))
        for i, ln in enumerate(s.lines):
            w1[i, 0] = _pair(x, ln.a1, ln.b1) + ln.z0 * x[ln.i1]
            w2[i, 0] = _pair(x, ln.a2, ln.b2) + ln.z0 * x[ln.i2]
        return SystemState(self, 0, config.dt, x, y, w1, w2)

    # -- stepping -------------------------------------------------------

    def _advance(self, state: SystemState, config: SimConfig, n_steps: int, rec_idx: np.ndarray):
        prep = self.prepare(config.dt)
        times = (state.n + 1 + np.arange(n_steps)) * config.dt
        src_vals = self.source_values(times)
        rec = np.zeros((n_steps, len(rec_idx)))
        dx_tol, res_tol = self.tolerances(config)
        tl = self._tl
        status, done, iters = kernel.advance(
            prep.A, prep.Ainv, prep.Zw, prep.Q2, state.x, state.y, state.n, n_steps,
            src_vals, self._src_rows, self._src_signs,
            *self._jj,
            *tl, prep.D, state.w1, state.w2,
            dx_tol, res_tol, config.newton_rel_tol, config.max_newton_iters,
            rec_idx, rec,
        )
        state.n += done
        return status, done, iters, rec

    def step(self, state: SystemState, config: SimConfig) -> SystemState:
        """Return the state one time step after ``state`` (``state`` is not modified)."""
        new = SystemState(self, state.n, state.dt, state.x.copy(), state.y.copy(), state.w1.copy(), state.w2.copy())
        status, _, iters, _ = self._advance(new, config, 1, np.zeros(0, dtype=np.int64))
        if status != kernel.OK:
            raise NewtonDivergence((state.n + 1) * config.dt, config.max_newton_iters)
        return new

    def run(self, config: SimConfig, probes: Sequence[Probe | str] = (), record_all: bool = True) -> "RunRecord":
        """Integrate from t=0 to ``config.t_stop``.

        Raises NewtonDivergence carrying the partial waveform on failure.
        """
        s = self.system
        probes = [parse_probe(p) if isinstance(p, str) else p for p in probes]
        needed = set(range(s.size)) if record_all else self._needed(probes)
        rec_idx = np.array(sorted(needed), dtype=np.int64)
        state = self.initial_state(config)
        x_init = self._initial_vector(config)
        first = state.x[rec_idx].copy()
        status, done, iters, rec = self._advance(state, config, config.n_steps, rec_idx)
        data = np.vstack([first[None, :], rec[:done]])
        record = RunRecord(self, config, rec_idx, data, x_init, 1e-6 * config.dt, iters)
        record.waveform = record.probe_waveform(probes)
        if status != kernel.OK:
            raise NewtonDivergence((done + 1) * config.dt, config.max_newton_iters, record.waveform)
        record.final_state = state
        return record

    def _needed(self, probes: Sequence[Probe]) -> set[int]:
        s = self.system
        out: set[int] = set()
        for pr in probes:
            if isinstance(pr, NodeVoltage):
                if pr.node != "0":
                    out.add(s.node(pr.node))
            elif isinstance(pr, JunctionPhase):
                out.add(s.phase_index[_check(pr.device, s.phase_index)])
            else:
                out.update(self._device_columns(pr.device))
        return out

    def _device_columns(self, name: str) -> set[int]:
        s = self.system
        try:
            d = self.netlist.device(name)
        except KeyError:
            raise KeyError(f"no device named {name!r}") from None
        cols = {s.node(n) for n in d.nodes} - {-1}
        if isinstance(d, (Inductor, VoltageSource)):
            cols.add(s.branch_index[d.name])
        elif isinstance(d, Junction):
            cols.add(s.phase_index[d.name])
        elif isinstance(d, TransmissionLine):
            ln = next(x for x in s.lines if x.name == d.name)
            cols |= {ln.i1, ln.i2}
        elif isinstance(d, MutualCoupling):
            raise ValueError(f"{name}: a coupling has no branch of its own")
        return cols


def _check(name: str, table: Mapping[str, int]) -> str:
    if name not in table:
        raise KeyError(f"no junction named {name!r}")
    return name


@dataclass
class RunRecord:
    """Recorded unknown columns of a completed (or aborted) run."""

    sim: Simulator
    config: SimConfig
    rec_idx: np.ndarray
    data: np.ndarray
    x_init: np.ndarray
    h_init: float
    newton_iterations: int
    waveform: Waveform | None = None
    final_state: SystemState | None = None

    def __post_init__(self):
        self._cols = {int(i): self.data[:, k] for k, i in enumerate(self.rec_idx)}

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.config.dt

    def column(self, idx: int) -> np.ndarray:
        if idx < 0:
            return np.zeros(self.n_samples)
        try:
            return self._cols[idx]
        except KeyError:
            raise KeyError(f"unknown {self.sim.system.labels[idx]} was not recorded") from None

    def pair(self, p: int, n: int) -> np.ndarray:
        return self.column(p) - self.column(n)

    def capacitor_current(self, c: float, v: np.ndarray, v_init: float) -> np.ndarray:
        """Trapezoidal-consistent ``C dv/dt`` for a branch voltage series."""
        dt = self.config.dt
        i0 = c * (v[0] - v_init) / self.h_init
        # i_n = b_n - i_{n-1}  =>  i_n = (-1)^n [i_0 + sum_k (-1)^k b_k]
        b = (2.0 * c / dt) * np.diff(v)
        signs = np.where(np.arange(len(v)) % 2 == 0, 1.0, -1.0)
        acc = np.concatenate([[i0], i0 + np.cumsum(signs[1:] * b)])
        return signs * acc

    def _init_pair(self, p: int, n: int) -> float:
        return _pair(self.x_init, p, n)

    def branch_voltage(self, name: str) -> np.ndarray:
        s = self.sim.system
        d = self.sim.netlist.device(name)
        if isinstance(d, TransmissionLine):
            return self.pair(s.node(d.in1), s.node(d.in2))
        return self.pair(s.node(d.nodes[0]), s.node(d.nodes[1]))

    def branch_current(self, name: str) -> np.ndarray:
        """Current from the device's first terminal to its second, through the device."""
        s = self.sim.system
        d = self.sim.netlist.device(name)
        if isinstance(d, (Inductor, VoltageSource)):
            return self.column(s.branch_index[d.name])
        if isinstance(d, Resistor):
            return self.branch_voltage(name) / d.value
        if isinstance(d, Capacitor):
            p, n = s.node(d.n1), s.node(d.n2)
            return self.capacitor_current(d.value, self.pair(p, n), self._init_pair(p, n))
        if isinstance(d, Junction):
            j = next(j for j in s.junctions if j.name == d.name)
            v = self.pair(j.p, j.n)
            phi = self.column(j.phase)
            return (
                j.ic * np.sin(phi)
                + self.junction_conductance(j, v) * v
                + self.capacitor_current(j.c, v, self._init_pair(j.p, j.n))
            )
        if isinstance(d, CurrentSource):
            return d.wave.sample(self.times)
        if isinstance(d, TransmissionLine):
            ln = next(x for x in s.lines if x.name == d.name)
            return self.column(ln.i1)
        raise ValueError(f"{name}: no branch current")

    @staticmethod
    def junction_conductance(j, v: np.ndarray) -> np.ndarray:
        gsg, gn = 1.0 / j.rsg, 1.0 / j.rn
        u = np.clip((np.abs(v) - 0.95 * j.vg) / (0.1 * j.vg), 0.0, 1.0)
        return gsg + (gn - gsg) * u * u * (3.0 - 2.0 * u)

    def device_power(self, name: str) -> np.ndarray:
        """Instantaneous power absorbed by a device (negative when delivering)."""
        s = self.sim.system
        d = self.sim.netlist.device(name)
        if isinstance(d, TransmissionLine):
            ln = next(x for x in s.lines if x.name == d.name)
            return self.pair(ln.a1, ln.b1) * self.column(ln.i1) + self.pair(ln.a2, ln.b2) * self.column(ln.i2)
        return self.branch_voltage(name) * self.branch_current(name)

    def probe_waveform(self, probes: Sequence[Probe]) -> Waveform:
        s = self.sim.system
        cols = []
        for pr in probes:
            if isinstance(pr, NodeVoltage):
                cols.append(self.column(s.node(pr.node)))
            elif isinstance(pr, BranchCurrent):
                cols.append(self.branch_current(pr.device))
            elif isinstance(pr, JunctionPhase):
                cols.append(self.column(s.phase_index[pr.device]))
            else:
                cols.append(self.device_power(pr.device))
        data = np.column_stack(cols) if cols else np.zeros((self.n_samples, 0))
        return Waveform(tuple(p.label for p in probes), self.config.dt, 0.0, data)


def run_transient(netlist: Netlist, config: SimConfig, probes: Sequence[Probe | str] = ()) -> Waveform:
    """Simulate ``netlist`` and return the probed waveform."""
    return Simulator(netlist).run(config, probes).waveform


def step(state: SystemState, config: SimConfig) -> SystemState:
    return state.sim.step(state, config)
