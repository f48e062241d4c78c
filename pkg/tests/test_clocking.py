import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import max_gap, px_amplitude
from qfp.analysis.verify import verify_logic
from qfp.cells import And, Buffer, Majority3, Splitter, XorMacro
from qfp.clocking import (
    ClockingError,
    ClockSpec,
    Design,
    EmptyPhase,
    InfeasibleEdge,
    SkipTooLarge,
    UnsupportedCut,
    amplitude_to_px,
    assign_phases,
    build_benchmark,
    build_clock_network,
    build_design,
    build_skip_chain,
    dither_wave,
    nominal_clock,
    px_to_amplitude,
    skip_chain_spec,
)
from qfp.engine import SimConfig, Simulator
from qfp.netlist import CurrentSource, Netlist, Resistor, TransmissionLine, parse_netlist, serialize

DT = SimConfig().dt


# --------------------------------------------------------------------------
# excitation power


def test_px_minus_16_dbm():
    assert math.isclose(px_to_amplitude(-16.0), 1.002e-3, rel_tol=1e-3)


def test_px_zero_dbm():
    assert math.isclose(px_to_amplitude(0.0), 6.325e-3, rel_tol=1e-3)


@given(st.floats(-30.0, 0.0))
def test_px_matches_oracle_and_round_trips(px):
    a = px_to_amplitude(px)
    assert math.isclose(a, px_amplitude(px, 50.0), rel_tol=1e-12)
    assert math.isclose(amplitude_to_px(a), px, abs_tol=1e-9)


def test_clock_spec_validation():
    with pytest.raises(ValueError):
        ClockSpec(f=5e9, T=10e-12)
    with pytest.raises(ValueError):
        ClockSpec(f=5e9, T=10e-12, px=-16, amplitude=1e-3)
    with pytest.raises(ValueError):
        ClockSpec(f=0, T=10e-12, px=-16)
    with pytest.raises(ValueError):
        ClockSpec(f=5e9, T=0, px=-16)
    c = ClockSpec(f=5e9, T=10e-12, px=-16)
    assert math.isclose(c.with_amplitude(c.amp).power_dbm, -16)
    assert math.isclose(c.peak_time(2, 0), 200e-12 + 50e-12 + 20e-12)


# --------------------------------------------------------------------------
# excitation network


def net_run(groups, clock, probes, t_stop, terminator=None):
    devs, _ = build_clock_network(groups, clock, 0.0)
    if terminator is not None:
        devs = [Resistor("rterm", d.n1, d.n2, terminator) if d.name == "rterm" else d for d in devs]
    sim = Simulator(Netlist("x", tuple(devs)))
    return sim.run(SimConfig(t_stop=t_stop), probes)


def test_no_gates_terminator_takes_source_power():
    clock = ClockSpec(f=5e9, T=10e-12, px=-16)
    P = clock.period
    rec = net_run([[]], clock, ["W(rterm)"], 10 * P)
    t = rec.times
    m = t >= 2 * P
    power = np.mean(rec.waveform["W(rterm)"][m][:-1])
    assert math.isclose(power, 1e-3 * 10 ** (-16 / 10), rel_tol=1e-3)


def test_skipped_phase_keeps_its_line():
    clock = ClockSpec(f=5e9, T=10e-12, px=-16)
    full, _ = build_clock_network([["a"], ["b"], ["c"]], clock, 0.0)
    skip, _ = build_clock_network([["a"], [], ["c"]], clock, 0.0)
    lines = lambda devs: sorted(d.name for d in devs if isinstance(d, TransmissionLine))
    assert lines(full) == lines(skip) == ["t1", "t2"]


def reflection(terminator):
    """Reflected / incident power at the line input, from the Norton source's terminal relation."""
    clock = ClockSpec(f=5e9, T=10e-12, px=-16)
    P = clock.period
    rec = net_run([[], []], clock, ["V(xs)"], 12 * P, terminator)
    t = rec.times
    i_src = 2 * clock.amp * np.sin(2 * np.pi * clock.f * t)
    v = rec.waveform["V(xs)"]
    i_line = i_src - v / clock.z0
    a_inc = 0.5 * (v + clock.z0 * i_line)
    a_ref = 0.5 * (v - clock.z0 * i_line)
    m = t >= 4 * P
    return np.mean(a_ref[m] ** 2) / np.mean(a_inc[m] ** 2)


def test_matched_terminator_reflects_under_half_percent():
    assert reflection(50.0) < 0.005


def test_mismatched_terminator_reflection_matches_gamma():
    gamma = (100.0 - 50.0) / (100.0 + 50.0)
    assert math.isclose(reflection(100.0), gamma**2, rel_tol=0.02)


def buffer_chain(n):
    d = Design()
    d.add_input("in")
    prev = "in"
    for i in range(n):
        d.add_gate(f"g{i}", Buffer(), i, [(prev, False)])
        prev = f"g{i}"
    return d


def excitation_delays(circuit, n):
    labels = [f"I(lx1_g{i})" for i in range(n)]
    wf = Simulator(circuit.netlist).run(SimConfig(t_stop=circuit.t_stop), labels).waveform
    t = wf.times
    w = 2 * np.pi * circuit.clock.f
    m = t > 3 * circuit.clock.period
    M = np.c_[np.sin(w * t[m]), np.cos(w * t[m]), np.ones(m.sum())]
    taus = []
    for lab in labels:
        a, b, _ = np.linalg.lstsq(M, wf[lab][m], rcond=None)[0]
        taus.append(-math.atan2(b, a) / w)
    return np.unwrap((np.array(taus) - taus[0]) * w) / w


@pytest.mark.parametrize("T", [10e-12, 20e-12])
def test_skew_additivity(params, T):
    n = 6
    c = build_design(buffer_chain(n), nominal_clock(params, 5e9, T), params, {"in": "0110"})
    delays = excitation_delays(c, n)
    assert np.all(np.abs(delays - np.arange(n) * T) <= DT)


def test_unflagged_empty_phase_rejected(params):
    d = Design()
    d.add_input("in")
    d.add_gate("g0", Buffer(), 0, [("in", False)])
    d.add_gate("g2", Buffer(), 2, [("g0", False)])
    with pytest.raises(EmptyPhase):
        build_design(d, nominal_clock(params), params, {"in": "01"})
    d.skipped.add(1)
    build_design(d, nominal_clock(params), params, {"in": "01"})


def test_backward_edge_rejected(params):
    d = Design()
    d.add_input("in")
    d.add_gate("g0", Buffer(), 1, [("in", False)])
    d.add_gate("g1", Buffer(), 1, [("g0", False)])
    with pytest.raises(ClockingError):
        build_design(d, nominal_clock(params), params, {"in": "01"})


def test_dither_constant_through_each_decision():
    clock = ClockSpec(f=5e9, T=10e-12, px=-16)
    w = dither_wave("g", clock, 2, 8, 2e-6)
    assert w == dither_wave("g", clock, 2, 8, 2e-6)
    signs = []
    for n in range(8):
        peak = clock.peak_time(2, n)
        t = np.linspace(peak - 0.4 * clock.period, peak + 0.4 * clock.period, 50)
        v = w.sample(t)
        assert np.all(np.abs(v) == 2e-6) and len(set(np.sign(v))) == 1
        signs.append(v[0] > 0)
    assert 0 < sum(signs) < 8


def test_dither_sources_follow_params(params):
    from dataclasses import replace

    d = buffer_chain(3)
    n_src = lambda p: sum(
        isinstance(x, CurrentSource) and x.name.startswith("ign_")
        for x in build_design(d, nominal_clock(params), p, {"in": "01"}).netlist.devices
    )
    assert n_src(params) == 3
    assert n_src(replace(params, gray_zone_current=0.0)) == 0


# --------------------------------------------------------------------------
# benchmarks


def test_xor_benchmark_span(params):
    b = build_benchmark(XorMacro(), nominal_clock(params), params)
    d = b.design
    assert d.phase_of("q") - d.phase_of("a") == 7
    assert {d.phase_of(g) for g in b.cut_gates} == {3, 4, 5}


def test_buffer_benchmark_span(params):
    b = build_benchmark(Buffer(), nominal_clock(params), params, n_pre=1, n_post=1)
    assert b.design.phase_of("q") - b.design.phase_of("a") == 3
    b = build_benchmark(Buffer(), nominal_clock(params), params)
    assert b.design.phase_of("q") - b.design.phase_of("a") == 5


def test_unsupported_cut(params):
    with pytest.raises(UnsupportedCut):
        build_benchmark(Splitter(2), nominal_clock(params), params)


def test_and_truth_table(params):
    b = build_benchmark(And(), nominal_clock(params, 5e9, 20e-12), params)
    res = verify_logic(b)
    assert res.passed, res.diagnostic
    assert res.expected == [0, 0, 0, 1]


@pytest.mark.parametrize("cut", [Buffer(), And(), Majority3(), XorMacro()])
def test_benchmark_netlist_round_trip_and_monotone(params, cut):
    b = build_benchmark(cut, nominal_clock(params), params)
    c = b.build()
    text = serialize(c.netlist)
    assert serialize(parse_netlist(text)) == text
    gates = {g.name: g for g in b.design.expanded()}
    for g in gates.values():
        for src, _ in g.inputs:
            if src in gates:
                assert gates[src].phase < g.phase


# --------------------------------------------------------------------------
# skip chains


def test_skip_zero_is_conventional_chain(params):
    spec = skip_chain_spec(0)
    assert spec.skipped == frozenset()
    b = build_skip_chain(0, nominal_clock(params), params)
    phases = [b.design.phase_of(f"st{s}") for s in range(1, 6)]
    assert phases == [0, 1, 2, 3, 4]


def test_skip_chain_gap(params):
    b = build_skip_chain(3, nominal_clock(params), params)
    d = b.design
    assert d.phase_of("st3") - d.phase_of("st2") == 4
    assert d.skipped == {2, 3, 4}
    c = b.build()
    assert sum(isinstance(x, TransmissionLine) for x in c.netlist.devices) == d.n_phases - 1


def test_skip_too_large(params):
    with pytest.raises(SkipTooLarge):
        build_skip_chain(5, nominal_clock(params), params)
    with pytest.raises(SkipTooLarge):
        skip_chain_spec(-1)


# --------------------------------------------------------------------------
# phase assignment


def test_chain_of_five_saves_four():
    dag = {"b1": ["src"], "b2": ["b1"], "b3": ["b2"], "b4": ["b3"], "b5": ["b4"]}
    a = assign_phases(dag, 10e-12, 70e-12, 0.8, removable=["b1", "b2", "b3", "b4"])
    assert a.max_gap == max_gap(10e-12, 70e-12, 0.8) == 5
    assert a.edges == [("src", "b5")]
    assert a.buffers_saved == 4 and a.buffers_inserted == 0


def test_max_gap_three_at_20ps():
    a = assign_phases({"y": ["x"]}, 20e-12, 70e-12, 1.0)
    assert a.max_gap == max_gap(20e-12, 70e-12, 1.0) == 3


def test_long_chain_keeps_some_buffers():
    names = [f"b{i}" for i in range(1, 10)]
    dag = {n: [p] for p, n in zip(["src"] + names, names)}
    a = assign_phases(dag, 20e-12, 70e-12, 1.0, removable=names[:-1])
    # 9 hops, at most 3 per edge: 3 edges, 2 buffers kept
    assert len(a.edges) == 3 and a.kept_buffers == 2


def test_infeasible_edge():
    with pytest.raises(InfeasibleEdge):
        assign_phases({"y": ["x"]}, 80e-12, 70e-12)
    with pytest.raises(InfeasibleEdge):
        assign_phases({"y": ["x"]}, 60e-12, 70e-12, 0.8)


def test_cycle_rejected():
    with pytest.raises(ClockingError):
        assign_phases({"a": ["b"], "b": ["a"]}, 10e-12, 70e-12)


@st.composite
def gate_dags(draw):
    n = draw(st.integers(2, 12))
    dag = {}
    for i in range(1, n):
        k = draw(st.integers(1, min(3, i)))
        dag[f"n{i}"] = sorted(set(draw(st.lists(st.integers(0, i - 1), min_size=k, max_size=k))))
        dag[f"n{i}"] = [f"n{j}" for j in dag[f"n{i}"]]
    return dag


@settings(max_examples=200)
@given(gate_dags(), st.sampled_from([5e-12, 10e-12, 20e-12]), st.floats(0.5, 1.0))
def test_no_edge_exceeds_safety_limit(dag, T, safety):
    tmax = 70e-12
    if T > safety * tmax:
        return
    nodes = set(dag) | {s for v in dag.values() for s in v}
    fanout = {n: sum(n in v for v in dag.values()) for n in nodes}
    removable = [n for n, v in dag.items() if len(v) == 1 and fanout[n] == 1]
    a = assign_phases(dag, T, tmax, safety, removable=removable)
    limit = safety * tmax * (1 + 1e-9)
    for s, d in a.edges:
        hops = [a.phases[s]] + next((b for s2, d2, b in a.inserted if (s2, d2) == (s, d)), []) + [a.phases[d]]
        assert all(0 < (y - x) * T <= limit for x, y in zip(hops, hops[1:]))
    assert a.buffers_saved >= 0
