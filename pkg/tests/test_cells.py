import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qfp.analysis.logic import decode
from qfp.cells import (
    AqfpCellParams,
    And,
    ArityMismatch,
    Buffer,
    CalibrationFailed,
    ConstantBranch,
    Inverter,
    Junction,
    Majority3,
    MutualCoupling,
    Or,
    Splitter,
    UncalibratedParams,
    XorMacro,
    build_cell,
    calibrate,
    expand_xor,
    kind_from_name,
    xor_structure,
)
from qfp.clocking import Design, nominal_clock, simulate_design
from qfp.units import PHI0

EX = ("e0", "e1")


def junctions(frag):
    return sum(isinstance(d, Junction) for d in frag.devices)


@pytest.mark.parametrize("kind", [Buffer(), Inverter(), Splitter(2), Splitter(3), Majority3(), And(), Or()])
def test_two_junctions_per_gate(kind, params):
    frag = build_cell(kind, params, "g", EX)
    assert junctions(frag) == 2
    assert frag.excitation == EX
    assert frag.probe.threshold > 0


def test_arity(params):
    assert len(build_cell(Splitter(3), params, "g", EX).outputs) == 3
    assert len(build_cell(And(), params, "g", EX).inputs) == 2
    with pytest.raises(ArityMismatch):
        build_cell(Buffer(), params, "g", EX, n_inputs=2)
    with pytest.raises(ArityMismatch):
        build_cell(Majority3(), params, "g", EX, n_inputs=2)
    with pytest.raises(TypeError):
        build_cell(XorMacro(), params, "g", EX)


def test_constant_branch(params):
    frag = build_cell(ConstantBranch(-1), params, "k")
    assert frag.inputs == [] and len(frag.outputs) == 1
    with pytest.raises(ValueError):
        ConstantBranch(0)


def test_inverter_flips_output_coupling_sign(params):
    b = build_cell(Buffer(), params, "g", EX)
    i = build_cell(Inverter(), params, "g", EX)
    assert b.outputs[0].polarity == -i.outputs[0].polarity


def test_excitation_flux_calibration(params):
    # default excitation puts 0.5 phi0 ac and dc flux on the loop
    assert abs(params.loop_flux(params.drive_amplitude) / PHI0 - 0.5) < 0.05
    assert abs(params.loop_flux(params.dc_offset) / PHI0 - 0.5) < 0.05
    params.check_calibration()
    bad = replace(params, drive_amplitude=2 * params.drive_amplitude)
    with pytest.raises(UncalibratedParams):
        build_cell(Buffer(), bad, "g", EX)


def test_mutual_is_k_sqrt_l(params):
    frag = build_cell(Buffer(), params, "g", EX)
    kx = [d for d in frag.devices if isinstance(d, MutualCoupling) and d.name.startswith("kx")]
    assert sorted(d.k for d in kx) == [-params.kx, params.kx]
    assert math.isclose(params.m1, params.kx * math.sqrt(params.lx1 * params.l1))


def test_params_json_round_trip(params):
    assert AqfpCellParams.from_json(params.to_json()) == params


def test_param_validation():
    with pytest.raises(ValueError):
        AqfpCellParams(l1=0.0)
    with pytest.raises(ValueError):
        AqfpCellParams(kin=1.0)


def test_kind_names():
    assert kind_from_name("XOR") == XorMacro()
    with pytest.raises(ValueError):
        kind_from_name("nand")


def test_xor_structure():
    subs = xor_structure("x")
    assert sorted({s.phase_offset for s in subs}) == [0, 1, 2]
    ands = [s for s in subs if isinstance(s.kind, And)]
    assert len(ands) == 2
    # exactly one inverted input on each AND
    assert all(sum(inv for _, inv in s.inputs) == 1 for s in ands)
    assert isinstance(subs[-1].kind, Or) and subs[-1].phase_offset == 2


def test_expand_xor_fragment(params):
    m = expand_xor("x", params, [("a0", "a1"), ("b0", "b1"), ("c0", "c1")])
    assert set(m.inputs) == {"a", "b"}
    assert set(m.phases.values()) == {0, 1, 2}
    assert junctions(m) == 10
    edges = [d for d in m.devices if isinstance(d, MutualCoupling) and d.name[:3] in ("k1_", "k2_")]
    assert len(edges) == 6
    assert sum(d.k < 0 for d in edges) == 2


# --------------------------------------------------------------------------
# simulated single-gate behavior


def chain_run(params, bits, kind=Buffer(), T=20e-12):
    d = Design()
    d.add_input("in")
    d.add_gate("g1", Buffer(), 0, [("in", False)])
    d.add_gate("g2", kind, 1, [("g1", False)])
    d.add_gate("g3", Buffer(), 2, [("g2", False)])
    return simulate_design(d, nominal_clock(params, 5e9, T), params, {"in": bits})


def test_buffer_output_sign_and_scale(params):
    run = chain_run(params, "11111")
    c = run.circuit
    label = c.probes["g2"].label
    vals = run.waveform.value_at(label, c.sample_times("g2", range(2, 5)))
    assert np.all(vals > 0)
    assert np.all(np.abs(vals) <= 2 * params.signal_current)
    assert np.all(np.abs(vals) >= 0.5 * params.signal_current)


def test_inverter_decodes_not(params):
    run = chain_run(params, "0110", Inverter())
    c = run.circuit
    bits = decode(run.waveform, c.probes["g2"], c.sample_times("g2"))
    assert bits == [1, 0, 0, 1]


def test_buffer_odd_symmetry(params):
    # noise-free cells: the gray-zone dither is not data-antisymmetric
    quiet = replace(params, gray_zone_current=0.0)
    a = chain_run(quiet, "0110")
    b = chain_run(quiet, "1001")
    label = a.circuit.probes["g2"].label
    ia, ib = a.waveform[label], b.waveform[label]
    assert np.max(np.abs(ia + ib)) < 0.01 * np.max(np.abs(ia))


def test_reset_before_next_rising_edge(params):
    run = chain_run(params, "01101")
    c = run.circuit
    for g in ("g1", "g2", "g3"):
        # excitation minimum after each peak, i.e. before the phase's next rising edge
        t_min = c.sample_times(g) + 0.5 * c.clock.period
        t_min = t_min[t_min < run.waveform.times[-1]]
        vals = run.waveform.value_at(c.probes[g].label, t_min)
        assert np.all(np.abs(vals) < c.probes[g].threshold)


@st.composite
def dags(draw):
    kinds = [Buffer(), Inverter(), And(), Or(), Majority3()]
    d = Design()
    d.add_input("in0")
    d.add_input("in1")
    avail = [("in0", 0), ("in1", 0)]
    for i in range(draw(st.integers(1, 4))):
        kind = draw(st.sampled_from(kinds))
        n_in = {Buffer: 1, Inverter: 1, And: 2, Or: 2, Majority3: 3}[type(kind)]
        srcs = []
        for _ in range(n_in):
            # a gate output is a single branch: never wire it twice
            pool = [a for a in avail if a[0].startswith("in") or a not in srcs]
            srcs.append(draw(st.sampled_from(pool)))
        # a primary input may feed several gates; a gate output feeds one gate
        phase = max(ph for _, ph in srcs) + 1
        name = f"g{i}"
        d.add_gate(name, kind, phase, [(s, draw(st.booleans())) for s, _ in srcs])
        for s, _ in srcs:
            if not s.startswith("in"):
                avail = [a for a in avail if a[0] != s]
        avail.append((name, phase))
    # fill empty phases so the line chain has no unflagged gaps
    used = {g.phase for g in d.gates.values()}
    top = max(used)
    for p in range(1, top):
        if p not in used:
            d.skipped.add(p)
    return d


@settings(max_examples=6, deadline=None)
@given(dags())
def test_composability(params, d):
    n = 4
    run = simulate_design(d, nominal_clock(params, 5e9, 10e-12), params, {"in0": "0101"[:n], "in1": "0011"[:n]})
    assert np.all(np.isfinite(run.record.data))


def test_calibrate_default_converges_with_margin(params):
    p, rep = calibrate(params, margin=True)
    assert abs(rep.ac_flux - 0.5) <= 0.01 and abs(rep.dc_flux - 0.5) <= 0.01
    assert rep.margin_db >= 3.0
    assert abs(p.drive_amplitude / params.drive_amplitude - 1) < 0.02


def test_calibrate_kx_zero_fails(params):
    with pytest.raises(CalibrationFailed):
        calibrate(replace(params, kx=0.0))


def test_calibrate_larger_lx_needs_less_drive(params):
    p1, _ = calibrate(params)
    p2, _ = calibrate(replace(params, lx1=2 * params.lx1, lx2=2 * params.lx2))
    assert p2.drive_amplitude < p1.drive_amplitude
