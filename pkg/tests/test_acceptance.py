"""One test per acceptance criterion; each prints a PASS/FAIL line and the measured values."""

import math
import time

import numpy as np
import pytest
from click.testing import CliRunner
from hypothesis import given, settings

from criteria import report
from oracles import lc_current, rc_step
from test_clocking import buffer_chain, excitation_delays, reflection
from test_netlist import netlists
from qfp.analysis.edp import EdpEntry
from qfp.analysis.energy import energy_per_op
from qfp.analysis.logic import LogicTestPlan, prbs7
from qfp.analysis.skip import max_frequency, skip_scan, tmax_estimate
from qfp.analysis.verify import latency, verify_logic
from qfp.cells import And, Buffer, Majority3, Or, XorMacro, logic_function
from qfp.cli import main
from qfp.clocking import build_benchmark, build_design, nominal_clock
from qfp.engine import SimConfig, energy_balance, run_transient
from qfp.netlist import parse_netlist, serialize

PS = 1e-12
ZJ = 1e-21
BALANCE_TOL = 1e-3
BALANCES: list[float] = []  # energy-balance residual of every acceptance run


def balanced(run):
    r = energy_balance(run.record).residual
    BALANCES.append(r)
    return run


def checked(bench, config=None):
    res = verify_logic(bench, config)
    if "run" in res.extra:
        balanced(res.extra["run"])
    return res


@pytest.fixture(scope="module")
def tmax5(params):
    return tmax_estimate(Buffer(), nominal_clock(params, 5e9), params)


def test_c01_xor_latency(params):
    b = build_benchmark(XorMacro(), nominal_clock(params, 5e9, 10 * PS), params, prbs_length=64)
    t0 = time.perf_counter()
    res = checked(b)
    elapsed = time.perf_counter() - t0
    run = res.extra["run"]
    lat_a = latency(run, "a", "q")
    lat_b = latency(run, "b", "q")
    ok = res.passed and abs(lat_a - 70 * PS) <= 2 * PS and abs(lat_b - 70 * PS) <= 2 * PS and elapsed < 60
    report(1, "XOR latency, 5 GHz, T = 10 ps", ok,
           f"pass={res.passed}, A->Q {lat_a / PS:.2f} ps, B->Q {lat_b / PS:.2f} ps (70 +- 2), run {elapsed:.1f} s")
    assert ok


def test_c02_per_gate_skew(params):
    n = 6
    worst = {}
    for T in (10 * PS, 20 * PS):
        c = build_design(buffer_chain(n), nominal_clock(params, 5e9, T), params, {"in": "0110"})
        d = excitation_delays(c, n)
        worst[T] = float(np.max(np.abs(d - np.arange(n) * T)))
    dt = SimConfig().dt
    ok = all(w <= dt for w in worst.values())
    report(2, "excitation skew i*T +- dt", ok,
           ", ".join(f"T = {T / PS:g} ps: worst {w / PS:.3f} ps" for T, w in worst.items()) + f" (dt {dt / PS:g} ps)")
    assert ok


def test_c03_skip_feasibility(params, tmax5):
    m = skip_scan([10 * PS, 20 * PS], range(5), nominal_clock(params, 5e9), params, tmax=tmax5.tmax)
    k10, k20 = m.passing_k(10 * PS), m.passing_k(20 * PS)
    exact = k20 == [0, 1, 2] and k10 == [0, 1, 2, 3, 4]
    within_one = max(k20, default=-1) in (1, 2, 3) and max(k10, default=-1) >= 3
    ok = m.monotone() and within_one
    report(3, "skip feasibility, 5 GHz", ok,
           f"T=20 ps k={k20}, T=10 ps k={k10}, exact={exact}, monotone={m.monotone()}, predictor agreement {m.agreement():.0%}")
    assert ok
    assert m.agreement() >= 0.9


def test_c04_tmax(tmax5):
    ok = tmax5.bracketed and 50 * PS <= tmax5.tmax <= 90 * PS
    report(4, "Tmax of a buffer, 5 GHz", ok, f"{tmax5.tmax / PS:g} ps (50..90), resolution {tmax5.resolution / PS:g} ps")
    assert ok


def test_c05_skip_frequency_limits(params):
    clock = nominal_clock(params, 5e9, 20 * PS)
    f3 = max_frequency(3, clock, params)
    f4 = max_frequency(4, clock, params)
    ok = 0.8 * 4.4e9 <= f3.f_max <= 1.2 * 4.4e9 and 0.8 * 3.5e9 <= f4.f_max <= 1.2 * 3.5e9
    report(5, "skip-chain max frequency, T = 20 ps", ok,
           f"k=3 {f3.f_max / 1e9:.2f} GHz (3.52..5.28), k=4 {f4.f_max / 1e9:.2f} GHz (2.80..4.20)")
    assert ok


@pytest.fixture(scope="module")
def buffer_energy(params):
    out = {}
    for T in (2, 10, 20, 30, 40, 50):
        b = build_benchmark(Buffer(), nominal_clock(params, 5e9, T * PS), params, settle=4)
        out[T] = energy_per_op(b).energy
    # one representative balance check on the sweep's harness
    balanced(build_benchmark(Buffer(), nominal_clock(params, 5e9, 10 * PS), params, settle=4).run())
    return out


def test_c06_energy_plateau(buffer_energy):
    E = buffer_energy
    plateau = [E[T] for T in (10, 20, 30, 40, 50)]
    spread = max(plateau) / min(plateau)
    blow = E[2] / E[20]
    ok = spread < 2 and blow > 3 and min(E.values()) >= 0
    report(6, "buffer energy vs T, 5 GHz", ok,
           f"max/min over 10..50 ps {spread:.2f} (< 2), E(2)/E(20) {blow:.2f} (> 3); "
           + ", ".join(f"E({T})={e / ZJ:.2f} zJ" for T, e in E.items()))
    assert ok


def test_c07_energy_scale(buffer_energy):
    e = buffer_energy[10]
    ok = 0.9 * ZJ <= e <= 9 * ZJ
    report(7, "buffer energy scale, 5 GHz, T = 10 ps", ok, f"{e / ZJ:.2f} zJ (0.9..9)")
    assert ok


def test_c08_edp_arithmetic():
    cases = [(2.8e-21, 10e-12, 2.8e-32), (2.8e-21, 50e-12, 1.4e-31), (17e-18, 4e-12, 6.8e-29)]
    got = [EdpEntry("x", e, d).edp for e, d, _ in cases]
    ok = all(math.isclose(g, x, rel_tol=1e-12) for g, (_, _, x) in zip(got, cases))
    report(8, "EDP arithmetic", ok, ", ".join(f"{g:.3g}" for g in got) + " J*s")
    assert ok


def xor_with_a_pinned(params, a_bit):
    clock = nominal_clock(params, 5e9, 20 * PS)
    b = build_benchmark(XorMacro(), clock, params)
    stream = prbs7(16)
    plan = LogicTestPlan(("in_a", "in_b"), {"in_a": a_bit * len(stream), "in_b": stream}, logic_function(XorMacro()))
    b = b.with_plan(plan)
    res = checked(b)
    return res


def test_c10_truth_tables_and_inversion(params):
    clock = nominal_clock(params, 5e9, 20 * PS)
    verdicts = {}
    for kind in (And(), Or(), Majority3(), XorMacro()):
        verdicts[type(kind).__name__] = checked(build_benchmark(kind, clock, params)).passed
    r0 = xor_with_a_pinned(params, "0")
    r1 = xor_with_a_pinned(params, "1")
    inverted = (
        r0.passed and r1.passed
        and None not in r0.decoded and None not in r1.decoded
        and all(x == 1 - y for x, y in zip(r0.decoded, r1.decoded))
    )
    ok = all(verdicts.values()) and inverted
    report(10, "truth tables, 5 GHz, T = 20 ps", ok,
           ", ".join(f"{k} {'pass' if v else 'fail'}" for k, v in verdicts.items())
           + f"; XOR output with A=1 is the inversion of A=0: {inverted}")
    assert ok


def test_c11_infrastructure(tmp_path):
    @settings(max_examples=1000, database=None)
    @given(netlists())
    def round_trip(n):
        text = serialize(n)
        back = parse_netlist(text)
        assert back == n and serialize(back) == text

    try:
        round_trip()
        rt_ok = True
    except AssertionError:
        rt_ok = False

    runner = CliRunner()
    args = ["skipscan", "--T", "10ps,20ps", "--k", "1..3", "--prbs", "0"]
    outs = []
    for name, jobs in (("a", "1"), ("b", "2")):
        r = runner.invoke(main, ["--out", str(tmp_path / name), "--jobs", jobs, *args])
        outs.append(r.exit_code)
    files = sorted(p.name for p in (tmp_path / "a").iterdir() if p.name != "manifest.json")
    same = outs == [0, 0] and all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files)
    ok = rt_ok and same
    report(11, "parser round trip and grid determinism", ok,
           f"1000 generated netlists round-trip: {rt_ok}; skipscan reruns byte-identical over {len(files)} files: {same}")
    assert ok


# runs last so the energy-balance check covers every acceptance simulation above
def test_c09_solver_correctness():
    dt = SimConfig().dt
    rc = run_transient(parse_netlist(".title rc\nv1 1 0 dc 1\nr1 1 2 10\nc1 2 0 1p\n"), SimConfig(t_stop=100 * PS), ["V(2)"])
    rc_err = float(np.max(np.abs(rc["V(2)"] - rc_step(rc.times, 10.0, 1e-12, 1.0))))
    lc_cfg = SimConfig(t_stop=400 * PS, initial_conditions={"I(l1)": 1e-3})
    lc = run_transient(parse_netlist(".title lc\nl1 1 0 1n\nc1 1 0 1p\n"), lc_cfg, ["I(l1)"])
    lc_err = float(np.max(np.abs(lc["I(l1)"] - lc_current(lc.times, 1e-9, 1e-12, 1e-3)))) / 1e-3

    def lc_error(step):
        cfg = SimConfig(dt=step, t_stop=400 * PS, initial_conditions={"I(l1)": 1e-3})
        w = run_transient(parse_netlist(".title lc\nl1 1 0 1n\nc1 1 0 1p\n"), cfg, ["I(l1)"])
        return float(np.max(np.abs(w["I(l1)"] - lc_current(w.times, 1e-9, 1e-12, 1e-3))))

    ratio = lc_error(2 * dt) / lc_error(dt)
    refl = reflection(50.0)
    worst_balance = max(BALANCES) if BALANCES else float("nan")
    ok = rc_err < 5e-3 and lc_err < 5e-3 and 3.2 <= ratio <= 4.8 and refl < 5e-3 and worst_balance < BALANCE_TOL
    report(9, "solver correctness", ok,
           f"RC err {rc_err:.2e}, LC err {lc_err:.2e} (< 0.5%), convergence ratio {ratio:.2f} (3.2..4.8), "
           f"matched-line reflection {refl:.1e} (< 0.5%), worst energy-balance residual {worst_balance:.1e} "
           f"over {len(BALANCES)} runs (< 1e-3)")
    assert ok
