"""Command-line entry point: ``qfp run|margins|energy|skipscan|tmax|fmax|edp|cells|bench``.

Exit status: 0 success, 1 unrecorded failure, 2 parse/usage error,
3 convergence failure, 4 I/O failure.
"""

from __future__ import annotations

import datetime as _dt
import functools
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import click

from . import __version__
from .cells import AqfpCellParams, CalibrationFailed, Buffer, calibrate, kind_from_name
from .clocking import Benchmark, ClockSpec, build_benchmark, build_skip_chain
from .engine import FULL_LINE, IDEAL_DELAY, EngineError, NewtonDivergence, SimConfig, Simulator
from .netlist import NetlistError, parse_netlist, serialize
from .units import parse_quantity

EXIT_FAIL, EXIT_PARSE, EXIT_CONVERGENCE, EXIT_IO = 1, 2, 3, 4

# config keys -> unit; numbers in files are SI, strings must carry the unit
SIM_UNITS = {"dt": "s", "t_stop": "s", "newton_rel_tol": "", "newton_abs_tol_v": "V", "newton_abs_tol_i": "A", "max_newton_iters": ""}
CLOCK_UNITS = {"f": "Hz", "T": "s", "px": "dBm", "amplitude": "A", "dc": "A", "z0": "ohm", "terminator": "ohm"}
CLOCK_ALIASES = {"Px": "px", "Id": "dc", "Z0": "z0", "A": "amplitude"}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _value(v, unit: str, key: str) -> float:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return v
    if isinstance(v, str):
        try:
            return parse_quantity(v, unit) if unit else float(v)
        except ValueError as e:
            raise CliError(f"{key}: {e}", EXIT_PARSE) from None
    raise CliError(f"{key}: expected a number or a string with unit {unit!r}", EXIT_PARSE)


def quantity(text: str, unit: str, what: str) -> float:
    try:
        return parse_quantity(text, unit)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint=what) from None


def quantity_list(text: str, unit: str, what: str) -> list[float]:
    return [quantity(t, unit, what) for t in text.split(",") if t.strip()]


def int_range(text: str) -> list[int]:
    """"0..4" or "0,2,3"."""
    try:
        if ".." in text:
            a, b = text.split("..")
            return list(range(int(a), int(b) + 1))
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise click.BadParameter(f"{text!r} is not an integer list or range") from None


# --------------------------------------------------------------------------
# configuration


@dataclass
class Context:
    config_path: Path | None
    out: Path
    jobs: int
    seed: int
    mode: str
    raw_config: dict = field(default_factory=dict)
    inputs: dict[str, str] = field(default_factory=dict)

    def sim_config(self, **over) -> SimConfig:
        raw = dict(self.raw_config.get("sim", {}))
        kw = {}
        for k, v in raw.items():
            if k not in SIM_UNITS:
                raise CliError(f"config: unknown sim key {k!r}", EXIT_PARSE)
            kw[k] = _value(v, SIM_UNITS[k], k)
        if "max_newton_iters" in kw:
            kw["max_newton_iters"] = int(kw["max_newton_iters"])
        kw.update({k: v for k, v in over.items() if v is not None})
        try:
            return SimConfig(excitation_mode=self.mode, **kw)
        except ValueError as e:
            raise CliError(f"config: {e}", EXIT_PARSE) from None

    def clock_overrides(self) -> dict:
        out = {}
        for k, v in self.raw_config.get("clock", {}).items():
            k = CLOCK_ALIASES.get(k, k)
            if k not in CLOCK_UNITS:
                raise CliError(f"config: unknown clock key {k!r}", EXIT_PARSE)
            out[k] = _value(v, CLOCK_UNITS[k], k)
        return out


def hash_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class RunManifest:
    command: str
    inputs: dict[str, str]  # path -> sha256
    overrides: dict
    out: str
    seed: int
    version: str
    created: str

    def write(self, out: Path) -> None:
        (out / "manifest.json").write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def start(ctx: Context, command: str, overrides: dict) -> Path:
    """Create the output directory and write the manifest before any result."""
    try:
        ctx.out.mkdir(parents=True, exist_ok=True)
        inputs = dict(ctx.inputs)
        if ctx.config_path is not None:
            inputs[str(ctx.config_path)] = hash_file(ctx.config_path)
        m = RunManifest(
            command,
            inputs,
            {k: v for k, v in sorted(overrides.items())},
            str(ctx.out),
            ctx.seed,
            __version__,
            _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        )
        m.write(ctx.out)
    except OSError as e:
        raise CliError(f"cannot write to {ctx.out}: {e}", EXIT_IO) from None
    return ctx.out


def write(ctx: Context, name: str, text: str) -> None:
    try:
        (ctx.out / name).write_text(text, encoding="utf-8")
    except OSError as e:
        raise CliError(f"cannot write {name}: {e}", EXIT_IO) from None


def read_text(ctx: Context, path: str) -> str:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise CliError(f"cannot read {path}: {e}", EXIT_IO) from None
    ctx.inputs[str(p)] = hashlib.sha256(text.encode()).hexdigest()
    return text


def load_params(ctx: Context, path: str | None) -> AqfpCellParams:
    if path is None:
        return AqfpCellParams()
    text = read_text(ctx, path)
    try:
        return AqfpCellParams.from_json(text)
    except (ValueError, TypeError, KeyError) as e:
        raise CliError(f"{path}: bad cell parameter file: {e}", EXIT_PARSE) from None


# --------------------------------------------------------------------------
# benchmark descriptions


@dataclass(frozen=True)
class BenchSpec:
    """What to build: a CUT harness (``cut``) or a skip chain (``chain_k``)."""

    cut: str | None = None
    chain_k: int | None = None
    n_pre: int = 2
    n_post: int = 2
    prbs: int = 16
    seed: int = 0x5A

    def build(self, clock: ClockSpec, params: AqfpCellParams, settle: int = 3) -> Benchmark:
        if self.chain_k is not None:
            return build_skip_chain(self.chain_k, clock, params, prbs_length=self.prbs, seed=self.seed, settle=settle)
        return build_benchmark(kind_from_name(self.cut), clock, params, self.n_pre, self.n_post, self.prbs, self.seed, settle)

    @property
    def label(self) -> str:
        return f"skip{self.chain_k}" if self.chain_k is not None else self.cut


def load_bench(ctx: Context, path: str) -> tuple[BenchSpec, dict, str | None]:
    """Benchmark file: {"cut": name | "chain": {"k": n}, "clock": {...}, "params": path}."""
    text = read_text(ctx, path)
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise CliError(f"{path}: {e}", EXIT_PARSE) from None
    if ("cut" in raw) == ("chain" in raw):
        raise CliError(f"{path}: give exactly one of 'cut' or 'chain'", EXIT_PARSE)
    clock = {}
    for k, v in raw.get("clock", {}).items():
        k = CLOCK_ALIASES.get(k, k)
        if k not in CLOCK_UNITS:
            raise CliError(f"{path}: unknown clock key {k!r}", EXIT_PARSE)
        clock[k] = _value(v, CLOCK_UNITS[k], k)
    if "cut" in raw:
        try:
            kind_from_name(raw["cut"])
        except ValueError as e:
            raise CliError(f"{path}: {e}", EXIT_PARSE) from None
        spec = BenchSpec(cut=raw["cut"].lower())
    else:
        spec = BenchSpec(chain_k=int(raw["chain"]["k"]))
    params = raw.get("params")
    if params is not None:
        params = str((Path(path).parent / params))
    return spec, clock, params


def make_clock(params: AqfpCellParams, f: float, T: float, overrides: dict, px: float | None = None) -> ClockSpec:
    kw = {"f": f, "T": T, "amplitude": params.drive_amplitude, "dc": params.dc_offset}
    kw.update(overrides)
    if "px" in overrides or px is not None:
        kw["amplitude"] = None
        kw["px"] = px if px is not None else overrides["px"]
    try:
        return ClockSpec(**kw)
    except ValueError as e:
        raise CliError(f"clock: {e}", EXIT_PARSE) from None


# --------------------------------------------------------------------------
# grid cells (module level so worker processes can import them)


def _margin_cell(args):
    from .analysis.margins import margin_search

    spec, clock, params, span, res, config, mode = args
    return margin_search(lambda ck: spec.build(ck, params), clock, span, res, config, mode)


def _energy_cell(args):
    from .analysis.energy import energy_per_op

    spec, clock, params, scope, config, mode = args
    return energy_per_op(spec.build(clock, params, settle=4), config, mode, scope)


def _tmax_cell(args):
    from .analysis.skip import tmax_estimate

    kind, clock, params, res, config, mode = args
    return tmax_estimate(kind_from_name(kind), clock, params, res, config=config, mode=mode)


def _fmax_cell(args):
    from .analysis.skip import max_frequency

    k, clock, params, lo, hi, res, prbs, config, mode = args
    return max_frequency(k, clock, params, lo, hi, res, prbs, config, mode)


def _grid(ctx: Context, fn, cells):
    from .analysis.skip import run_cells

    return run_cells(fn, cells, ctx.jobs)


# --------------------------------------------------------------------------
# commands


@click.group()
@click.version_option(__version__, prog_name="qfp")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON file with 'sim' and 'clock' sections.")
@click.option("--out", default="qfp-out", show_default=True, type=click.Path(file_okay=False), help="Output directory.")
@click.option("--jobs", type=int, default=None, help="Parallel grid cells (default: available cores).")
@click.option("--seed", type=int, default=0x5A, show_default=True, help="PRBS seed.")
@click.option("--mode", type=click.Choice([FULL_LINE, IDEAL_DELAY]), default=FULL_LINE, show_default=True)
@click.pass_context
def main(cctx, config_path, out, jobs, seed, mode):
    """Josephson circuit simulation and AQFP delay-line clocking experiments."""
    raw = {}
    path = None
    if config_path is not None:
        path = Path(config_path)
        try:
            raw = json.loads(path.read_text())
        except OSError as e:
            _fail(CliError(f"cannot read {config_path}: {e}", EXIT_IO))
        except json.JSONDecodeError as e:
            _fail(CliError(f"{config_path}: {e}", EXIT_PARSE))
    if jobs is None:
        jobs = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
    cctx.obj = Context(path, Path(out), max(1, jobs), seed, mode, raw)


def _fail(e: CliError):
    click.echo(f"error: {e}", err=True)
    sys.exit(e.code)


def guarded(fn):
    """Map library errors to exit codes."""

    @functools.wraps(fn)
    def wrapper(*a, **kw):
        try:
            return fn(*a, **kw)
        except CliError as e:
            _fail(e)
        except NetlistError as e:
            _fail(CliError(str(e), EXIT_PARSE))
        except NewtonDivergence as e:
            _fail(CliError(str(e), EXIT_CONVERGENCE))
        except EngineError as e:
            _fail(CliError(str(e), EXIT_CONVERGENCE))
        except OSError as e:
            _fail(CliError(str(e), EXIT_IO))

    return wrapper


@main.command("run")
@click.argument("netlist", type=click.Path(dir_okay=False))
@click.option("--probe", "probes", multiple=True, help="V(node), I(device), P(junction) or W(device); default all node voltages.")
@click.option("--dt", help="Time step, e.g. 0.1ps.")
@click.option("--tstop", help="Stop time, e.g. 2ns.")
@click.pass_obj
@guarded
def cmd_run(ctx: Context, netlist, probes, dt, tstop):
    """Simulate a netlist file and write waveform CSV and JSON."""
    text = read_text(ctx, netlist)
    net = parse_netlist(text)
    config = ctx.sim_config(
        dt=quantity(dt, "s", "--dt") if dt else None,
        t_stop=quantity(tstop, "s", "--tstop") if tstop else None,
    )
    sim = Simulator(net)
    if not probes:
        probes = [f"V({n})" for n in sim.netlist.nodes() if n != "0"]
    start(ctx, "run", {"netlist": netlist, "probes": list(probes), "dt": config.dt, "t_stop": config.t_stop})
    try:
        wave = sim.run(config, list(probes)).waveform
    except ValueError as e:
        raise CliError(str(e), EXIT_PARSE) from None
    except NewtonDivergence as e:
        if e.partial is not None:
            write(ctx, "waveform.partial.csv", e.partial.to_csv())
            write(ctx, "waveform.partial.json", e.partial.to_json(_config_dict(config)))
        raise
    write(ctx, "waveform.csv", wave.to_csv())
    write(ctx, "waveform.json", wave.to_json(_config_dict(config)))
    click.echo(f"{len(wave)} samples, {len(wave.labels)} probes -> {ctx.out}")


def _config_dict(config: SimConfig) -> dict:
    d = asdict(config)
    d["initial_conditions"] = dict(config.initial_conditions)
    return d


def _bench_options(fn):
    fn = click.option("--cut", default=None, help="buffer, and, or, majority, xor.")(fn)
    fn = click.option("--bench", "bench_path", default=None, type=click.Path(dir_okay=False), help="Benchmark description JSON.")(fn)
    fn = click.option("--params", "params_path", default=None, type=click.Path(dir_okay=False), help="Cell parameter JSON.")(fn)
    fn = click.option("--f", "f_text", default="5GHz", show_default=True, help="Clock frequency.")(fn)
    fn = click.option("--prbs", default=16, show_default=True, help="PRBS bits appended to the exhaustive patterns.")(fn)
    fn = click.option("--figures", is_flag=True, help="Also write SVG plots.")(fn)
    return fn


def _resolve_bench(ctx: Context, cut, bench_path, params_path, prbs, default_cut="buffer"):
    clock_over = ctx.clock_overrides()
    if bench_path is not None:
        spec, bclock, bparams = load_bench(ctx, bench_path)
        clock_over.update(bclock)
        params_path = params_path or bparams
    else:
        try:
            kind_from_name(cut or default_cut)
        except ValueError as e:
            raise click.BadParameter(str(e), param_hint="--cut") from None
        spec = BenchSpec(cut=(cut or default_cut).lower())
    spec = replace(spec, prbs=prbs, seed=ctx.seed)
    return spec, clock_over, load_params(ctx, params_path)


def _T_values(T_text, clock_over, default="10ps"):
    if T_text is not None:
        return quantity_list(T_text, "s", "--T")
    if "T" in clock_over:
        return [clock_over["T"]]
    return quantity_list(default, "s", "--T")


@main.command("margins")
@_bench_options
@click.option("--T", "T_text", default=None, help="Comma-separated stage delays, e.g. 10ps,20ps.")
@click.option("--span", default="10dB", show_default=True, help="Search half-window around the nominal power.")
@click.option("--resolution", default="0.1dB", show_default=True)
@click.pass_obj
@guarded
def cmd_margins(ctx: Context, cut, bench_path, params_path, f_text, prbs, figures, T_text, span, resolution):
    """Operating margin in excitation power for each T."""
    from .analysis import export

    spec, over, params = _resolve_bench(ctx, cut, bench_path, params_path, prbs)
    f = over.pop("f", None) or quantity(f_text, "Hz", "--f")
    Ts = _T_values(T_text, over)
    over.pop("T", None)
    span_db = quantity(span, "dB", "--span")
    res_db = quantity(resolution, "dB", "--resolution")
    config = ctx.sim_config()
    start(ctx, "margins", {"bench": spec.label, "f": f, "T": Ts, "span_db": span_db, "resolution_db": res_db, "prbs": prbs, "mode": ctx.mode})
    cells = [(spec, make_clock(params, f, T, over), params, span_db, res_db, config, ctx.mode) for T in Ts]
    results = _grid(ctx, _margin_cell, cells)
    write(ctx, "margins.csv", export.margins_csv(results))
    write(ctx, "margins.json", export.margins_json(results))
    if figures:
        write(ctx, "margins.svg", export.svg_lines(
            {"p_high": [(r.T * 1e12, r.p_high) for r in results], "p_low": [(r.T * 1e12, r.p_low) for r in results]},
            "T [ps]", "Px [dBm]", f"{spec.label} margins, {f / 1e9:g} GHz"))
    for r in results:
        state = f"{r.p_low:.2f} .. {r.p_high:.2f} dBm, width {r.width_db:.2f} dB" if r.passed else "no passing point"
        click.echo(f"T = {r.T * 1e12:g} ps: {state}")


@main.command("energy")
@_bench_options
@click.option("--T", "T_text", default="2ps,10ps,20ps,30ps,40ps,50ps", show_default=True)
@click.option("--scope", type=click.Choice(["cut", "all"]), default="cut", show_default=True)
@click.pass_obj
@guarded
def cmd_energy(ctx: Context, cut, bench_path, params_path, f_text, prbs, figures, T_text, scope):
    """Energy per operation versus T."""
    from .analysis import export
    from .analysis.energy import EnergySweepResult

    spec, over, params = _resolve_bench(ctx, cut, bench_path, params_path, prbs)
    f = over.pop("f", None) or quantity(f_text, "Hz", "--f")
    over.pop("T", None)
    Ts = quantity_list(T_text, "s", "--T")
    config = ctx.sim_config()
    start(ctx, "energy", {"bench": spec.label, "f": f, "T": Ts, "scope": scope, "prbs": prbs, "mode": ctx.mode})
    cells = [(spec, make_clock(params, f, T, over), params, scope, config, ctx.mode) for T in Ts]
    result = EnergySweepResult(_grid(ctx, _energy_cell, cells))
    write(ctx, "energy.csv", export.energy_csv(result))
    write(ctx, "energy.json", export.energy_json(result))
    if figures:
        write(ctx, "energy.svg", export.svg_lines(
            {spec.label: [(e.T * 1e12, e.energy * 1e21) for e in result.entries]}, "T [ps]", "E [zJ]",
            f"energy per operation, {f / 1e9:g} GHz"))
    for e in result.entries:
        click.echo(f"T = {e.T * 1e12:g} ps: E = {e.energy * 1e21:.3f} zJ")


@main.command("skipscan")
@click.option("--T", "T_text", default="10ps,20ps", show_default=True)
@click.option("--k", "k_text", default="0..4", show_default=True)
@click.option("--f", "f_text", default="5GHz", show_default=True)
@click.option("--params", "params_path", default=None, type=click.Path(dir_okay=False))
@click.option("--prbs", default=16, show_default=True)
@click.option("--tmax", "tmax_text", default=None, help="Tmax for the predicted feasibility; 'auto' estimates it.")
@click.option("--margin", is_flag=True, help="Also measure the margin of passing cells.")
@click.option("--figures", is_flag=True)
@click.pass_obj
@guarded
def cmd_skipscan(ctx: Context, T_text, k_text, f_text, params_path, prbs, tmax_text, margin, figures):
    """Skip-chain feasibility matrix over (T, k)."""
    from .analysis import export
    from .analysis.skip import skip_scan, tmax_estimate

    params = load_params(ctx, params_path)
    over = ctx.clock_overrides()
    f = over.pop("f", None) or quantity(f_text, "Hz", "--f")
    over.pop("T", None)
    Ts = quantity_list(T_text, "s", "--T")
    ks = int_range(k_text)
    config = ctx.sim_config()
    clock = make_clock(params, f, Ts[0], over)
    start(ctx, "skipscan", {"f": f, "T": Ts, "k": ks, "prbs": prbs, "tmax": tmax_text, "margin": margin, "mode": ctx.mode})
    tmax = None
    if tmax_text == "auto":
        tmax = tmax_estimate(Buffer(), clock, params, config=config, mode=ctx.mode).tmax
    elif tmax_text is not None:
        tmax = quantity(tmax_text, "s", "--tmax")
    m = skip_scan(Ts, ks, clock, params, tmax, margin, prbs, config, ctx.mode, ctx.jobs)
    write(ctx, "skipscan.csv", export.skip_csv(m))
    write(ctx, "skipscan.json", export.skip_json(m))
    write(ctx, "skipscan.txt", export.skip_grid(m))
    if figures:
        write(ctx, "skipscan.svg", export.svg_heatmap(m))
    click.echo(export.skip_grid(m), nl=False)


@main.command("tmax")
@click.option("--cut", default="buffer", show_default=True, help="Receiving gate kind (single input).")
@click.option("--f", "f_text", default="5GHz", show_default=True, help="Comma-separated frequencies.")
@click.option("--resolution", default="1ps", show_default=True)
@click.option("--params", "params_path", default=None, type=click.Path(dir_okay=False))
@click.pass_obj
@guarded
def cmd_tmax(ctx: Context, cut, f_text, resolution, params_path):
    """Maximum allowable single-hop latency by bisection."""
    from .analysis.export import _csv, dumps

    params = load_params(ctx, params_path)
    over = ctx.clock_overrides()
    over.pop("f", None)
    over.pop("T", None)
    fs = quantity_list(f_text, "Hz", "--f")
    res = quantity(resolution, "s", "--resolution")
    try:
        kind_from_name(cut)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--cut") from None
    config = ctx.sim_config()
    start(ctx, "tmax", {"cut": cut, "f": fs, "resolution": res, "mode": ctx.mode})
    cells = [(cut, make_clock(params, f, 10e-12, over), params, res, config, ctx.mode) for f in fs]
    results = _grid(ctx, _tmax_cell, cells)
    write(ctx, "tmax.csv", _csv(["f_hz", "tmax_s", "resolution_s", "bracketed"], [(r.f, r.tmax, r.resolution, int(r.bracketed)) for r in results]))
    write(ctx, "tmax.json", dumps([{"f": r.f, "tmax": r.tmax, "resolution": r.resolution, "bracketed": r.bracketed} for r in results]))
    for r in results:
        click.echo(f"f = {r.f / 1e9:g} GHz: Tmax = {r.tmax * 1e12:g} ps")


@main.command("fmax")
@click.option("--k", "k_text", default="3,4", show_default=True)
@click.option("--T", "T_text", default="20ps", show_default=True)
@click.option("--fmin", default="1GHz", show_default=True)
@click.option("--fmax", "fmax_text", default="8GHz", show_default=True)
@click.option("--resolution", default="50MHz", show_default=True)
@click.option("--params", "params_path", default=None, type=click.Path(dir_okay=False))
@click.option("--prbs", default=16, show_default=True)
@click.pass_obj
@guarded
def cmd_fmax(ctx: Context, k_text, T_text, fmin, fmax_text, resolution, params_path, prbs):
    """Highest passing clock frequency of k-skip chains."""
    from .analysis.export import _csv, dumps

    params = load_params(ctx, params_path)
    over = ctx.clock_overrides()
    over.pop("f", None)
    over.pop("T", None)
    ks = int_range(k_text)
    T = quantity(T_text, "s", "--T")
    lo, hi = quantity(fmin, "Hz", "--fmin"), quantity(fmax_text, "Hz", "--fmax")
    res = quantity(resolution, "Hz", "--resolution")
    config = ctx.sim_config()
    start(ctx, "fmax", {"k": ks, "T": T, "fmin": lo, "fmax": hi, "resolution": res, "prbs": prbs, "mode": ctx.mode})
    cells = [(k, make_clock(params, lo, T, over), params, lo, hi, res, prbs, config, ctx.mode) for k in ks]
    results = _grid(ctx, _fmax_cell, cells)
    write(ctx, "fmax.csv", _csv(["k", "T_s", "f_max_hz", "resolution_hz", "bracketed"], [(r.k, r.T, r.f_max, r.resolution, int(r.bracketed)) for r in results]))
    write(ctx, "fmax.json", dumps([{"k": r.k, "T": r.T, "f_max": r.f_max, "resolution": r.resolution, "bracketed": r.bracketed} for r in results]))
    for r in results:
        click.echo(f"k = {r.k}: f_max = {r.f_max / 1e9:g} GHz")


@main.command("edp")
@click.option("--builtin", is_flag=True, help="Include the reference rows.")
@click.option("--entry", "entries", multiple=True, help="label:energy:delay, e.g. mine:2.8zJ:10ps.")
@click.pass_obj
@guarded
def cmd_edp(ctx: Context, builtin, entries):
    """Energy-delay product table."""
    from .analysis import export
    from .analysis.edp import edp, edp_table

    rows = []
    for e in entries:
        parts = e.rsplit(":", 2)
        if len(parts) != 3:
            raise click.BadParameter(f"{e!r}: expected label:energy:delay", param_hint="--entry")
        rows.append((parts[0], quantity(parts[1], "J", "--entry"), quantity(parts[2], "s", "--entry")))
    if not rows and not builtin:
        raise click.UsageError("give --builtin and/or --entry")
    start(ctx, "edp", {"builtin": builtin, "entries": list(entries)})
    try:
        table = edp(rows, builtin)
    except ValueError as e:
        raise CliError(str(e), EXIT_PARSE) from None
    write(ctx, "edp.csv", export.edp_csv(table))
    write(ctx, "edp.json", export.edp_json(table))
    write(ctx, "edp.txt", edp_table(table))
    click.echo(edp_table(table), nl=False)


@main.group("cells")
def cells_group():
    """Cell parameter utilities."""


@cells_group.command("dump-defaults")
@click.option("--calibrate", "do_cal", is_flag=True, help="Run the flux calibration first.")
@click.option("--output", "-o", default=None, type=click.Path(dir_okay=False), help="Write here instead of stdout.")
@click.pass_obj
@guarded
def cmd_dump_defaults(ctx: Context, do_cal, output):
    """Print the default cell parameter JSON."""
    p = AqfpCellParams()
    if do_cal:
        try:
            p, _ = calibrate(p)
        except CalibrationFailed as e:
            raise CliError(str(e), EXIT_CONVERGENCE) from None
    text = p.to_json() + "\n"
    if output is None:
        click.echo(text, nl=False)
    else:
        try:
            Path(output).write_text(text)
        except OSError as e:
            raise CliError(f"cannot write {output}: {e}", EXIT_IO) from None


@main.group("bench")
def bench_group():
    """Benchmark circuits."""


@bench_group.command("emit")
@_bench_options
@click.option("--T", "T_text", default=None, help="Stage delay, e.g. 10ps.")
@click.option("--k", "chain_k", type=int, default=None, help="Emit a k-skip chain instead of a CUT harness.")
@click.option("--output", "-o", default=None, type=click.Path(dir_okay=False), help="Write here instead of stdout.")
@click.pass_obj
@guarded
def cmd_bench_emit(ctx: Context, cut, bench_path, params_path, f_text, prbs, figures, T_text, chain_k, output):
    """Write a benchmark netlist (.jnt)."""
    spec, over, params = _resolve_bench(ctx, cut, bench_path, params_path, prbs)
    if chain_k is not None:
        spec = replace(spec, cut=None, chain_k=chain_k)
    f = over.pop("f", None) or quantity(f_text, "Hz", "--f")
    T = _T_values(T_text, over)[0]
    over.pop("T", None)
    bench = spec.build(make_clock(params, f, T, over), params)
    c = bench.build(ctx.mode)
    net = replace(c.netlist, title=f"{spec.label} benchmark f={f:g} T={T:g}")
    text = serialize(net)
    if output is None:
        click.echo(text, nl=False)
    else:
        try:
            Path(output).write_text(text)
        except OSError as e:
            raise CliError(f"cannot write {output}: {e}", EXIT_IO) from None


if __name__ == "__main__":  # pragma: no cover
    main()
