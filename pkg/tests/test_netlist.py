import string
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from qfp.netlist import (
    ArityMismatch,
    BadNumber,
    BitPattern,
    CurrentSource,
    DanglingMutualReference,
    Dc,
    DuplicateName,
    Inductor,
    JjModel,
    Junction,
    MutualCoupling,
    Netlist,
    NetlistError,
    Pwl,
    RecursionDetected,
    Resistor,
    Sine,
    SubcircuitDef,
    SubcktInstance,
    TransmissionLine,
    UnbalancedSubckt,
    UnknownDeviceKind,
    VoltageSource,
    Capacitor,
    flatten,
    parse_netlist,
    serialize,
    validate,
)


def test_single_resistor():
    n = parse_netlist("R1 1 0 50")
    assert n.devices == (Resistor("r1", "1", "0", 50.0),)
    assert n.nodes() == ["0", "1"]


def test_junction_with_model():
    n = parse_netlist(".model jmod jj(Ic=50u, C=0.15p, Rsg=100, Rn=1.6, Vg=2.8m)\nB1 2 0 jmod")
    assert n.device("b1") == Junction("b1", "2", "0", "jmod")
    assert n.models["jmod"] == JjModel("jmod", 50e-6, 0.15e-12, 100.0, 1.6, 2.8e-3)


def test_dangling_mutual_names_line():
    with pytest.raises(DanglingMutualReference) as e:
        parse_netlist("L1 1 0 1p\nK1 L1 L9 0.3")
    assert e.value.line == 2


@pytest.mark.parametrize(
    "text,err,line",
    [
        ("Q1 1 0 1", UnknownDeviceKind, 1),
        ("R1 1 0 1\nR1 2 0 1", DuplicateName, 2),
        (".subckt a 1\nR1 1 0 1", UnbalancedSubckt, 1),
        (".ends", UnbalancedSubckt, 1),
        ("R1 1 0 1\nR2 1 0 5q", BadNumber, 2),
    ],
)
def test_errors_carry_position(text, err, line):
    with pytest.raises(err) as e:
        parse_netlist(text)
    assert e.value.line == line
    assert e.value.col is not None


def test_zero_delay_line_rejected():
    with pytest.raises(NetlistError):
        parse_netlist("T1 1 0 2 0 z0=50 td=0")


def test_waveforms_and_continuation():
    n = parse_netlist(
        "I1 0 1 sin(0 1m 5g 10p)\n"
        "I2 0 1 pwl(0 0 1p 1m\n+ 2p 0)\n"
        "V1 2 0 bits(1011 100p 5p 1 -1)\n"
        "I3 0 1 dc 1m ramp=400p\n"
        "R1 1 0 1\nR2 2 0 1"
    )
    assert n.device("i1").wave == Sine(0.0, 1e-3, 5e9, 10e-12)
    assert n.device("i2").wave == Pwl(((0.0, 0.0), (1e-12, 1e-3), (2e-12, 0.0)))
    assert n.device("v1").wave == BitPattern("1011", 100e-12, 5e-12, 1.0, -1.0)
    assert n.device("i3").wave == Dc(1e-3, 400e-12)


def test_case_insensitive_and_comments():
    n = parse_netlist("* comment\nR1 A 0 1K\n.END\nR2 garbage after end")
    assert n.devices == (Resistor("r1", "a", "0", 1000.0),)


def test_serialize_empty():
    assert serialize(Netlist()) == ".title\n.end\n"


def test_serialize_sine():
    n = Netlist("s", (CurrentSource("i1", "0", "1", Sine(0.0, 1e-3, 5e9, 0.0)), Resistor("r1", "1", "0", 50.0)))
    assert "i1 0 1 sin(0 1m 5g 0)" in serialize(n).splitlines()


SUB = """
.subckt cell in out
R1 in mid 1
L1 mid out 1p
C1 out 0 1f
.ends cell
X1 cell a b
X2 cell b c
R9 c 0 50
"""


def test_flatten_counts():
    n = parse_netlist(SUB)
    f = flatten(n)
    assert len(f.devices) == 7
    assert not any(isinstance(d, SubcktInstance) for d in f.devices)
    # internal node renamed per instance, ports bound
    assert f.device("r1|x1").nodes == ("a", "mid|x1")
    assert f.device("l1|x2").nodes == ("mid|x2", "c")


def test_flatten_identity():
    n = parse_netlist("R1 1 0 1\nL1 1 0 1p")
    assert flatten(n) == n


def test_flatten_arity_and_recursion():
    with pytest.raises(ArityMismatch):
        flatten(parse_netlist(".subckt s a b c\nR1 a b 1\n.ends\nX1 s 1 2"))
    with pytest.raises(RecursionDetected):
        flatten(parse_netlist(".subckt s a\nX1 s a\n.ends\nX9 s 1"))


def test_flatten_preserves_kinds_and_incidences():
    n = parse_netlist(SUB)
    f = flatten(n)
    sub = n.subckts["cell"]
    expect = Counter(type(d) for d in n.devices if not isinstance(d, SubcktInstance))
    for _ in range(2):
        expect.update(type(d) for d in sub.devices)
    assert Counter(type(d) for d in f.devices) == expect
    incid = sum(len(d.nodes) for d in f.devices)
    assert incid == 2 * sum(len(d.nodes) for d in sub.devices) + 2


def test_validate_programmatic():
    with pytest.raises(DanglingMutualReference):
        validate(Netlist("", (Inductor("l1", "1", "0", 1e-12), MutualCoupling("k1", "l1", "l2", 0.5))))
    with pytest.raises(UnknownDeviceKind):
        validate(Netlist("", (Resistor("x1", "1", "0", 1.0),)))


# --------------------------------------------------------------------------
# generated netlists

_nodes = st.sampled_from(["0", "1", "2", "3", "n4", "a_b"])
_pos = st.floats(min_value=1e-18, max_value=1e6, allow_nan=False, allow_infinity=False)
_val = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)


@st.composite
def _wave(draw):
    kind = draw(st.integers(0, 3))
    if kind == 0:
        return Dc(draw(_val), draw(st.sampled_from([0.0, 1e-10])))
    if kind == 1:
        return Sine(draw(_val), draw(_val), draw(_pos), draw(st.sampled_from([0.0, 1e-11])))
    if kind == 2:
        ts = sorted(set(draw(st.lists(st.floats(0, 1e-9, allow_nan=False), min_size=1, max_size=5))))
        return Pwl(tuple((t, draw(_val)) for t in ts))
    bits = draw(st.text("01", min_size=1, max_size=8))
    return BitPattern(bits, 100e-12, draw(st.sampled_from([0.0, 5e-12, 10e-12])), draw(_val), draw(_val))


@st.composite
def netlists(draw):
    n_dev = draw(st.integers(0, 12))
    devs = []
    inductors = []
    models = {"jm": JjModel("jm", 50e-6, 0.15e-12, 100.0, 34.0, 2.8e-3)}
    for i in range(n_dev):
        kind = draw(st.sampled_from("rlcbtiv"))
        a, b = draw(_nodes), draw(_nodes)
        name = f"{kind}{i}"
        if kind == "r":
            devs.append(Resistor(name, a, b, draw(_pos)))
        elif kind == "l":
            devs.append(Inductor(name, a, b, draw(_pos)))
            inductors.append(name)
        elif kind == "c":
            devs.append(Capacitor(name, a, b, draw(_pos)))
        elif kind == "b":
            devs.append(Junction(name, a, b, "jm", draw(st.sampled_from([1.0, 1.5]))))
        elif kind == "t":
            devs.append(TransmissionLine(name, a, b, draw(_nodes), draw(_nodes), draw(_pos), draw(_pos)))
        else:
            cls = CurrentSource if kind == "i" else VoltageSource
            devs.append(cls(name, a, b, draw(_wave())))
    if len(inductors) >= 2:
        l1, l2 = draw(st.lists(st.sampled_from(inductors), min_size=2, max_size=2, unique=True))
        k = draw(st.floats(-0.99, 0.99, allow_nan=False))
        devs.append(MutualCoupling("k99", l1, l2, k))
    subckts = {}
    if draw(st.booleans()):
        subckts["sub"] = SubcircuitDef("sub", ("p", "q"), (Resistor("r1", "p", "x", 1.0), Inductor("l1", "x", "q", 2e-12)))
        devs.append(SubcktInstance("x1", "sub", ("1", "2")))
    title = draw(st.text(string.ascii_letters + string.digits + " _=", max_size=20)).strip()
    return Netlist(title, tuple(devs), subckts, models)


@settings(max_examples=1000)
@given(netlists())
def test_round_trip_property(n):
    text = serialize(n)
    back = parse_netlist(text)
    assert back == n
    assert serialize(back) == text


@settings(max_examples=300)
@given(st.text(alphabet=string.printable, max_size=200))
def test_fuzz_never_panics(text):
    try:
        parse_netlist(text)
    except NetlistError as e:
        assert str(e)
