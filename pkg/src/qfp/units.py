"""Physical constants and engineering-notation number handling."""

from __future__ import annotations

import math
import re
from decimal import Decimal, InvalidOperation

PHI0 = 2.067833848e-15  # Wb
"""Magnetic flux quantum h/2e."""

SUFFIXES = {
    "f": -15,
    "p": -12,
    "n": -9,
    "u": -6,
    "m": -3,
    "k": 3,
    "meg": 6,
    "g": 9,
}
# accepted only in CLI quantities such as "2.8zJ"
_SMALL_PREFIXES = {"a": -18, "z": -21}
_EXP_TO_SUFFIX = {v: k for k, v in SUFFIXES.items()}
_EXP_TO_SUFFIX[0] = ""

_NUMBER = re.compile(
    r"^(?P<mant>[+-]?(?:\d+\.?\d*|\.\d+)(?:e[+-]?\d+)?)(?P<suf>meg|[fpnumkg])?$",
    re.IGNORECASE,
)


def parse_number(text: str) -> float:
    """Parse ``text`` such as ``"0.15p"``, ``"2.8m"``, ``"1e-12"``, ``"5meg"``.

    Scaling is done in decimal so ``parse_number(format_eng(x)) == x`` exactly.
    Raises ValueError on anything else.
    """
    m = _NUMBER.match(text.strip())
    if m is None:
        raise ValueError(f"not a number: {text!r}")
    try:
        d = Decimal(m.group("mant"))
    except InvalidOperation as exc:  # pragma: no cover - regex guards this
        raise ValueError(f"not a number: {text!r}") from exc
    suf = m.group("suf")
    if suf:
        d = d.scaleb(SUFFIXES[suf.lower()])
    value = float(d)
    if not math.isfinite(value):
        raise ValueError(f"number out of range: {text!r}")
    return value


def format_eng(value: float) -> str:
    """Shortest round-trip engineering notation, e.g. ``1.5e-12 -> "1.5p"``."""
    if value == 0:
        return "0"
    if not math.isfinite(value):
        raise ValueError(f"cannot format {value!r}")
    d = Decimal(repr(float(value)))
    exp3 = 3 * math.floor(d.adjusted() / 3)
    if exp3 not in _EXP_TO_SUFFIX:
        return repr(float(value))
    mant = d.scaleb(-exp3).normalize()
    text = format(mant, "f")
    return text + _EXP_TO_SUFFIX[exp3]


def parse_quantity(text: str, unit: str) -> float:
    """Parse a CLI quantity that must carry ``unit`` (e.g. ``"10ps"``, ``"5GHz"``).

    Bare numbers are rejected so that pico/femto slips cannot happen silently.
    """
    t = text.strip()
    if not t.lower().endswith(unit.lower()):
        raise ValueError(f"{text!r}: expected a value with unit {unit!r}")
    body = "".join(t[: len(t) - len(unit)].split())
    if not body:
        raise ValueError(f"{text!r}: missing number")
    # on the CLI an upper-case "M" is mega, as in "MHz"
    if body[-1:] == "M":
        body = body[:-1] + "meg"
    if body[-1:] in _SMALL_PREFIXES:
        return float(Decimal(str(parse_number(body[:-1]))).scaleb(_SMALL_PREFIXES[body[-1]]))
    return parse_number(body)
