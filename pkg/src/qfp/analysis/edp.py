"""Energy-delay product comparison."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable


@dataclass(frozen=True)
class EdpEntry:
    label: str
    energy: float  # J per clock cycle
    delay: float  # s per gate

    def __post_init__(self):
        if not (self.energy > 0 and self.delay > 0):
            raise ValueError(f"{self.label}: energy and delay must be > 0")

    @property
    def edp(self) -> float:
        return self.energy * self.delay


# reference rows: (label, energy per cycle, gate delay)
LITERATURE = (
    ("aqfp delay-line clocking", 2.8e-21, 10e-12),
    ("aqfp four-phase clocking", 2.8e-21, 50e-12),
    ("rsfq", 17e-18, 4e-12),
)


def edp(entries: Iterable[tuple[str, float, float]], builtin: bool = False) -> list[EdpEntry]:
    """EDP rows sorted ascending by product (ties keep input order)."""
    rows = [EdpEntry(*e) for e in entries]
    if builtin:
        rows += [EdpEntry(*e) for e in LITERATURE]
    return sorted(rows, key=lambda r: r.edp)


def edp_table(rows: Iterable[EdpEntry]) -> str:
    lines = [f"{'label':<28} {'energy [J]':>12} {'delay [s]':>12} {'EDP [J*s]':>12}"]
    for r in rows:
        lines.append(f"{r.label:<28} {r.energy:>12.4g} {r.delay:>12.4g} {r.edp:>12.4g}")
    return "\n".join(lines) + "\n"
