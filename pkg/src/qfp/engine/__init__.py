"""Transient circuit simulation."""

from .energy import (
    BalanceReport,
    MIDPOINT,
    TRAPEZOID,
    EnergyReport,
    WindowOutsideRun,
    cumulative_dissipation,
    energy_accounting,
    energy_balance,
    stored_energy,
)
from .mna import MnaSystem, SingularTopology, assemble
from .transient import (
    FULL_LINE,
    IDEAL_DELAY,
    BranchCurrent,
    DevicePower,
    EngineError,
    HistoryUnderflow,
    JunctionPhase,
    NewtonDivergence,
    NodeVoltage,
    RunRecord,
    SimConfig,
    Simulator,
    SystemState,
    parse_probe,
    run_transient,
    step,
)
from .waveform import Waveform

__all__ = [
    "BalanceReport", "BranchCurrent", "DevicePower", "EngineError", "EnergyReport", "FULL_LINE", "HistoryUnderflow",
    "IDEAL_DELAY", "MIDPOINT", "TRAPEZOID", "JunctionPhase", "MnaSystem", "NewtonDivergence", "NodeVoltage", "RunRecord",
    "SimConfig", "Simulator", "SingularTopology", "SystemState", "Waveform", "WindowOutsideRun",
    "assemble", "cumulative_dissipation", "energy_accounting", "energy_balance", "parse_probe",
    "run_transient", "step", "stored_energy",
]
