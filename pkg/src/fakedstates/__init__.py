"""Faked-states attack simulator for QKD receivers with detector efficiency
mismatch: BB84, SARG04, phase-time, DPSK, and entanglement-based protocols,
each with closed-form error rates, exact enumeration oracles, and seeded
Monte Carlo."""

from .detmodel import (
    ConstantCurve,
    ControlValue,
    DetectorPair,
    EfficiencyCurve,
    GaussianCurve,
    MismatchSpec,
    TableCurve,
    choose_control_values,
    efficiency_at,
    parse_curve,
)
from .stats import AttackStats, ExactStats, TimeShiftStats

__version__ = "0.1.0"

__all__ = [
    "AttackStats",
    "ConstantCurve",
    "ControlValue",
    "DetectorPair",
    "EfficiencyCurve",
    "ExactStats",
    "GaussianCurve",
    "MismatchSpec",
    "TableCurve",
    "TimeShiftStats",
    "choose_control_values",
    "efficiency_at",
    "parse_curve",
    "__version__",
]
