"""Two-level states and measurements on the Poincare-sphere equator.

All polarization-style protocol states live on the equator, where antipodal
points are orthogonal and the overlap between states separated by an angle
delta is (1 + cos delta) / 2. The two circular polarizations sit at the poles
and overlap every equator state with probability 1/2.

Angle conventions used by the protocol modules (degrees on the equator):

* BB84 / SARG04 states: 0_a = 0, 1_a = 90, 0_b = 180, 1_b = 270 (the BB84
  Z basis is {0, 180}, X is {90, 270}).
* Ekert measurement axes: a1 = 0, a2 = 45, a3 = 90, b1 = 45, b2 = 90,
  b3 = 135; the +1 eigenstate sits at the axis angle, -1 at axis + 180.

The absolute orientation is a convention; only relative angles matter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .detmodel import ControlValue, DetectorPair


@dataclass(frozen=True)
class EquatorState:
    """Equator point, angle in degrees normalized to [0, 360)."""

    angle: float

    def __post_init__(self):
        object.__setattr__(self, "angle", self.angle % 360.0)


@dataclass(frozen=True)
class PoleState:
    """Circular polarization; overlaps every equator state with 1/2."""

    pole: str = "north"

    def __post_init__(self):
        if self.pole not in ("north", "south"):
            raise ValueError(f"pole must be 'north' or 'south', got {self.pole!r}")


State = Union[EquatorState, PoleState]


@dataclass(frozen=True)
class MeasurementBasis:
    """Measurement axis; the +outcome eigenstate sits at ``axis`` degrees."""

    axis: float
    labels: tuple = ("+1", "-1")

    @property
    def plus_angle(self) -> float:
        return self.axis % 360.0

    @property
    def minus_angle(self) -> float:
        return (self.axis + 180.0) % 360.0


def overlap_probability(state: State, eigenstate_angle: float) -> float:
    """Born-rule overlap of a state with the eigenstate at the given angle."""
    if isinstance(state, PoleState):
        return 0.5
    delta = math.radians(state.angle - eigenstate_angle)
    return 0.5 * (1.0 + math.cos(delta))


def exact_overlap(delta_degrees: int) -> Fraction:
    """Exact overlap for angle differences that are multiples of 90 degrees.

    The enumeration oracles only ever need overlaps of 0, 1/2, or 1; keeping
    them rational keeps the oracles exact.
    """
    if delta_degrees % 90 != 0:
        raise ValueError(f"exact overlap needs a multiple of 90, got {delta_degrees}")
    c = {0: 1, 90: 0, 180: -1, 270: 0}[delta_degrees % 360]
    return Fraction(1 + c, 2)


def measure(
    state: State,
    basis: MeasurementBasis,
    detectors: DetectorPair,
    t: ControlValue,
    rng,
) -> Optional[int]:
    """Single-photon measurement: project, then let the detector fire.

    Returns +1 or -1 if the matching detector clicks, else None (no click).
    Detector 0 registers the +1 outcome, detector 1 the -1 outcome.
    """
    p_plus = overlap_probability(state, basis.plus_angle) * detectors.d0.at(t)
    p_minus = overlap_probability(state, basis.minus_angle) * detectors.d1.at(t)
    u = rng.random()
    if u < p_plus:
        return +1
    if u < p_plus + p_minus:
        return -1
    return None
