"""Detector efficiency curves, control values, and Eve's operating points.

Each of Bob's two single-photon detectors has an efficiency that depends on an
externally controllable parameter t (pulse timing, wavelength, ...). Eve picks
two operating points: t0 suppresses the detector assigned to bit 1, t1
suppresses the detector assigned to bit 0. The four efficiencies evaluated at
those two points form a :class:`MismatchSpec`, the only detector input the
protocol modules need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

from .errors import CurveDomainError, NoSignalError

#: Abstract control coordinate (timing / wavelength offset); any finite float.
ControlValue = float

#: Efficiencies may be floats or exact rationals (for the enumeration oracles).
Efficiency = Union[int, float, Fraction]


class EfficiencyCurve:
    """Maps a control value to a detection efficiency in [0, 1]."""

    def at(self, t: ControlValue) -> float:
        raise NotImplementedError

    def __call__(self, t: ControlValue) -> float:
        return self.at(t)


@dataclass(frozen=True)
class ConstantCurve(EfficiencyCurve):
    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"constant efficiency {self.value} outside [0, 1]")

    def at(self, t: ControlValue) -> float:
        return self.value


@dataclass(frozen=True)
class GaussianCurve(EfficiencyCurve):
    """Gaussian bump: peak * exp(-(t - center)^2 / (2 width^2))."""

    center: float
    width: float
    peak: float

    def __post_init__(self):
        if self.width <= 0.0:
            raise ValueError("gaussian width must be positive")
        if not 0.0 <= self.peak <= 1.0:
            raise ValueError(f"gaussian peak {self.peak} outside [0, 1]")

    def at(self, t: ControlValue) -> float:
        z = (t - self.center) / self.width
        return self.peak * math.exp(-0.5 * z * z)


@dataclass(frozen=True)
class TableCurve(EfficiencyCurve):
    """Sampled efficiencies with linear interpolation; no extrapolation."""

    ts: tuple
    values: tuple

    def __post_init__(self):
        if len(self.ts) != len(self.values) or len(self.ts) < 2:
            raise ValueError("table needs >= 2 (t, value) samples")
        if any(b <= a for a, b in zip(self.ts, self.ts[1:])):
            raise ValueError("table control values must be strictly increasing")
        if any(not 0.0 <= v <= 1.0 for v in self.values):
            raise ValueError("table efficiencies must lie in [0, 1]")

    def at(self, t: ControlValue) -> float:
        if t < self.ts[0] or t > self.ts[-1]:
            raise CurveDomainError(
                f"t={t} outside table domain [{self.ts[0]}, {self.ts[-1]}]"
            )
        # Find the right interval; tables are short, linear scan is fine.
        for i in range(len(self.ts) - 1):
            if t <= self.ts[i + 1]:
                t0, t1 = self.ts[i], self.ts[i + 1]
                v0, v1 = self.values[i], self.values[i + 1]
                if t == t0:
                    return float(v0)
                frac = (t - t0) / (t1 - t0)
                return float(v0 + frac * (v1 - v0))
        return float(self.values[-1])


def efficiency_at(curve: EfficiencyCurve, t: ControlValue) -> float:
    """Evaluate a curve; out-of-domain t on a table raises CurveDomainError."""
    return curve.at(t)


@dataclass(frozen=True)
class DetectorPair:
    """Efficiency curves for the two detectors plus their label convention."""

    d0: EfficiencyCurve
    d1: EfficiencyCurve
    labels: tuple = ("0", "1")

    def at(self, t: ControlValue) -> tuple:
        return (self.d0.at(t), self.d1.at(t))


@dataclass(frozen=True)
class MismatchSpec:
    """The four efficiencies at Eve's two operating points.

    ``eta_0_t0`` is detector 0's efficiency at t0 and so on. The convention
    throughout: t0 blinds detector 1, t1 blinds detector 0, so the "cross"
    terms ``eta_0_t1`` and ``eta_1_t0`` vanish under a total mismatch.
    Fields accept exact rationals so the enumeration oracles stay exact.
    """

    eta_0_t0: Efficiency
    eta_0_t1: Efficiency
    eta_1_t0: Efficiency
    eta_1_t1: Efficiency

    def __post_init__(self):
        for name in ("eta_0_t0", "eta_0_t1", "eta_1_t0", "eta_1_t1"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name}={v} outside [0, 1]")

    @classmethod
    def total(cls, eta_0_t0: Efficiency = 1, eta_1_t1: Efficiency = 1) -> "MismatchSpec":
        return cls(eta_0_t0, 0, 0, eta_1_t1)

    @classmethod
    def symmetric(
        cls,
        eta: Efficiency,
        eta_0_t0: Efficiency = 1,
        eta_1_t1: Efficiency = 1,
    ) -> "MismatchSpec":
        """Symmetric curves: eta_0(t1)/eta_1(t1) = eta_1(t0)/eta_0(t0) = eta."""
        return cls(eta_0_t0, eta * eta_1_t1, eta * eta_0_t0, eta_1_t1)

    @property
    def is_total(self) -> bool:
        return self.eta_0_t1 == 0 and self.eta_1_t0 == 0

    @property
    def is_symmetric(self) -> bool:
        return self.eta_0_t1 * self.eta_0_t0 == self.eta_1_t0 * self.eta_1_t1

    @property
    def symmetric_ratio(self):
        """The common ratio eta for symmetric specs; None otherwise."""
        if not self.is_symmetric:
            return None
        if self.eta_1_t1 == 0 or self.eta_0_t0 == 0:
            return None
        return self.eta_0_t1 / self.eta_1_t1

    def as_floats(self) -> tuple:
        return (
            float(self.eta_0_t0),
            float(self.eta_0_t1),
            float(self.eta_1_t0),
            float(self.eta_1_t1),
        )


def choose_control_values(
    pair: DetectorPair, grid: Sequence[ControlValue]
) -> tuple:
    """Pick Eve's operating points from a candidate grid.

    t1 minimizes eta_0(t)/eta_1(t) (suppresses detector 0), t0 minimizes
    eta_1(t)/eta_0(t). Points where both efficiencies vanish carry no signal
    and are skipped; a ratio x/0 with x > 0 is treated as +inf. Ties resolve
    to the smallest control value. Returns (t0, t1, MismatchSpec).
    """
    if len(grid) == 0:
        raise ValueError("empty control grid")

    best = {0: None, 1: None}  # target bit to blind -> (ratio, t)
    any_signal = False
    for t in sorted(grid):
        e0, e1 = pair.at(t)
        if e0 == 0.0 and e1 == 0.0:
            continue
        any_signal = True
        r1 = e0 / e1 if e1 > 0.0 else math.inf  # blinds detector 0 when small
        r0 = e1 / e0 if e0 > 0.0 else math.inf
        if best[1] is None or r1 < best[1][0]:
            best[1] = (r1, t)
        if best[0] is None or r0 < best[0][0]:
            best[0] = (r0, t)
    if not any_signal:
        raise NoSignalError("both detectors blind at every grid point")

    t0 = best[0][1]
    t1 = best[1][1]
    spec = MismatchSpec(
        eta_0_t0=pair.d0.at(t0),
        eta_0_t1=pair.d0.at(t1),
        eta_1_t0=pair.d1.at(t0),
        eta_1_t1=pair.d1.at(t1),
    )
    return (t0, t1, spec)


def parse_curve(text: str) -> EfficiencyCurve:
    """Parse the scenario-config curve grammar.

    ``constant:<v>`` | ``gauss:<center>,<width>,<peak>`` |
    ``table:<t1>:<v1>;<t2>:<v2>;...``
    """
    kind, sep, body = text.partition(":")
    if not sep:
        raise ValueError(f"bad curve spec {text!r}: missing ':'")
    kind = kind.strip().lower()
    try:
        if kind == "constant":
            return ConstantCurve(float(body))
        if kind == "gauss":
            center, width, peak = (float(p) for p in body.split(","))
            return GaussianCurve(center, width, peak)
        if kind == "table":
            ts, values = [], []
            for entry in body.split(";"):
                entry = entry.strip()
                if not entry:
                    continue
                t_str, _, v_str = entry.partition(":")
                ts.append(float(t_str))
                values.append(float(v_str))
            return TableCurve(tuple(ts), tuple(values))
    except ValueError as exc:
        raise ValueError(f"bad curve spec {text!r}: {exc}") from None
    raise ValueError(f"bad curve spec {text!r}: unknown kind {kind!r}")


#: Symbolic control coordinates used when a scenario is specified directly by
#: a MismatchSpec instead of curves. Both detectors are fully efficient at
#: T_NORMAL (the honest operating point).
T0_DEFAULT: ControlValue = -1.0
T_NORMAL_DEFAULT: ControlValue = 0.0
T1_DEFAULT: ControlValue = 1.0


def pair_from_mismatch(
    spec: MismatchSpec,
    t0: ControlValue = T0_DEFAULT,
    t1: ControlValue = T1_DEFAULT,
    t_normal: ControlValue = T_NORMAL_DEFAULT,
    eta_normal: float = 1.0,
) -> DetectorPair:
    """Build table curves realizing a MismatchSpec at the three standard points."""
    if not t0 < t_normal < t1:
        raise ValueError("need t0 < t_normal < t1")
    e00, e01, e10, e11 = spec.as_floats()
    d0 = TableCurve((t0, t_normal, t1), (e00, eta_normal, e01))
    d1 = TableCurve((t0, t_normal, t1), (e10, eta_normal, e11))
    return DetectorPair(d0, d1)
