"""Result records shared by the protocol simulators and oracles."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import UndefinedQberError


@dataclass(frozen=True)
class AttackStats:
    """Sifted-key counters from a Monte Carlo run.

    ``known`` counts sifted bits whose value Eve's records determine (the
    conditional distribution of the kept bit given her resent state and the
    public announcements is a point mass). ``sent_by_control`` and
    ``detected_by_control`` index Eve's two operating points (t0, t1);
    entries for protocols without that notion stay zero.
    """

    protocol: str
    rounds: int
    sifted: int
    errors: int
    known: int
    sent_by_control: tuple = (0, 0)
    detected_by_control: tuple = (0, 0)
    clicks_by_detector: tuple = (0, 0)
    coincidences: int = 0
    kept_outside_record: int = 0
    eve_detections: int = 0

    def __post_init__(self):
        if self.errors > self.sifted:
            raise ValueError("error count exceeds sifted count")

    @property
    def qber(self) -> Optional[float]:
        if self.sifted == 0:
            return None
        return self.errors / self.sifted

    @property
    def eve_knowledge(self) -> Optional[float]:
        if self.sifted == 0:
            return None
        return self.known / self.sifted

    @property
    def coincidence_rate(self) -> float:
        return self.coincidences / self.rounds if self.rounds else 0.0


def stats_from_counters(protocol: str, rounds: int, c) -> AttackStats:
    """Build AttackStats from the shared 10-slot kernel counter layout:
    0 sifted, 1 errors, 2 known, 3/4 sent with t0/t1, 5/6 detected for t0/t1,
    7/8 clicks per detector, 9 Eve detections."""
    return AttackStats(
        protocol=protocol,
        rounds=rounds,
        sifted=int(c[0]),
        errors=int(c[1]),
        known=int(c[2]),
        sent_by_control=(int(c[3]), int(c[4])),
        detected_by_control=(int(c[5]), int(c[6])),
        clicks_by_detector=(int(c[7]), int(c[8])),
        eve_detections=int(c[9]),
    )


@dataclass(frozen=True)
class ExactStats:
    """Exact per-round probabilities from an enumeration oracle.

    ``arrival`` is the probability that a round survives sifting, ``error``
    the probability it survives with a wrong bit; both are exact rationals
    when the efficiencies are.
    """

    arrival: Fraction
    error: Fraction

    def __post_init__(self):
        if not 0 <= self.error <= self.arrival <= 1:
            raise ValueError("need 0 <= error <= arrival <= 1")

    @property
    def qber(self) -> Fraction:
        if self.arrival == 0:
            raise UndefinedQberError("zero arrival probability")
        return self.error / self.arrival


@dataclass(frozen=True)
class TimeShiftStats:
    """Counters for the measure-nothing control-parameter shift attack."""

    rounds: int
    arrived: int
    sifted: int
    errors: int
    guess_correct: int

    @property
    def arrival_rate(self) -> float:
        return self.arrived / self.rounds if self.rounds else 0.0

    @property
    def qber(self) -> Optional[float]:
        return self.errors / self.sifted if self.sifted else None

    @property
    def guess_accuracy(self) -> Optional[float]:
        return self.guess_correct / self.sifted if self.sifted else None
