"""Pulse trains and the asymmetric (one-slot delay) interferometer.

Bob's receiver splits every incoming pulse between a short and a long arm
whose delay equals one arrival slot, then recombines them on a 50/50 coupler.
Detection slot k therefore mixes arrival slots k-1 and k:

    D0_k = (a_{k-1} + e^{i phi} a_k) / 2
    D1_k = (a_{k-1} - e^{i phi} a_k) / 2

which conserves energy exactly for any phase. Click statistics are Poissonian
(weak coherent light): a gated (slot, port) cell clicks with probability
1 - exp(-mu |A|^2 eta_port(t)) where t is the slot's control tag.
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple

import numpy as np

from .detmodel import ControlValue, DetectorPair
from .errors import PlanError


@dataclass(frozen=True)
class Pulse:
    """One arrival-slot amplitude with Eve's control tag for that light."""

    amplitude: complex
    tag: ControlValue = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.amplitude.real) and math.isfinite(self.amplitude.imag)):
            raise ValueError("pulse amplitude must be finite")


@dataclass(frozen=True)
class PulseTrain:
    """Contiguous arrival slots starting at ``base_index``; vacuum = amplitude 0."""

    pulses: Tuple[Pulse, ...]
    base_index: int = 0
    mu: float = 1.0

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be non-negative")

    @classmethod
    def from_amplitudes(
        cls,
        amplitudes: Iterable[complex],
        tag: ControlValue = 0.0,
        base_index: int = 0,
        mu: float = 1.0,
    ) -> "PulseTrain":
        return cls(
            pulses=tuple(Pulse(complex(a), tag) for a in amplitudes),
            base_index=base_index,
            mu=mu,
        )

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([p.amplitude for p in self.pulses], dtype=np.complex128)

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


@dataclass(frozen=True)
class PortAmplitudes:
    """Per-detection-slot output amplitudes at the two ports."""

    d0: np.ndarray
    d1: np.ndarray
    tags: np.ndarray
    base_index: int = 0
    mu: float = 1.0

    @property
    def n_slots(self) -> int:
        return len(self.d0)

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.d0) ** 2 + np.abs(self.d1) ** 2))

    def slot_energy(self, slot: int, port: int) -> float:
        arr = self.d0 if port == 0 else self.d1
        return float(abs(arr[slot - self.base_index]) ** 2)


@dataclass(frozen=True)
class GateSet:
    """Detection slots Bob records, with display labels for the histograms."""

    slots: frozenset
    labels: dict = field(default_factory=dict)

    def label(self, slot: int) -> str:
        return self.labels.get(slot, str(slot))


def interfere(train: PulseTrain, bob_phase: float = 0.0) -> PortAmplitudes:
    """Propagate a train through the delay interferometer.

    N arrival slots produce N+1 detection slots. A detection slot fed by two
    nonzero pulses carrying different control tags would mix Eve's operating
    points and raises PlanError; the faked-state builders never do that.
    """
    amps = train.amplitudes
    n = len(amps)
    phase = cmath.exp(1j * bob_phase)
    d0 = np.zeros(n + 1, dtype=np.complex128)
    d1 = np.zeros(n + 1, dtype=np.complex128)
    tags = np.full(n + 1, np.nan)
    for k in range(n + 1):
        late = amps[k - 1] if k >= 1 else 0.0  # long arm: previous arrival slot
        early = amps[k] if k < n else 0.0      # short arm: this arrival slot
        d0[k] = (late + phase * early) / 2.0
        d1[k] = (late - phase * early) / 2.0
        contributors = []
        if k >= 1 and abs(amps[k - 1]) > 0.0:
            contributors.append(train.pulses[k - 1].tag)
        if k < n and abs(amps[k]) > 0.0:
            contributors.append(train.pulses[k].tag)
        if contributors:
            if len(contributors) == 2 and contributors[0] != contributors[1]:
                raise PlanError(
                    f"detection slot {train.base_index + k} mixes control tags "
                    f"{contributors[0]} and {contributors[1]}"
                )
            tags[k] = contributors[0]
    return PortAmplitudes(
        d0=d0, d1=d1, tags=tags, base_index=train.base_index, mu=train.mu
    )


def click_probability(mu: float, energy: float, efficiency: float) -> float:
    """Poissonian click probability for one (slot, port) cell."""
    return 1.0 - math.exp(-mu * energy * efficiency)


def detect(
    ports: PortAmplitudes,
    gates: GateSet,
    detectors: DetectorPair,
    rng,
    brightness: float = 1.0,
) -> List[tuple]:
    """Sample clicks for every gated (slot, port) cell independently.

    Returns (slot, port) pairs; non-gated slots are never recorded. The
    slot's control tag selects the efficiency; vacuum cells cannot click.
    """
    clicks = []
    for k in range(ports.n_slots):
        slot = ports.base_index + k
        if slot not in gates.slots:
            continue
        tag = ports.tags[k]
        for port, amp in ((0, ports.d0[k]), (1, ports.d1[k])):
            energy = abs(amp) ** 2 * brightness
            if energy == 0.0 or math.isnan(tag):
                continue
            eta = (detectors.d0 if port == 0 else detectors.d1).at(tag)
            if rng.random() < click_probability(ports.mu, energy, eta):
                clicks.append((slot, port))
    return clicks


def waveform_rows(ports: PortAmplitudes) -> List[dict]:
    """Rows for the waveform dump: slot, re/im per port, control tag."""
    rows = []
    for k in range(ports.n_slots):
        rows.append(
            {
                "slot": ports.base_index + k,
                "re_d0": ports.d0[k].real,
                "im_d0": ports.d0[k].imag,
                "re_d1": ports.d1[k].real,
                "im_d1": ports.d1[k].imag,
                "control_tag": ports.tags[k],
            }
        )
    return rows


def write_waveform_csv(ports: PortAmplitudes, path) -> None:
    rows = waveform_rows(ports)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["slot", "re_d0", "im_d0", "re_d1", "im_d1", "control_tag"]
        )
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
