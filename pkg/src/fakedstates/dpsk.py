"""Differential-phase-shift keying and the overlapping-train faked-states attack.

Alice modulates every pulse of a weak coherent train by {0, pi}; Bob's one-slot
delay interferometer converts equal adjacent phases into a D0 click (bit 0)
and opposite phases into a D1 click (bit 1). Bob announces the windows where
he saw clicks and Alice reads the bits off her modulation record.

Eve detects with a replica, then drives two continuous pulse trains at the two
control values: the t0 train (blinds D1) repeats its phase exactly at the
windows where Eve holds a bit-0 detection and flips it everywhere else, so its
D0 output is exactly nulled outside her record; the t1 train mirrors that for
bit 1. Windows where neither train may fire at its live port stay dark under a
total mismatch, so every announced window is one Eve already knows.

Frames are padded with vacuum rather than wrapped, and the two boundary
windows are excluded from keying by convention, which removes the lone-pulse
edge cases of finite trains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from . import engine
from ._backend import dispatch
from .detmodel import (
    DetectorPair,
    MismatchSpec,
    T0_DEFAULT,
    T1_DEFAULT,
    T_NORMAL_DEFAULT,
    pair_from_mismatch,
)
from .errors import PlanError
from .interferometry import GateSet, PulseTrain, click_probability, detect, interfere
from .stats import AttackStats


@dataclass(frozen=True)
class DpskFrame:
    """One frame of phase bits (0 -> phase 0, 1 -> phase pi), amplitude 1 pulses."""

    phase_bits: tuple
    mu: float = 0.2

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.phase_bits):
            raise ValueError("phase bits must be 0 or 1")

    @property
    def n_pulses(self) -> int:
        return len(self.phase_bits)

    @property
    def bits(self) -> tuple:
        """Differential key bits: bit k compares pulses k-1 and k (k >= 1)."""
        return tuple(
            self.phase_bits[k - 1] ^ self.phase_bits[k] for k in range(1, self.n_pulses)
        )

    def to_train(self, tag: float = T_NORMAL_DEFAULT, amplitude: float = 1.0) -> PulseTrain:
        return PulseTrain.from_amplitudes(
            [amplitude * (1.0 if b == 0 else -1.0) for b in self.phase_bits],
            tag=tag,
            mu=self.mu,
        )

    def interior_windows(self) -> range:
        """Keyed detection windows; window k pairs pulses k-1 and k."""
        return range(1, self.n_pulses)


@dataclass(frozen=True)
class EveDetectionRecord:
    """Windows where Eve's replica clicked, with the differential bit she read."""

    bits_by_window: dict

    def __post_init__(self):
        for w, b in self.bits_by_window.items():
            if b not in (0, 1):
                raise PlanError(f"window {w}: bit must be 0 or 1, got {b}")

    def windows_with_bit(self, bit: int) -> frozenset:
        return frozenset(w for w, b in self.bits_by_window.items() if b == bit)


class FakedTrainPlan(NamedTuple):
    """Two overlapping trains, one per control value, plus intended support."""

    train_t0: PulseTrain
    train_t1: PulseTrain
    live_windows_t0: frozenset
    live_windows_t1: frozenset
    n_windows: int

    def validate(self, tolerance: float = 1e-24) -> None:
        """Assert the live-port null conditions the construction promises."""
        for train, live, port in (
            (self.train_t0, self.live_windows_t0, 0),
            (self.train_t1, self.live_windows_t1, 1),
        ):
            ports = interfere(train)
            for w in range(1, self.n_windows):
                energy = ports.slot_energy(w, port)
                if w in live:
                    if energy < 0.5:
                        raise PlanError(f"window {w} should be live at port {port}")
                elif energy > tolerance:
                    raise PlanError(
                        f"window {w} leaks {energy} at live port {port}"
                    )


def single_pulse_faked_state(
    window: int,
    bit: int,
    mu: float = 0.2,
    amplitude: float = 1.0,
    t0: float = T0_DEFAULT,
    t1: float = T1_DEFAULT,
) -> PulseTrain:
    """Lone pulse covering two adjacent equal-bit detections at windows
    (window, window+1); possible clicks are confined to those windows at the
    matching port (the other port is blinded by the control value)."""
    if window < 0:
        raise PlanError("window must be non-negative")
    if bit not in (0, 1):
        raise PlanError("bit must be 0 or 1")
    tag = t0 if bit == 0 else t1
    return PulseTrain.from_amplitudes(
        [amplitude], tag=tag, base_index=window, mu=mu
    )


def continuous_train_plan(
    record: EveDetectionRecord,
    n_pulses: int,
    mu: float = 0.2,
    amplitude: float = 1.0,
    t0: float = T0_DEFAULT,
    t1: float = T1_DEFAULT,
) -> FakedTrainPlan:
    """Phase plans for the two full-frame trains.

    The t0 train keeps its phase across windows in Eve's bit-0 record and
    flips everywhere else (live port D0 dark outside the record); the t1
    train flips exactly at her bit-1 windows. An empty record alternates both
    trains everywhere, nulling every interior window.
    """
    for w in record.bits_by_window:
        if not 1 <= w <= n_pulses - 1:
            raise PlanError(f"window {w} outside interior 1..{n_pulses - 1}")
    live0 = record.windows_with_bit(0)
    live1 = record.windows_with_bit(1)

    phases0 = [0]
    phases1 = [0]
    for w in range(1, n_pulses):
        phases0.append(phases0[-1] if w in live0 else 1 - phases0[-1])
        phases1.append(1 - phases1[-1] if w in live1 else phases1[-1])

    def to_train(phases, tag):
        return PulseTrain.from_amplitudes(
            [amplitude * (1.0 if p == 0 else -1.0) for p in phases], tag=tag, mu=mu
        )

    plan = FakedTrainPlan(
        train_t0=to_train(phases0, t0),
        train_t1=to_train(phases1, t1),
        live_windows_t0=live0,
        live_windows_t1=live1,
        n_windows=n_pulses,
    )
    plan.validate()
    return plan


def bob_detect(
    trains,
    detectors: DetectorPair,
    rng,
    gates: Optional[GateSet] = None,
    brightness: float = 1.0,
) -> List[tuple]:
    """Clicks from one or more (possibly overlapping) trains, merged by window.

    Each train is interfered and detected independently; clicks landing on the
    same (window, port) merge into one.
    """
    if isinstance(trains, PulseTrain):
        trains = (trains,)
    merged = set()
    for train in trains:
        ports = interfere(train)
        if gates is None:
            train_gates = GateSet(
                slots=frozenset(
                    range(ports.base_index, ports.base_index + ports.n_slots)
                )
            )
        else:
            train_gates = gates
        merged.update(detect(ports, train_gates, detectors, rng, brightness))
    return sorted(merged)


# ---------------------------------------------------------------------------
# Monte Carlo kernels. One row per frame with N pulses; columns:
# 0..N-1 Alice phase bits, N..2N-2 Eve's interior windows, then four cells
# (t0D0, t0D1, t1D0, t1D1) per interior window. Counters: 0 announced,
# 1 errors, 2 known, 3/4 record size by bit, 5/6 announced windows by port,
# 7/8 clicks per port, 9 Eve detections, 10 coincidences,
# 11 announced windows outside Eve's record.
# ---------------------------------------------------------------------------

_N_COUNTERS = 12


def n_uniforms(n_pulses: int) -> int:
    return n_pulses + 5 * (n_pulses - 1)


def _frame_loop(u, n_pulses, p_eve, cp, p_honest, attack):
    counters = np.zeros(12, dtype=np.int64)
    frames = u.shape[0]
    n_windows = n_pulses - 1  # interior only
    for f in range(frames):
        prev = 0 if u[f, 0] < 0.5 else 1
        for w in range(1, n_pulses):
            cur = 0 if u[f, w] < 0.5 else 1
            diff = prev ^ cur
            prev = cur
            base = n_pulses + n_windows + 4 * (w - 1)
            if attack == 1:
                eve = u[f, n_pulses + (w - 1)] < p_eve
                if eve:
                    counters[9] += 1
                    counters[3 + diff] += 1
                live0 = eve and diff == 0
                live1 = eve and diff == 1
                c00 = live0 and (u[f, base + 0] < cp[0])
                c01 = (not live0) and (u[f, base + 1] < cp[1])
                c10 = (not live1) and (u[f, base + 2] < cp[2])
                c11 = live1 and (u[f, base + 3] < cp[3])
                port0 = c00 or c10
                port1 = c01 or c11
                if port0:
                    counters[7] += 1
                if port1:
                    counters[8] += 1
                if port0 and port1:
                    counters[10] += 1
                elif port0 or port1:
                    bit = 1 if port1 else 0
                    counters[0] += 1
                    counters[5 + bit] += 1
                    if bit != diff:
                        counters[1] += 1
                    possible0 = (live0 and cp[0] > 0.0) or ((not live1) and cp[2] > 0.0)
                    possible1 = ((not live0) and cp[1] > 0.0) or (live1 and cp[3] > 0.0)
                    if possible0 != possible1:
                        counters[2] += 1
                    if not (eve and bit == diff):
                        counters[11] += 1
            else:
                if u[f, base + 0] < p_honest:
                    counters[0] += 1
                    counters[5 + diff] += 1
                    counters[7 + diff] += 1
    return counters


def _frame_numpy(u, n_pulses, p_eve, cp, p_honest, attack):
    frames = u.shape[0]
    n_windows = n_pulses - 1
    phases = (u[:, :n_pulses] >= 0.5).astype(np.int64)
    diff = phases[:, :-1] ^ phases[:, 1:]
    cells = u[:, n_pulses + n_windows:].reshape(frames, n_windows, 4)
    counters = np.zeros(12, dtype=np.int64)
    if attack == 1:
        eve = u[:, n_pulses : n_pulses + n_windows] < p_eve
        live0 = eve & (diff == 0)
        live1 = eve & (diff == 1)
        c00 = live0 & (cells[:, :, 0] < cp[0])
        c01 = ~live0 & (cells[:, :, 1] < cp[1])
        c10 = ~live1 & (cells[:, :, 2] < cp[2])
        c11 = live1 & (cells[:, :, 3] < cp[3])
        port0 = c00 | c10
        port1 = c01 | c11
        coincidence = port0 & port1
        single = port0 ^ port1
        bit = np.where(port1, 1, 0)
        possible0 = (live0 & (cp[0] > 0.0)) | (~live1 & (cp[2] > 0.0))
        possible1 = (~live0 & (cp[1] > 0.0)) | (live1 & (cp[3] > 0.0))
        counters[0] = np.count_nonzero(single)
        counters[1] = np.count_nonzero(single & (bit != diff))
        counters[2] = np.count_nonzero(single & (possible0 != possible1))
        counters[3] = np.count_nonzero(live0)
        counters[4] = np.count_nonzero(live1)
        counters[5] = np.count_nonzero(single & (bit == 0))
        counters[6] = np.count_nonzero(single & (bit == 1))
        counters[7] = np.count_nonzero(port0)
        counters[8] = np.count_nonzero(port1)
        counters[9] = np.count_nonzero(eve)
        counters[10] = np.count_nonzero(coincidence)
        counters[11] = np.count_nonzero(single & ~(eve & (bit == diff)))
    else:
        clicked = cells[:, :, 0] < p_honest
        counters[0] = np.count_nonzero(clicked)
        counters[1] = 0
        counters[5] = np.count_nonzero(clicked & (diff == 0))
        counters[6] = np.count_nonzero(clicked & (diff == 1))
        counters[7] = counters[5]
        counters[8] = counters[6]
    return counters


_frame_kernel = dispatch(_frame_numpy, _frame_loop)


def saturating_brightness(mu: float, residual: float = 1e-9) -> float:
    """Brightness making the live-port click probability 1 - residual, the
    compensation that restores Bob's honest click rate."""
    if not 0.0 < residual < 1.0:
        raise ValueError("residual must lie in (0, 1)")
    return -math.log(residual) / mu


def cell_probabilities(spec: MismatchSpec, mu: float, brightness: float) -> np.ndarray:
    """Click probabilities of the four (train, port) cells at unit energy."""
    pair = pair_from_mismatch(spec)
    return np.array(
        [
            click_probability(mu, brightness, pair.d0.at(T0_DEFAULT)),
            click_probability(mu, brightness, pair.d1.at(T0_DEFAULT)),
            click_probability(mu, brightness, pair.d0.at(T1_DEFAULT)),
            click_probability(mu, brightness, pair.d1.at(T1_DEFAULT)),
        ]
    )


def simulate(
    n_frames: int,
    spec: MismatchSpec,
    mu: float,
    seed: int,
    frame_len: int = 64,
    brightness: float = 1.0,
    attack: bool = True,
    workers: int = 1,
) -> AttackStats:
    """Frame loop Alice -> Eve replica -> twin-train plan -> Bob -> announcement."""
    if n_frames <= 0:
        raise ValueError("need n_frames > 0")
    if frame_len < 2:
        raise ValueError("need at least 2 pulses per frame")
    if mu <= 0:
        raise ValueError("need mu > 0")
    p_eve = click_probability(mu, 1.0, 1.0)
    cp = cell_probabilities(spec, mu, brightness)
    p_honest = click_probability(mu, 1.0, 1.0)
    c = engine.accumulate_blocks(
        n_frames,
        n_uniforms(frame_len),
        _frame_kernel,
        (frame_len, p_eve, cp, p_honest, 1 if attack else 0),
        seed,
        workers,
        block_size=1 << 8,
    )
    return AttackStats(
        protocol="dpsk" if attack else "dpsk-honest",
        rounds=n_frames,
        sifted=int(c[0]),
        errors=int(c[1]),
        known=int(c[2]),
        sent_by_control=(int(c[3]), int(c[4])),
        detected_by_control=(int(c[5]), int(c[6])),
        clicks_by_detector=(int(c[7]), int(c[8])),
        coincidences=int(c[10]),
        kept_outside_record=int(c[11]),
        eve_detections=int(c[9]),
    )
