"""Phase-time encoded BB84 and its faked-states attack.

Alice's four states occupy two adjacent arrival slots behind an asymmetric
interferometer: a lone pulse in the later slot (``l``), a lone pulse in the
earlier slot (``s``), or their sum/difference. Bob gates three of the five
detection slots; the middle gated slot is where the two arms interfere, so a
click there reads the phase bit by port while clicks in the outer gated slots
read the time bit by position.

Slot layout (detection slots 0..4, arrival slots 0..3):

    0  ungated early   label S4
    1  exclusive-s     label S3      <- lone |s> light, time bit s
    2  interference    label S2      <- phase bit by port
    3  exclusive-l     label S1      <- time bit l
    4  ungated late    label S0

The label numbering runs against physical arrival order; that convention is
what makes "l can fire S1 or S2, s can fire S2 or S3" come out right, and
nothing downstream depends on the direction.

Eve resends per her classification: a time result becomes a lone pulse shifted
*outward* by one slot (so its two interferometer outputs land on the exclusive
slot and an ungated slot, never the interference slot) at the neutral control
value; a phase result becomes a four-pulse train whose live-port output is
exactly nulled in both exclusive time slots, sent at the control value that
blinds the opposite port. The four-pulse amplitude patterns (-1,1,1,-1) and
(1,1,-1,-1) are the minimal solutions of those null conditions; the support
certificates, not the literal patterns, are the normative contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Dict, NamedTuple, Optional, Tuple

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
from .interferometry import GateSet, PortAmplitudes, PulseTrain, interfere
from .stats import AttackStats

N_ARRIVAL_SLOTS = 4
GATED_SLOTS = (1, 2, 3)
SLOT_LABELS = {0: "S4", 1: "S3", 2: "S2", 3: "S1", 4: "S0"}
GATES = GateSet(slots=frozenset(GATED_SLOTS), labels=SLOT_LABELS)

#: (slot, port) cells Bob records, in kernel order.
CELLS = tuple((slot, port) for slot in GATED_SLOTS for port in (0, 1))

BASIS_TIME = 0
BASIS_PHASE = 1


@dataclass(frozen=True)
class PhaseTimeSymbol:
    """Protocol symbol: (basis, bit) with display name."""

    basis: int
    bit: int

    @property
    def index(self) -> int:
        return 2 * self.basis + self.bit

    @property
    def name(self) -> str:
        return ("s", "l", "+", "-")[self.index]


TIME_S = PhaseTimeSymbol(BASIS_TIME, 0)
TIME_L = PhaseTimeSymbol(BASIS_TIME, 1)
PHASE_PLUS = PhaseTimeSymbol(BASIS_PHASE, 0)
PHASE_MINUS = PhaseTimeSymbol(BASIS_PHASE, 1)
SYMBOLS = (TIME_S, TIME_L, PHASE_PLUS, PHASE_MINUS)

_VACUUM_KIND = 4  # kernel row for rounds Eve cannot classify

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


def encode(
    symbol: PhaseTimeSymbol,
    mu: float = 1.0,
    t_normal: float = T_NORMAL_DEFAULT,
) -> PulseTrain:
    """Alice's unit-energy train for a symbol (s -> arrival 1, l -> arrival 2)."""
    amps = {
        TIME_S.index: (0.0, 1.0, 0.0, 0.0),
        TIME_L.index: (0.0, 0.0, 1.0, 0.0),
        PHASE_PLUS.index: (0.0, _INV_SQRT2, _INV_SQRT2, 0.0),
        PHASE_MINUS.index: (0.0, _INV_SQRT2, -_INV_SQRT2, 0.0),
    }[symbol.index]
    return PulseTrain.from_amplitudes(amps, tag=t_normal, mu=mu)


def classify_click(slot: int, port: int) -> Optional[PhaseTimeSymbol]:
    """Map a gated click to a symbol; ungated slots discard."""
    if slot == 1:
        return TIME_S
    if slot == 3:
        return TIME_L
    if slot == 2:
        return PHASE_PLUS if port == 0 else PHASE_MINUS
    return None


def faked_state_for(
    eve_result: PhaseTimeSymbol,
    mu: float = 1.0,
    t0: float = T0_DEFAULT,
    t1: float = T1_DEFAULT,
    t_normal: float = T_NORMAL_DEFAULT,
) -> PulseTrain:
    """Eve's unit-energy resend train for a classified result.

    Time results shift the lone pulse outward so Bob's outputs avoid the
    interference slot; phase results use the four-pulse null patterns with
    the control value that blinds the opposite port (t0 blinds D1).
    """
    idx = eve_result.index
    if idx == TIME_L.index:
        return PulseTrain.from_amplitudes((0.0, 0.0, 0.0, 1.0), tag=t_normal, mu=mu)
    if idx == TIME_S.index:
        return PulseTrain.from_amplitudes((1.0, 0.0, 0.0, 0.0), tag=t_normal, mu=mu)
    if idx == PHASE_PLUS.index:
        return PulseTrain.from_amplitudes(
            (-0.5, 0.5, 0.5, -0.5), tag=t0, mu=mu
        )
    return PulseTrain.from_amplitudes((0.5, 0.5, -0.5, -0.5), tag=t1, mu=mu)


def null_cells(eve_result: PhaseTimeSymbol) -> Tuple[tuple, ...]:
    """Gated (slot, port) cells a faked state must leave dark by construction."""
    idx = eve_result.index
    if idx == TIME_L.index:
        return ((1, 0), (1, 1), (2, 0), (2, 1))
    if idx == TIME_S.index:
        return ((2, 0), (2, 1), (3, 0), (3, 1))
    if idx == PHASE_PLUS.index:
        return ((1, 0), (3, 0))  # live port dark in both exclusive time slots
    return ((1, 1), (3, 1))


def gated_energies(ports: PortAmplitudes) -> np.ndarray:
    """Energies of the six gated cells, in kernel cell order."""
    return np.array([ports.slot_energy(slot, port) for slot, port in CELLS])


# ---------------------------------------------------------------------------
# Monte Carlo kernels. Uniform columns: 0 alice symbol, 1..6 Eve's six gated
# cells, 7..12 Bob's six gated cells. Counters: 0 sifted, 1 errors, 2 known,
# 3/4 four-pulse states sent at t0/t1, 5/6 Bob-detected rounds of those,
# 7/8 clicks per port, 9 Eve classified rounds, 10 coincidence rounds,
# 11..16 click histogram per cell.
# ---------------------------------------------------------------------------

N_UNIFORMS = 13
_N_COUNTERS = 17


def _round_loop(u, ep, bp, kind_of_cell, cls_basis, cls_bit, det_tab, a_basis, a_bit, attack):
    counters = np.zeros(17, dtype=np.int64)
    n = u.shape[0]
    for i in range(n):
        s = int(u[i, 0] * 4.0)
        if s > 3:
            s = 3
        if attack == 1:
            m_e = 0
            cell_e = -1
            for j in range(6):
                if u[i, 1 + j] < ep[s, j]:
                    m_e += 1
                    if m_e == 1:
                        cell_e = j
            if m_e == 1:
                counters[9] += 1
                kind = kind_of_cell[cell_e]
            else:
                kind = 4  # vacuum: nothing usable to resend
        else:
            kind = s
        if kind == 2:
            counters[3] += 1
        elif kind == 3:
            counters[4] += 1
        m_b = 0
        cell_b = -1
        for j in range(6):
            if u[i, 7 + j] < bp[kind, j]:
                m_b += 1
                if m_b == 1:
                    cell_b = j
                counters[11 + j] += 1
                counters[7 + (j & 1)] += 1
        if m_b >= 1:
            if kind == 2:
                counters[5] += 1
            elif kind == 3:
                counters[6] += 1
        if m_b >= 2:
            counters[10] += 1
        elif m_b == 1:
            if cls_basis[cell_b] == a_basis[s]:
                counters[0] += 1
                if cls_bit[cell_b] != a_bit[s]:
                    counters[1] += 1
                if det_tab[kind, a_basis[s]] == 1:
                    counters[2] += 1
    return counters


def _round_numpy(u, ep, bp, kind_of_cell, cls_basis, cls_bit, det_tab, a_basis, a_bit, attack):
    n = u.shape[0]
    s = np.minimum((u[:, 0] * 4.0).astype(np.int64), 3)
    if attack == 1:
        eve_clicks = u[:, 1:7] < ep[s]
        m_e = eve_clicks.sum(axis=1)
        cell_e = np.argmax(eve_clicks, axis=1)
        classified = m_e == 1
        kind = np.where(classified, kind_of_cell[cell_e], _VACUUM_KIND)
    else:
        classified = np.zeros(n, dtype=bool)
        kind = s
    bob_clicks = u[:, 7:13] < bp[kind]
    m_b = bob_clicks.sum(axis=1)
    cell_b = np.argmax(bob_clicks, axis=1)
    single = m_b == 1
    basis_match = single & (cls_basis[cell_b] == a_basis[s])
    counters = np.zeros(17, dtype=np.int64)
    counters[0] = np.count_nonzero(basis_match)
    counters[1] = np.count_nonzero(basis_match & (cls_bit[cell_b] != a_bit[s]))
    counters[2] = np.count_nonzero(basis_match & (det_tab[kind, a_basis[s]] == 1))
    counters[3] = np.count_nonzero(kind == 2)
    counters[4] = np.count_nonzero(kind == 3)
    counters[5] = np.count_nonzero((kind == 2) & (m_b >= 1))
    counters[6] = np.count_nonzero((kind == 3) & (m_b >= 1))
    counters[7] = np.count_nonzero(bob_clicks[:, 0::2])
    counters[8] = np.count_nonzero(bob_clicks[:, 1::2])
    counters[9] = np.count_nonzero(classified)
    counters[10] = np.count_nonzero(m_b >= 2)
    counters[11:17] = np.count_nonzero(bob_clicks, axis=0)
    return counters


_round_kernel = dispatch(_round_numpy, _round_loop)


class PhaseTimeTables(NamedTuple):
    ep: np.ndarray
    bp: np.ndarray
    kind_of_cell: np.ndarray
    cls_basis: np.ndarray
    cls_bit: np.ndarray
    det_tab: np.ndarray
    a_basis: np.ndarray
    a_bit: np.ndarray


def build_tables(
    spec: MismatchSpec,
    mu: float,
    brightness: float = 1.0,
    attack: bool = True,
) -> PhaseTimeTables:
    """Click-probability tables, computed from the actual interferometer model.

    Eve's replica uses perfect detectors; Bob's efficiencies come from the
    detector pair realizing ``spec`` (both detectors fully efficient at the
    neutral control value). Brightness scales Eve's resend energy.
    """
    pair = pair_from_mismatch(spec)

    cls_basis = np.zeros(6, dtype=np.int64)
    cls_bit = np.zeros(6, dtype=np.int64)
    kind_of_cell = np.zeros(6, dtype=np.int64)
    for j, (slot, port) in enumerate(CELLS):
        sym = classify_click(slot, port)
        cls_basis[j] = sym.basis
        cls_bit[j] = sym.bit
        kind_of_cell[j] = sym.index

    ep = np.zeros((4, 6))
    alice_ports = [interfere(encode(sym, mu=mu)) for sym in SYMBOLS]
    for s, ports in enumerate(alice_ports):
        for j, energy in enumerate(gated_energies(ports)):
            ep[s, j] = 1.0 - math.exp(-mu * energy)

    if attack:
        bp = np.zeros((5, 6))
        for kind, sym in enumerate(SYMBOLS):
            ports = interfere(faked_state_for(sym, mu=mu))
            energies = gated_energies(ports)
            for j, (slot, port) in enumerate(CELLS):
                tag = ports.tags[slot]
                if math.isnan(tag) or energies[j] == 0.0:
                    continue
                eta = (pair.d0 if port == 0 else pair.d1).at(tag)
                bp[kind, j] = 1.0 - math.exp(-mu * brightness * energies[j] * eta)
    else:
        bp = np.zeros((4, 6))
        for s, ports in enumerate(alice_ports):
            for j, (slot, port) in enumerate(CELLS):
                energy = gated_energies(ports)[j]
                if energy == 0.0:
                    continue
                eta = (pair.d0 if port == 0 else pair.d1).at(T_NORMAL_DEFAULT)
                bp[s, j] = 1.0 - math.exp(-mu * energy * eta)

    a_basis = np.array([sym.basis for sym in SYMBOLS], dtype=np.int64)
    a_bit = np.array([sym.bit for sym in SYMBOLS], dtype=np.int64)

    det_tab = np.zeros((bp.shape[0], 2), dtype=np.uint8)
    if attack:
        for kind, basis in product(range(4), (0, 1)):
            bits = {
                int(cls_bit[j])
                for j in range(6)
                if bp[kind, j] > 0.0 and cls_basis[j] == basis
            }
            det_tab[kind, basis] = 1 if len(bits) == 1 else 0

    return PhaseTimeTables(ep, bp, kind_of_cell, cls_basis, cls_bit, det_tab, a_basis, a_bit)


class PhaseTimeRun(NamedTuple):
    stats: AttackStats
    histogram: Dict[tuple, int]


def simulate(
    n: int,
    spec: MismatchSpec,
    mu: float,
    seed: int,
    brightness: float = 1.0,
    attack: bool = True,
    workers: int = 1,
) -> PhaseTimeRun:
    """Full rounds Alice -> (Eve) -> Bob -> sifting, plus click histograms."""
    if n <= 0:
        raise ValueError("need n > 0 rounds")
    if mu <= 0:
        raise ValueError("need mu > 0")
    t = build_tables(spec, mu, brightness, attack)
    c = engine.accumulate_blocks(
        n,
        N_UNIFORMS,
        _round_kernel,
        (t.ep, t.bp, t.kind_of_cell, t.cls_basis, t.cls_bit, t.det_tab, t.a_basis, t.a_bit, 1 if attack else 0),
        seed,
        workers,
    )
    stats = AttackStats(
        protocol="phasetime" if attack else "phasetime-honest",
        rounds=n,
        sifted=int(c[0]),
        errors=int(c[1]),
        known=int(c[2]),
        sent_by_control=(int(c[3]), int(c[4])),
        detected_by_control=(int(c[5]), int(c[6])),
        clicks_by_detector=(int(c[7]), int(c[8])),
        coincidences=int(c[10]),
        eve_detections=int(c[9]),
    )
    histogram = {
        (SLOT_LABELS[slot], port): int(c[11 + j]) for j, (slot, port) in enumerate(CELLS)
    }
    return PhaseTimeRun(stats=stats, histogram=histogram)


def histogram_rows(histogram: Dict[tuple, int]) -> list:
    """CSV rows (slot_label, port, clicks) in kernel cell order."""
    return [
        {"slot_label": label, "port": f"D{port}", "clicks": count}
        for (label, port), count in histogram.items()
    ]
