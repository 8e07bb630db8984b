"""BB84 under the detector-blinding intercept-resend attack.

Eve measures every qubit with a replica of Bob's receiver, then resends the
*opposite* bit in the *opposite* basis, tagged with the control value that
suppresses the detector for the opposite bit of what she saw (detected bit
d -> control t_d, which blinds detector 1-d). Bob then only registers
rounds in which he happened to measure in Eve's basis, so the bits that
survive sifting carry no extra errors when the blinding is complete.

Conventions: basis 0 is Z (equator angles 0/180 for bits 0/1), basis 1 is X
(90/270); detector 0 registers bit 0 and sits at efficiency ``eta_0``,
control t0 blinds detector 1, t1 blinds detector 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Optional

import numpy as np

from . import engine
from ._backend import dispatch
from .detmodel import MismatchSpec
from .errors import UndefinedQberError
from .polar import EquatorState, exact_overlap
from .stats import AttackStats, ExactStats, TimeShiftStats, stats_from_counters

N_UNIFORMS = 9
_N_COUNTERS = 10


def state_angle(basis: int, bit: int) -> float:
    """Equator angle of the protocol state (basis, bit)."""
    return 90.0 * basis + 180.0 * bit


def state_index(basis: int, bit: int) -> int:
    return 2 * basis + bit


@dataclass(frozen=True)
class FakedQubit:
    """What Eve resends: a protocol state plus a control slot (0 -> t0)."""

    state: EquatorState
    basis: int
    bit: int
    control: int


def faked_state_for(eve_basis: int, eve_bit: int) -> FakedQubit:
    """Opposite bit, opposite basis, control value matching Eve's detected bit."""
    basis = 1 - eve_basis
    bit = 1 - eve_bit
    return FakedQubit(
        state=EquatorState(state_angle(basis, bit)),
        basis=basis,
        bit=bit,
        control=eve_bit,
    )


def analytic_qber(m: MismatchSpec):
    """Closed-form QBER of the attack for arbitrary efficiencies."""
    num = 2 * (m.eta_0_t1 + m.eta_1_t0)
    den = m.eta_0_t0 + 3 * m.eta_0_t1 + 3 * m.eta_1_t0 + m.eta_1_t1
    if den == 0:
        raise UndefinedQberError("all four efficiencies are zero")
    return num / den


def symmetric_qber(eta):
    """QBER for symmetric curves with rate-equalized brightness: 2*eta/(1+3*eta)."""
    if not 0 <= eta <= 1:
        raise ValueError(f"eta={eta} outside [0, 1]")
    return 2 * eta / (1 + 3 * eta)


def equalizing_brightness(m: MismatchSpec) -> tuple:
    """Weights (w0, w1), max 1, equalizing Bob's detection rate at t0 and t1."""
    p0 = m.eta_0_t0 + 3 * m.eta_1_t0  # proportional to detection prob of t0 states
    p1 = m.eta_1_t1 + 3 * m.eta_0_t1
    if p0 == 0 or p1 == 0:
        raise ValueError("cannot equalize: one control value never detects")
    if p0 >= p1:
        return (p1 / p0, p1 / p1)
    return (p0 / p0, p0 / p1)


def _etas(m: MismatchSpec) -> tuple:
    """[detector][control] efficiencies as exact fractions."""
    return (
        (Fraction(m.eta_0_t0), Fraction(m.eta_0_t1)),
        (Fraction(m.eta_1_t0), Fraction(m.eta_1_t1)),
    )


def enumerate_attack(
    m: MismatchSpec,
    brightness: tuple = (1, 1),
    randomize_assignment: bool = False,
) -> ExactStats:
    """Exact enumeration over every basis/outcome/detector combination.

    Brightness weights multiply detection probabilities per control value,
    clamped at 1. With ``randomize_assignment`` Bob flips his detector-to-bit
    mapping with probability 1/2 each round while Eve attacks unmodified.
    """
    eta = _etas(m)
    w = (Fraction(brightness[0]), Fraction(brightness[1]))
    half = Fraction(1, 2)
    flips = ((0, half), (1, half)) if randomize_assignment else ((0, Fraction(1)),)

    arrival = Fraction(0)
    error = Fraction(0)
    for a_basis, a_bit, e_basis in product((0, 1), repeat=3):
        w_abe = Fraction(1, 8)
        eve_outcomes = (
            ((a_bit, Fraction(1)),) if e_basis == a_basis else ((0, half), (1, half))
        )
        for d, w_d in eve_outcomes:
            tau = d
            r_basis, r_bit = 1 - e_basis, 1 - d
            for b_basis in (0, 1):
                if b_basis != a_basis:
                    continue  # discarded at sifting regardless of clicks
                projections = (
                    ((r_bit, Fraction(1)),) if b_basis == r_basis else ((0, half), (1, half))
                )
                for proj, w_p in projections:
                    for f, w_f in flips:
                        click = min(Fraction(1), w[tau] * eta[proj ^ f][tau])
                        weight = w_abe * w_d * half * w_p * w_f * click
                        arrival += weight
                        if proj != a_bit:
                            error += weight
    return ExactStats(arrival=arrival, error=error)


# ---------------------------------------------------------------------------
# Monte Carlo kernels. Both backends consume the same uniform matrix u with
# columns: 0 alice basis, 1 alice bit, 2 eve basis, 3 eve projection,
# 4 eve detection, 5 bob basis, 6 bob projection, 7 bob detection,
# 8 assignment flip. Counter layout:
# 0 sifted, 1 errors, 2 known, 3/4 faked states sent with t0/t1,
# 5/6 Bob clicks for t0/t1, 7/8 clicks on detector 0/1, 9 Eve clicks.
# ---------------------------------------------------------------------------


def _attack_loop(u, p0, ck, det_tab, eve_eff, randomize):
    counters = np.zeros(10, dtype=np.int64)
    n = u.shape[0]
    for i in range(n):
        ab = 0 if u[i, 0] < 0.5 else 1
        av = 0 if u[i, 1] < 0.5 else 1
        eb = 0 if u[i, 2] < 0.5 else 1
        if eb == ab:
            d = av
        else:
            d = 0 if u[i, 3] < 0.5 else 1
        if u[i, 4] >= eve_eff:
            continue  # Eve lost the photon and resends vacuum
        counters[9] += 1
        tau = d
        s = (1 - eb) * 2 + (1 - d)
        counters[3 + tau] += 1
        bb = 0 if u[i, 5] < 0.5 else 1
        proj = 0 if u[i, 6] < p0[s, bb] else 1
        f = 0
        if randomize == 1:
            f = 0 if u[i, 8] < 0.5 else 1
        det = proj ^ f
        if u[i, 7] < ck[det, tau]:
            counters[5 + tau] += 1
            counters[7 + det] += 1
            if bb == ab:
                counters[0] += 1
                if proj != av:
                    counters[1] += 1
                if det_tab[s, tau, bb] == 1:
                    counters[2] += 1
    return counters


def _attack_numpy(u, p0, ck, det_tab, eve_eff, randomize):
    ab = (u[:, 0] >= 0.5).astype(np.int64)
    av = (u[:, 1] >= 0.5).astype(np.int64)
    eb = (u[:, 2] >= 0.5).astype(np.int64)
    d = np.where(eb == ab, av, (u[:, 3] >= 0.5).astype(np.int64))
    eve_kept = u[:, 4] < eve_eff
    tau = d
    s = (1 - eb) * 2 + (1 - d)
    bb = (u[:, 5] >= 0.5).astype(np.int64)
    proj = (u[:, 6] >= p0[s, bb]).astype(np.int64)
    if randomize == 1:
        f = (u[:, 8] >= 0.5).astype(np.int64)
    else:
        f = np.zeros_like(proj)
    det = proj ^ f
    clicked = eve_kept & (u[:, 7] < ck[det, tau])
    sifted = clicked & (bb == ab)
    counters = np.zeros(10, dtype=np.int64)
    counters[0] = np.count_nonzero(sifted)
    counters[1] = np.count_nonzero(sifted & (proj != av))
    counters[2] = np.count_nonzero(sifted & (det_tab[s, tau, bb] == 1))
    counters[3] = np.count_nonzero(eve_kept & (tau == 0))
    counters[4] = np.count_nonzero(eve_kept & (tau == 1))
    counters[5] = np.count_nonzero(clicked & (tau == 0))
    counters[6] = np.count_nonzero(clicked & (tau == 1))
    counters[7] = np.count_nonzero(clicked & (det == 0))
    counters[8] = np.count_nonzero(clicked & (det == 1))
    counters[9] = np.count_nonzero(eve_kept)
    return counters


_attack_kernel = dispatch(_attack_numpy, _attack_loop)


def attack_tables(
    m: MismatchSpec,
    brightness: tuple = (1, 1),
    randomize_assignment: bool = False,
) -> tuple:
    """Precomputed (p0, click, determined) tables for the attack kernels."""
    p0 = np.zeros((4, 2))
    for basis, bit, bob in product((0, 1), repeat=3):
        delta = int(state_angle(basis, bit) - state_angle(bob, 0))
        p0[state_index(basis, bit), bob] = float(exact_overlap(delta))

    eta = _etas(m)
    w = (Fraction(brightness[0]), Fraction(brightness[1]))
    ck = np.zeros((2, 2))
    for det, tau in product((0, 1), repeat=2):
        ck[det, tau] = float(min(Fraction(1), w[tau] * eta[det][tau]))

    det_tab = np.zeros((4, 2, 2), dtype=np.uint8)
    any_live = [w[tau] * (eta[0][tau] + eta[1][tau]) > 0 for tau in (0, 1)]
    for basis, bit, tau, bob in product((0, 1), repeat=4):
        s = state_index(basis, bit)
        if randomize_assignment:
            # Bob's flip hides which detector serves which bit, so a recorded
            # bit is possible whenever its projection is and either detector
            # is live at tau.
            possible = [p0[s, bob] > 0 and any_live[tau], p0[s, bob] < 1 and any_live[tau]]
        else:
            possible = [
                p0[s, bob] > 0 and w[tau] * eta[0][tau] > 0,
                p0[s, bob] < 1 and w[tau] * eta[1][tau] > 0,
            ]
        det_tab[s, tau, bob] = 1 if possible[0] != possible[1] else 0
    return (p0, ck, det_tab)


def simulate(
    n: int,
    m: MismatchSpec,
    seed: int,
    brightness: tuple = (1, 1),
    eve_efficiency: float = 1.0,
    workers: int = 1,
) -> AttackStats:
    """Monte Carlo run of the attack; reproducible from (n, m, seed)."""
    if n <= 0:
        raise ValueError("need n > 0 rounds")
    tables = attack_tables(m, brightness, randomize_assignment=False)
    c = engine.accumulate_blocks(
        n, N_UNIFORMS, _attack_kernel, tables + (float(eve_efficiency), 0), seed, workers
    )
    return stats_from_counters("bb84", n, c)


def simulate_with_random_assignment(
    n: int,
    m: MismatchSpec,
    seed: int,
    brightness: tuple = (1, 1),
    eve_efficiency: float = 1.0,
    workers: int = 1,
) -> AttackStats:
    """Attack against a receiver that re-randomizes detector-to-bit mapping."""
    if n <= 0:
        raise ValueError("need n > 0 rounds")
    tables = attack_tables(m, brightness, randomize_assignment=True)
    c = engine.accumulate_blocks(
        n, N_UNIFORMS, _attack_kernel, tables + (float(eve_efficiency), 1), seed, workers
    )
    return stats_from_counters("bb84-random-assignment", n, c)


# ---------------------------------------------------------------------------
# Control-parameter shift without measurement: Eve shifts each qubit to t0 or
# t1, lets it through, and afterwards guesses announced bits by maximum
# likelihood. Columns: 0 alice basis, 1 alice bit, 2 shift, 3 bob basis,
# 4 bob projection, 5 bob detection. Counters: 0 arrived, 1 sifted, 2 errors,
# 3 guess correct, 4 shifted to t0.
# ---------------------------------------------------------------------------

N_UNIFORMS_SHIFT = 6


def _shift_loop(u, cke, guess, p_shift):
    counters = np.zeros(5, dtype=np.int64)
    n = u.shape[0]
    for i in range(n):
        ab = 0 if u[i, 0] < 0.5 else 1
        av = 0 if u[i, 1] < 0.5 else 1
        tau = 0 if u[i, 2] < p_shift else 1
        if tau == 0:
            counters[4] += 1
        bb = 0 if u[i, 3] < 0.5 else 1
        if bb == ab:
            proj = av
        else:
            proj = 0 if u[i, 4] < 0.5 else 1
        if u[i, 5] < cke[proj, tau]:
            counters[0] += 1
            if bb == ab:
                counters[1] += 1
                if proj != av:
                    counters[2] += 1
                if guess[tau] == av:
                    counters[3] += 1
    return counters


def _shift_numpy(u, cke, guess, p_shift):
    ab = (u[:, 0] >= 0.5).astype(np.int64)
    av = (u[:, 1] >= 0.5).astype(np.int64)
    tau = (u[:, 2] >= p_shift).astype(np.int64)
    bb = (u[:, 3] >= 0.5).astype(np.int64)
    proj = np.where(bb == ab, av, (u[:, 4] >= 0.5).astype(np.int64))
    clicked = u[:, 5] < cke[proj, tau]
    sifted = clicked & (bb == ab)
    counters = np.zeros(5, dtype=np.int64)
    counters[0] = np.count_nonzero(clicked)
    counters[1] = np.count_nonzero(sifted)
    counters[2] = np.count_nonzero(sifted & (proj != av))
    counters[3] = np.count_nonzero(sifted & (guess[tau] == av))
    counters[4] = np.count_nonzero(tau == 0)
    return counters


_shift_kernel = dispatch(_shift_numpy, _shift_loop)


def time_shift_simulate(
    n: int,
    m: MismatchSpec,
    p_shift_to_t0: float,
    seed: int,
    workers: int = 1,
) -> TimeShiftStats:
    """Shift-only attack: no interaction beyond moving the control value."""
    if n <= 0:
        raise ValueError("need n > 0 rounds")
    if not 0.0 <= p_shift_to_t0 <= 1.0:
        raise ValueError("p_shift_to_t0 must lie in [0, 1]")
    e00, e01, e10, e11 = m.as_floats()
    cke = np.array([[e00, e01], [e10, e11]])
    # Max-likelihood guess per control value; ties resolve to bit 0.
    guess = np.array(
        [0 if e00 >= e10 else 1, 0 if e01 >= e11 else 1], dtype=np.int64
    )
    c = engine.accumulate_blocks(
        n, N_UNIFORMS_SHIFT, _shift_kernel, (cke, guess, float(p_shift_to_t0)), seed, workers
    )
    return TimeShiftStats(
        rounds=n,
        arrived=int(c[0]),
        sifted=int(c[1]),
        errors=int(c[2]),
        guess_correct=int(c[3]),
    )


def shift_guess_accuracy(m: MismatchSpec, control: int) -> float:
    """Expected guess accuracy on sifted bits for qubits shifted to one point."""
    e00, e01, e10, e11 = m.as_floats()
    pair = (e00, e10) if control == 0 else (e01, e11)
    total = pair[0] + pair[1]
    if total == 0.0:
        return 0.0
    return max(pair) / total


# ---------------------------------------------------------------------------
# Readable single-round reference used by the tests to pin the kernels'
# semantics; consumes one row of the same uniform matrix.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Bb84Round:
    alice_basis: int
    alice_bit: int
    eve_basis: int
    eve_bit: Optional[int]
    faked: Optional[FakedQubit]
    bob_basis: int
    bob_bit: Optional[int]
    sifted: bool

    def __post_init__(self):
        if self.sifted and (self.bob_bit is None or self.bob_basis != self.alice_basis):
            raise ValueError("sifted round requires a click in Alice's basis")


def play_round(
    row,
    m: MismatchSpec,
    brightness: tuple = (1, 1),
    eve_efficiency: float = 1.0,
    randomize_assignment: bool = False,
) -> Bb84Round:
    """Reference round semantics over one row of kernel uniforms."""
    p0, ck, _ = attack_tables(m, brightness, randomize_assignment)
    ab = 0 if row[0] < 0.5 else 1
    av = 0 if row[1] < 0.5 else 1
    eb = 0 if row[2] < 0.5 else 1
    d = av if eb == ab else (0 if row[3] < 0.5 else 1)
    bb = 0 if row[5] < 0.5 else 1
    if row[4] >= eve_efficiency:
        return Bb84Round(ab, av, eb, None, None, bb, None, False)
    faked = faked_state_for(eb, d)
    s = state_index(faked.basis, faked.bit)
    proj = 0 if row[6] < p0[s, bb] else 1
    f = (0 if row[8] < 0.5 else 1) if randomize_assignment else 0
    clicked = row[7] < ck[proj ^ f, faked.control]
    bob_bit = proj if clicked else None
    return Bb84Round(
        ab, av, eb, d, faked, bb, bob_bit, clicked and bb == ab
    )
