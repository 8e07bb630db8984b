"""SARG04 sifting and the detector-blinding intercept-resend attack.

SARG04 reuses the four BB84 states but encodes the bit in the basis choice:
Alice sends one of 0_a, 0_b, 1_a, 1_b (bit first, detector letter second) and
at sifting announces a two-state set holding the sent state plus a random
state of the opposite bit. Bob keeps a bit only when his result is orthogonal
to exactly one announced state, which identifies the other one as sent.

Eve measures with a replica receiver and resends the state with *both* the
bit and the letter flipped, at the control value named after her detected
letter: t_a blinds detector b, t_b blinds detector a. Mapping onto the shared
:class:`~fakedstates.detmodel.MismatchSpec` convention, letter a is detector
0, letter b is detector 1, t_a is t0 and t_b is t1.
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
from .stats import AttackStats, ExactStats, stats_from_counters

N_UNIFORMS = 8
LETTERS = ("a", "b")


@dataclass(frozen=True)
class SargState:
    """Protocol state: bit value plus detector letter."""

    bit: int
    letter: int  # 0 = a, 1 = b

    def __post_init__(self):
        if self.bit not in (0, 1) or self.letter not in (0, 1):
            raise ValueError("bit and letter must be 0 or 1")

    @property
    def angle(self) -> float:
        """Equator angle; same-bit opposite-letter states are antipodal."""
        return 90.0 * self.bit + 180.0 * self.letter

    @property
    def index(self) -> int:
        return 2 * self.bit + self.letter

    @property
    def name(self) -> str:
        return f"{self.bit}_{LETTERS[self.letter]}"

    @classmethod
    def from_index(cls, idx: int) -> "SargState":
        return cls(bit=idx >> 1, letter=idx & 1)


def _overlap(s1: SargState, s2: SargState) -> Fraction:
    """Exact overlap between protocol states (always a multiple of 90 deg)."""
    c = {0: 1, 90: 0, 180: -1, 270: 0}[int(s1.angle - s2.angle) % 360]
    return Fraction(1 + c, 2)


@dataclass(frozen=True)
class AnnouncedPair:
    """The sifting announcement: one state of each bit value."""

    letter_of_bit0: int
    letter_of_bit1: int

    @property
    def states(self) -> tuple:
        return (SargState(0, self.letter_of_bit0), SargState(1, self.letter_of_bit1))

    @property
    def index(self) -> int:
        return 2 * self.letter_of_bit0 + self.letter_of_bit1

    @classmethod
    def announce(cls, sent: SargState, opposite_letter: int) -> "AnnouncedPair":
        letters = [0, 0]
        letters[sent.bit] = sent.letter
        letters[1 - sent.bit] = opposite_letter
        return cls(letter_of_bit0=letters[0], letter_of_bit1=letters[1])


def sift(announced: AnnouncedPair, bob_result: SargState) -> Optional[int]:
    """Keep a bit iff Bob's result is orthogonal to exactly one announced state.

    Returns the kept bit (the *other* announced state's bit) or None.
    """
    orth = [
        _overlap(bob_result, candidate) == 0 for candidate in announced.states
    ]
    if orth[0] == orth[1]:
        return None
    return 1 if orth[0] else 0


def faked_state_for(eve_outcome: SargState) -> tuple:
    """Flip bit and letter; tag with the control named by Eve's detected letter."""
    return (SargState(1 - eve_outcome.bit, 1 - eve_outcome.letter), eve_outcome.letter)


def p_arrive_given_0a(m: MismatchSpec):
    """Probability that a 0_a qubit arrives and survives sifting."""
    return (
        m.eta_0_t0 + m.eta_0_t1 + 13 * m.eta_1_t0 + m.eta_1_t1
    ) / 32


def p_arrive(m: MismatchSpec):
    """Arrival probability averaged over Alice's four state choices."""
    return (m.eta_0_t0 + 7 * m.eta_0_t1 + 7 * m.eta_1_t0 + m.eta_1_t1) / 32


def analytic_qber(m: MismatchSpec):
    """Closed-form QBER of the attack for arbitrary efficiencies."""
    num = 4 * (m.eta_0_t1 + m.eta_1_t0)
    den = m.eta_0_t0 + 7 * m.eta_0_t1 + 7 * m.eta_1_t0 + m.eta_1_t1
    if den == 0:
        raise UndefinedQberError("all four efficiencies are zero")
    return num / den


def symmetric_qber(eta):
    """QBER for symmetric curves: 4*eta/(1+7*eta)."""
    if not 0 <= eta <= 1:
        raise ValueError(f"eta={eta} outside [0, 1]")
    return 4 * eta / (1 + 7 * eta)


def _eta_by_letter(m: MismatchSpec) -> tuple:
    # detector a == detector 0, t_a == t0
    return (
        (Fraction(m.eta_0_t0), Fraction(m.eta_0_t1)),
        (Fraction(m.eta_1_t0), Fraction(m.eta_1_t1)),
    )


def bob_outcome_probability(
    resent: SargState, control: int, bob_basis: int, letter: int, m: MismatchSpec
) -> Fraction:
    """P(Bob's detector ``letter`` fires | resent state, control, Bob's basis)."""
    eta = _eta_by_letter(m)
    return _overlap(resent, SargState(bob_basis, letter)) * eta[letter][control]


def enumerate_attack(
    m: MismatchSpec,
    brightness: tuple = (1, 1),
    alice_state: Optional[SargState] = None,
) -> ExactStats:
    """Exact enumeration over state, bases, detectors, and announcements.

    With ``alice_state`` the enumeration conditions on that state (useful for
    extracting per-state coefficients); otherwise it averages all four.
    """
    eta = _eta_by_letter(m)
    w = (Fraction(brightness[0]), Fraction(brightness[1]))
    half = Fraction(1, 2)
    states = [alice_state] if alice_state is not None else [
        SargState.from_index(i) for i in range(4)
    ]
    w_state = Fraction(1, len(states))

    arrival = Fraction(0)
    error = Fraction(0)
    for sent in states:
        for e_basis in (0, 1):
            p_a = _overlap(sent, SargState(e_basis, 0))
            for e_letter, w_proj in ((0, p_a), (1, 1 - p_a)):
                if w_proj == 0:
                    continue
                eve = SargState(e_basis, e_letter)
                resent, tau = faked_state_for(eve)
                for b_basis in (0, 1):
                    pb_a = _overlap(resent, SargState(b_basis, 0))
                    for b_letter, w_bp in ((0, pb_a), (1, 1 - pb_a)):
                        if w_bp == 0:
                            continue
                        click = min(Fraction(1), w[tau] * eta[b_letter][tau])
                        if click == 0:
                            continue
                        outcome = SargState(b_basis, b_letter)
                        for coin in (0, 1):
                            pair = AnnouncedPair.announce(sent, coin)
                            kept = sift(pair, outcome)
                            if kept is None:
                                continue
                            weight = (
                                w_state * half * w_proj * half * w_bp * click * half
                            )
                            arrival += weight
                            if kept != sent.bit:
                                error += weight
    return ExactStats(arrival=arrival, error=error)


# ---------------------------------------------------------------------------
# Monte Carlo kernels. Uniform columns: 0 alice state, 1 eve basis,
# 2 eve projection, 3 eve detection, 4 bob basis, 5 bob projection,
# 6 bob detection, 7 announcement coin. Counters use the shared layout
# (letter a counts as detector 0, t_a as control 0).
# ---------------------------------------------------------------------------


def _attack_loop(u, eo, res_idx, res_tau, pa, cks, ann, sift_tab, known_tab, bit_tab, eve_eff):
    counters = np.zeros(10, dtype=np.int64)
    n = u.shape[0]
    for i in range(n):
        s = int(u[i, 0] * 4.0)
        if s > 3:
            s = 3
        eb = 0 if u[i, 1] < 0.5 else 1
        el = 0 if u[i, 2] < eo[s, eb] else 1
        if u[i, 3] >= eve_eff:
            continue
        counters[9] += 1
        e_idx = 2 * eb + el
        r = res_idx[e_idx]
        tau = res_tau[e_idx]
        counters[3 + tau] += 1
        bb = 0 if u[i, 4] < 0.5 else 1
        lo = 0 if u[i, 5] < pa[r, bb] else 1
        if u[i, 6] < cks[lo, tau]:
            counters[5 + tau] += 1
            counters[7 + lo] += 1
            coin = 0 if u[i, 7] < 0.5 else 1
            pair = ann[s, coin]
            kept = sift_tab[pair, 2 * bb + lo]
            if kept >= 0:
                counters[0] += 1
                if kept != bit_tab[s]:
                    counters[1] += 1
                if known_tab[r, tau, pair] == 1:
                    counters[2] += 1
    return counters


def _attack_numpy(u, eo, res_idx, res_tau, pa, cks, ann, sift_tab, known_tab, bit_tab, eve_eff):
    s = np.minimum((u[:, 0] * 4.0).astype(np.int64), 3)
    eb = (u[:, 1] >= 0.5).astype(np.int64)
    el = (u[:, 2] >= eo[s, eb]).astype(np.int64)
    eve_kept = u[:, 3] < eve_eff
    e_idx = 2 * eb + el
    r = res_idx[e_idx]
    tau = res_tau[e_idx]
    bb = (u[:, 4] >= 0.5).astype(np.int64)
    lo = (u[:, 5] >= pa[r, bb]).astype(np.int64)
    clicked = eve_kept & (u[:, 6] < cks[lo, tau])
    coin = (u[:, 7] >= 0.5).astype(np.int64)
    pair = ann[s, coin]
    kept_bit = sift_tab[pair, 2 * bb + lo]
    kept = clicked & (kept_bit >= 0)
    counters = np.zeros(10, dtype=np.int64)
    counters[0] = np.count_nonzero(kept)
    counters[1] = np.count_nonzero(kept & (kept_bit != bit_tab[s]))
    counters[2] = np.count_nonzero(kept & (known_tab[r, tau, pair] == 1))
    counters[3] = np.count_nonzero(eve_kept & (tau == 0))
    counters[4] = np.count_nonzero(eve_kept & (tau == 1))
    counters[5] = np.count_nonzero(clicked & (tau == 0))
    counters[6] = np.count_nonzero(clicked & (tau == 1))
    counters[7] = np.count_nonzero(clicked & (lo == 0))
    counters[8] = np.count_nonzero(clicked & (lo == 1))
    counters[9] = np.count_nonzero(eve_kept)
    return counters


_attack_kernel = dispatch(_attack_numpy, _attack_loop)


def attack_tables(m: MismatchSpec, brightness: tuple = (1, 1)) -> tuple:
    """Precomputed projection/click/sift/knowledge tables for the kernels."""
    eta = _eta_by_letter(m)
    w = (Fraction(brightness[0]), Fraction(brightness[1]))

    eo = np.zeros((4, 2))
    pa = np.zeros((4, 2))
    for idx, basis in product(range(4), (0, 1)):
        state = SargState.from_index(idx)
        eo[idx, basis] = float(_overlap(state, SargState(basis, 0)))
        pa[idx, basis] = eo[idx, basis]

    res_idx = np.zeros(4, dtype=np.int64)
    res_tau = np.zeros(4, dtype=np.int64)
    for eb, el in product((0, 1), repeat=2):
        resent, tau = faked_state_for(SargState(eb, el))
        res_idx[2 * eb + el] = resent.index
        res_tau[2 * eb + el] = tau

    cks = np.zeros((2, 2))
    for letter, tau in product((0, 1), repeat=2):
        cks[letter, tau] = float(min(Fraction(1), w[tau] * eta[letter][tau]))

    ann = np.zeros((4, 2), dtype=np.int64)
    for idx, coin in product(range(4), (0, 1)):
        ann[idx, coin] = AnnouncedPair.announce(SargState.from_index(idx), coin).index

    sift_tab = np.full((4, 4), -1, dtype=np.int64)
    for l0, l1, bb, lo in product((0, 1), repeat=4):
        pair = AnnouncedPair(l0, l1)
        kept = sift(pair, SargState(bb, lo))
        sift_tab[pair.index, 2 * bb + lo] = -1 if kept is None else kept

    known_tab = np.zeros((4, 2, 4), dtype=np.uint8)
    for r_idx, tau, l0, l1 in product(range(4), (0, 1), (0, 1), (0, 1)):
        resent = SargState.from_index(r_idx)
        pair = AnnouncedPair(l0, l1)
        kept_bits = set()
        for bb, lo in product((0, 1), repeat=2):
            outcome = SargState(bb, lo)
            if _overlap(resent, outcome) * w[tau] * eta[lo][tau] == 0:
                continue
            kept = sift(pair, outcome)
            if kept is not None:
                kept_bits.add(kept)
        known_tab[r_idx, tau, pair.index] = 1 if len(kept_bits) == 1 else 0

    bit_tab = np.array([idx >> 1 for idx in range(4)], dtype=np.int64)
    return (eo, res_idx, res_tau, pa, cks, ann, sift_tab, known_tab, bit_tab)


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
    tables = attack_tables(m, brightness)
    c = engine.accumulate_blocks(
        n, N_UNIFORMS, _attack_kernel, tables + (float(eve_efficiency),), seed, workers
    )
    return stats_from_counters("sarg04", n, c)
