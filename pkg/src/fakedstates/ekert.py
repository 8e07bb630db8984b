"""Entanglement-based (singlet + CHSH check) protocol and the faked-pair source.

Alice measures along axes a1/a2/a3 = 0/45/90 degrees, Bob along b1/b2/b3 =
45/90/135; the pairs (a2,b1) and (a3,b2) are totally anticorrelated and feed
the key, while (a1,b1), (a1,b3), (a3,b1), (a3,b3) feed the CHSH sum

    S = E(a1,b1) - E(a1,b3) + E(a3,b1) + E(a3,b3),

which a real singlet pins at -2*sqrt(2). At each party one detector serves
the +1 outcome in every basis and the other serves -1, and both pairs have a
total efficiency mismatch: control slot 0 (t_plus) blinds the -1 detector,
slot 1 (t_minus) blinds +1.

Eve replaces the pair source with classical mixtures of faked-state pairs:

* alpha: circular polarizations with opposite controls; uniform coincidence
  probability 1/4 and perfect anticorrelation in every basis pair.
* beta: the -1 eigenstates of a3/b1 at t_plus (or +1 eigenstates at t_minus);
  contributes only to E(a1,b3) among the CHSH terms and never to the key.
* gamma: the same construction on a2/b2; feeds all four CHSH terms equally.

Correlation coefficients are per-pair normalized (coincidences only), which is
what lets sub-unit coincidence probabilities masquerade as strong correlations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import engine
from ._backend import dispatch
from .detmodel import MismatchSpec
from .errors import UnsupportedMismatchError
from .polar import EquatorState, PoleState, State, overlap_probability
from .stats import AttackStats

ALICE_AXES = (0.0, 45.0, 90.0)
BOB_AXES = (45.0, 90.0, 135.0)

KEY_PAIRS = ((1, 0), (2, 1))
CHSH_PAIRS = ((0, 0), (0, 2), (2, 0), (2, 2))
CHSH_SIGNS = (1.0, -1.0, 1.0, 1.0)

ALL_PAIRS = tuple(product(range(3), range(3)))

#: Control slots: 0 blinds the -1 detector (t_plus), 1 blinds +1 (t_minus).
T_PLUS, T_MINUS = 0, 1

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class BasisPair:
    alice: int
    bob: int

    def __post_init__(self):
        if not (0 <= self.alice <= 2 and 0 <= self.bob <= 2):
            raise ValueError("basis indices must be 0..2")

    @property
    def key(self) -> tuple:
        return (self.alice, self.bob)

    @property
    def in_key_set(self) -> bool:
        return self.key in KEY_PAIRS

    @property
    def in_chsh_set(self) -> bool:
        return self.key in CHSH_PAIRS

    @property
    def name(self) -> str:
        return f"a{self.alice + 1}b{self.bob + 1}"


def pair_angle_delta(pair: BasisPair) -> float:
    return ALICE_AXES[pair.alice] - BOB_AXES[pair.bob]


def singlet_correlation(pair: BasisPair) -> float:
    """Honest singlet correlation: -cos of the axis angle difference."""
    return -math.cos(math.radians(pair_angle_delta(pair)))


@dataclass(frozen=True)
class FakedPair:
    """One emitted pair: states and control slots for both receivers."""

    state_alice: State
    control_alice: int
    state_bob: State
    control_bob: int


@dataclass(frozen=True)
class FakedPairCombination:
    """Equiprobable variants forming one symmetric source combination."""

    name: str
    variants: Tuple[FakedPair, ...]

    def __post_init__(self):
        if not self.variants:
            raise ValueError("combination needs at least one variant")


def _minus(angle: float) -> EquatorState:
    return EquatorState(angle + 180.0)


def combination_alpha() -> FakedPairCombination:
    """Circular polarizations with opposite controls, both orderings."""
    return FakedPairCombination(
        "alpha",
        (
            FakedPair(PoleState("north"), T_PLUS, PoleState("north"), T_MINUS),
            FakedPair(PoleState("north"), T_MINUS, PoleState("north"), T_PLUS),
        ),
    )


def combination_alpha_equatorial() -> FakedPairCombination:
    """The simplified alpha: per-party mixtures of one basis' two eigenstates."""
    a3, b1 = ALICE_AXES[2], BOB_AXES[0]
    variants = []
    for ca, cb in ((T_PLUS, T_MINUS), (T_MINUS, T_PLUS)):
        for sa in (EquatorState(a3), _minus(a3)):
            for sb in (EquatorState(b1), _minus(b1)):
                variants.append(FakedPair(sa, ca, sb, cb))
    return FakedPairCombination("alpha-equatorial", tuple(variants))


def combination_beta() -> FakedPairCombination:
    """Feeds only E(a1,b3) of the CHSH terms; dark in the other five pairs."""
    a3, b1 = ALICE_AXES[2], BOB_AXES[0]
    return FakedPairCombination(
        "beta",
        (
            FakedPair(_minus(a3), T_PLUS, _minus(b1), T_PLUS),
            FakedPair(EquatorState(a3), T_MINUS, EquatorState(b1), T_MINUS),
        ),
    )


def combination_gamma() -> FakedPairCombination:
    """Feeds all four CHSH terms with equal weight; dark in the key pairs."""
    a2, b2 = ALICE_AXES[1], BOB_AXES[1]
    return FakedPairCombination(
        "gamma",
        (
            FakedPair(_minus(a2), T_PLUS, _minus(b2), T_PLUS),
            FakedPair(EquatorState(a2), T_MINUS, EquatorState(b2), T_MINUS),
        ),
    )


def default_combinations() -> tuple:
    return (combination_alpha(), combination_beta(), combination_gamma())


@dataclass(frozen=True)
class MixtureWeights:
    """Probabilities of the source combinations; a point on the simplex."""

    p_alpha: float
    p_beta: float
    p_gamma: float = 0.0

    def __post_init__(self):
        total = self.p_alpha + self.p_beta + self.p_gamma
        if min(self.p_alpha, self.p_beta, self.p_gamma) < -1e-12:
            raise ValueError("weights must be non-negative")
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {total}")

    def as_tuple(self) -> tuple:
        return (self.p_alpha, self.p_beta, self.p_gamma)


TOTAL_MISMATCH = MismatchSpec.total()


def _party_click_probabilities(
    state: State, control: int, axis: float, spec: MismatchSpec
) -> tuple:
    """(P(+1 click), P(-1 click)) for one receiver; total mismatch only."""
    if not spec.is_total:
        raise UnsupportedMismatchError(
            "faked-pair correlations are defined for total mismatch only"
        )
    eta_plus = (spec.eta_0_t0, spec.eta_0_t1)[control]
    eta_minus = (spec.eta_1_t0, spec.eta_1_t1)[control]
    p_plus = overlap_probability(state, axis) * float(eta_plus)
    p_minus = overlap_probability(state, axis + 180.0) * float(eta_minus)
    return (p_plus, p_minus)


def combination_correlation(
    combo: FakedPairCombination,
    pair: BasisPair,
    alice_spec: MismatchSpec = TOTAL_MISMATCH,
    bob_spec: MismatchSpec = TOTAL_MISMATCH,
) -> tuple:
    """Coincidence probability d and correlation E of one combination.

    Returns (d, E); E is None when the combination never produces a
    coincidence for this basis pair (the per-pair normalization has nothing
    to normalize).
    """
    axis_a = ALICE_AXES[pair.alice]
    axis_b = BOB_AXES[pair.bob]
    weight = 1.0 / len(combo.variants)
    d = 0.0
    num = 0.0
    for variant in combo.variants:
        pap, pam = _party_click_probabilities(
            variant.state_alice, variant.control_alice, axis_a, alice_spec
        )
        pbp, pbm = _party_click_probabilities(
            variant.state_bob, variant.control_bob, axis_b, bob_spec
        )
        d += weight * (pap + pam) * (pbp + pbm)
        num += weight * (pap * pbp + pam * pbm - pap * pbm - pam * pbp)
    if d == 0.0:
        return (0.0, None)
    return (d, num / d)


@dataclass(frozen=True)
class CorrelationMatrix:
    """Per-basis-pair coincidence probabilities and correlation coefficients."""

    d: Dict[tuple, float]
    e: Dict[tuple, Optional[float]]

    def chsh_terms(self) -> tuple:
        return tuple(self.e[p] for p in CHSH_PAIRS)

    @property
    def s(self) -> float:
        return chsh(self.e)


def chsh(e) -> float:
    """CHSH sum from a correlation table (mapping or CorrelationMatrix)."""
    table = e.e if isinstance(e, CorrelationMatrix) else e
    terms = []
    for pair, sign in zip(CHSH_PAIRS, CHSH_SIGNS):
        value = table[pair]
        if value is None:
            raise ValueError(f"no coincidences for CHSH pair {pair}; S undefined")
        terms.append(sign * value)
    return sum(terms)


def honest_matrix() -> CorrelationMatrix:
    """Real singlet with perfect detectors: every pair coincides, E = -cos."""
    d = {p: 1.0 for p in ALL_PAIRS}
    e = {p: singlet_correlation(BasisPair(*p)) for p in ALL_PAIRS}
    return CorrelationMatrix(d=d, e=e)


def mixture_correlations(
    weights: MixtureWeights,
    combos: Optional[Sequence[FakedPairCombination]] = None,
    alice_spec: MismatchSpec = TOTAL_MISMATCH,
    bob_spec: MismatchSpec = TOTAL_MISMATCH,
    normalization: str = "per_pair",
) -> CorrelationMatrix:
    """Correlations of the weighted mixture.

    ``per_pair`` (the protocol assumption): E = sum_k P_k d_k E_k / sum_k
    P_k d_k per pair. ``global``: no per-pair renormalization; E is the
    unconditional correlation sum_k P_k d_k E_k, which is how the mixture
    would look if outcome probabilities were not conditioned on coincidence.
    """
    if normalization not in ("per_pair", "global"):
        raise ValueError(f"unknown normalization {normalization!r}")
    if combos is None:
        combos = default_combinations()
    w = weights.as_tuple()[: len(combos)]
    d_out: Dict[tuple, float] = {}
    e_out: Dict[tuple, Optional[float]] = {}
    for key in ALL_PAIRS:
        pair = BasisPair(*key)
        d_mix = 0.0
        num = 0.0
        for pk, combo in zip(w, combos):
            if pk == 0.0:
                continue
            d_k, e_k = combination_correlation(combo, pair, alice_spec, bob_spec)
            if e_k is None:
                continue
            d_mix += pk * d_k
            num += pk * d_k * e_k
        d_out[key] = d_mix
        if d_mix == 0.0:
            e_out[key] = None
        elif normalization == "per_pair":
            e_out[key] = num / d_mix
        else:
            e_out[key] = num
    return CorrelationMatrix(d=d_out, e=e_out)


def solve_weights(
    target_terms: tuple = (-1.0 / SQRT2, 1.0 / SQRT2, -1.0 / SQRT2, -1.0 / SQRT2),
) -> MixtureWeights:
    """Solve for (P_alpha, P_beta, P_gamma) hitting the four CHSH terms.

    The alpha/beta/gamma structure forces E(a1,b1) = E(a3,b1) = E(a3,b3)
    (call it e) while E(a1,b3) = f can sit higher. Writing x = P_alpha/4,
    y = P_gamma * d_gamma, z = P_beta/4, the per-pair normalization gives

        (y - x) / (y + x) = e        ->  y/x = (1+e)/(1-e)
        (z + y - x) / (z + y + x) = f -> (z+y)/x = (1+f)/(1-f)

    whose non-negative solution exists iff -1 <= e <= f < 1. For the default
    equal-magnitude target the ratio is (P_alpha : P_beta : P_gamma) =
    (1 : 4*sqrt(2) : 2).
    """
    e11, e13, e31, e33 = target_terms
    if not (e11 == e31 == e33):
        raise ValueError(
            "infeasible target: alpha/gamma mixing forces equal E(a1,b1), "
            "E(a3,b1), E(a3,b3)"
        )
    e, f = e11, e13
    if not -1.0 <= e < 1.0 or not -1.0 <= f < 1.0:
        raise ValueError("target terms must lie in [-1, 1)")
    if f < e:
        raise ValueError("infeasible target: beta can only raise E(a1,b3)")
    d_gamma, e_gamma = combination_correlation(
        combination_gamma(), BasisPair(0, 0)
    )
    assert e_gamma == 1.0
    x = 1.0
    y = x * (1.0 + e) / (1.0 - e)
    z = x * (1.0 + f) / (1.0 - f) - y
    p_alpha = 4.0 * x
    p_gamma = y / d_gamma
    p_beta = 4.0 * z
    total = p_alpha + p_beta + p_gamma
    return MixtureWeights(p_alpha / total, p_beta / total, p_gamma / total)


def exact_three_combination_weights() -> MixtureWeights:
    """Closed form (1 : 4*sqrt(2) : 2) normalized."""
    total = 3.0 + 4.0 * SQRT2
    return MixtureWeights(1.0 / total, 4.0 * SQRT2 / total, 2.0 / total)


def exact_two_combination_weights() -> MixtureWeights:
    """Closed form (2 - sqrt(2), sqrt(2) - 1) for the alpha/beta mix."""
    return MixtureWeights(2.0 - SQRT2, SQRT2 - 1.0, 0.0)


def s_of_beta(p_beta: float) -> float:
    """CHSH value of the alpha/beta mixture: S = -2 - 2*P_beta (P_alpha = 1-P_beta).

    Monotone decreasing; approaches -4 as P_beta -> 1 (where the three
    alpha-only terms lose their coincidences entirely).
    """
    if not 0.0 <= p_beta < 1.0:
        raise ValueError("p_beta must lie in [0, 1)")
    return -2.0 - 2.0 * p_beta


def side_effects_report(
    weights: MixtureWeights,
    combos: Optional[Sequence[FakedPairCombination]] = None,
) -> List[dict]:
    """Per-pair coincidence table with the honest singlet reference.

    Shows what a consistency check would see: coincidence probabilities vary
    wildly across basis pairs and the three unused correlation coefficients
    are not reproduced.
    """
    matrix = mixture_correlations(weights, combos)
    rows = []
    for key in ALL_PAIRS:
        pair = BasisPair(*key)
        rows.append(
            {
                "pair": pair.name,
                "d": matrix.d[key],
                "e_mix": matrix.e[key],
                "e_singlet": singlet_correlation(pair),
                "in_key_set": pair.in_key_set,
                "in_chsh_set": pair.in_chsh_set,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# Monte Carlo kernels. Uniform columns: 0 combination, 1 variant,
# 2 alice basis, 3 bob basis, 4 alice outcome, 5 bob outcome. Counters:
# 0..35 joint outcome counts per (pair, oa*2+ob); 36..44 emitted pairs per
# basis pair; 45 key coincidences, 46 key errors, 47 key determined.
# ---------------------------------------------------------------------------

N_UNIFORMS = 6
_N_COUNTERS = 48


def _pairs_loop(u, cumw, nv, pap, pam, pbp, pbm, knd, key_flag):
    counters = np.zeros(48, dtype=np.int64)
    n = u.shape[0]
    n_combos = len(nv)
    for i in range(n):
        k = 0
        while k < n_combos - 1 and u[i, 0] >= cumw[k]:
            k += 1
        v = int(u[i, 1] * nv[k])
        if v > nv[k] - 1:
            v = nv[k] - 1
        ai = int(u[i, 2] * 3.0)
        if ai > 2:
            ai = 2
        bj = int(u[i, 3] * 3.0)
        if bj > 2:
            bj = 2
        pair = ai * 3 + bj
        counters[36 + pair] += 1
        pa_plus = pap[k, v, ai]
        pa_minus = pam[k, v, ai]
        if u[i, 4] < pa_plus:
            oa = 0
        elif u[i, 4] < pa_plus + pa_minus:
            oa = 1
        else:
            continue
        pb_plus = pbp[k, v, bj]
        pb_minus = pbm[k, v, bj]
        if u[i, 5] < pb_plus:
            ob = 0
        elif u[i, 5] < pb_plus + pb_minus:
            ob = 1
        else:
            continue
        counters[pair * 4 + oa * 2 + ob] += 1
        if key_flag[pair] == 1:
            counters[45] += 1
            if oa == ob:
                counters[46] += 1
            if knd[k, v] == 1:
                counters[47] += 1
    return counters


def _pairs_numpy(u, cumw, nv, pap, pam, pbp, pbm, knd, key_flag):
    n = u.shape[0]
    k = np.minimum(
        np.searchsorted(cumw[:-1], u[:, 0], side="right"), len(nv) - 1
    )
    v = np.minimum((u[:, 1] * nv[k]).astype(np.int64), nv[k] - 1)
    ai = np.minimum((u[:, 2] * 3.0).astype(np.int64), 2)
    bj = np.minimum((u[:, 3] * 3.0).astype(np.int64), 2)
    pair = ai * 3 + bj
    pa_plus = pap[k, v, ai]
    pa_minus = pam[k, v, ai]
    a_plus = u[:, 4] < pa_plus
    a_minus = ~a_plus & (u[:, 4] < pa_plus + pa_minus)
    a_click = a_plus | a_minus
    oa = np.where(a_plus, 0, 1)
    pb_plus = pbp[k, v, bj]
    pb_minus = pbm[k, v, bj]
    b_plus = u[:, 5] < pb_plus
    b_minus = ~b_plus & (u[:, 5] < pb_plus + pb_minus)
    b_click = b_plus | b_minus
    ob = np.where(b_plus, 0, 1)
    coinc = a_click & b_click
    counters = np.zeros(48, dtype=np.int64)
    joint = pair * 4 + oa * 2 + ob
    np.add.at(counters[:36], joint[coinc], 1)
    np.add.at(counters[36:45], pair, 1)
    key = coinc & (key_flag[pair] == 1)
    counters[45] = np.count_nonzero(key)
    counters[46] = np.count_nonzero(key & (oa == ob))
    counters[47] = np.count_nonzero(key & (knd[k, v] == 1))
    return counters


_pairs_kernel = dispatch(_pairs_numpy, _pairs_loop)


def _combo_tables(
    weights: MixtureWeights,
    combos: Sequence[FakedPairCombination],
    alice_spec: MismatchSpec,
    bob_spec: MismatchSpec,
) -> tuple:
    w = weights.as_tuple()[: len(combos)]
    if abs(sum(w) - 1.0) > 1e-9:
        raise ValueError("weights do not cover the supplied combinations")
    cumw = np.cumsum(np.asarray(w, dtype=np.float64))
    cumw[-1] = 1.0
    nv = np.array([len(c.variants) for c in combos], dtype=np.int64)
    vmax = int(nv.max())
    k_n = len(combos)
    pap = np.zeros((k_n, vmax, 3))
    pam = np.zeros((k_n, vmax, 3))
    pbp = np.zeros((k_n, vmax, 3))
    pbm = np.zeros((k_n, vmax, 3))
    knd = np.zeros((k_n, vmax), dtype=np.uint8)
    for k, combo in enumerate(combos):
        for v, variant in enumerate(combo.variants):
            for idx in range(3):
                pap[k, v, idx], pam[k, v, idx] = _party_click_probabilities(
                    variant.state_alice, variant.control_alice, ALICE_AXES[idx], alice_spec
                )
                pbp[k, v, idx], pbm[k, v, idx] = _party_click_probabilities(
                    variant.state_bob, variant.control_bob, BOB_AXES[idx], bob_spec
                )
            deterministic = all(
                pap[k, v, i] == 0.0 or pam[k, v, i] == 0.0 for i in range(3)
            ) and all(pbp[k, v, j] == 0.0 or pbm[k, v, j] == 0.0 for j in range(3))
            knd[k, v] = 1 if deterministic else 0
    key_flag = np.zeros(9, dtype=np.int64)
    for i, j in KEY_PAIRS:
        key_flag[i * 3 + j] = 1
    return (cumw, nv, pap, pam, pbp, pbm, knd, key_flag)


class EkertRun(NamedTuple):
    stats: AttackStats
    matrix: CorrelationMatrix
    emitted: np.ndarray
    coincidences: np.ndarray
    s: float
    s_sigma: float


def simulate(
    n: int,
    weights: MixtureWeights,
    seed: int,
    combos: Optional[Sequence[FakedPairCombination]] = None,
    alice_spec: MismatchSpec = TOTAL_MISMATCH,
    bob_spec: MismatchSpec = TOTAL_MISMATCH,
    workers: int = 1,
) -> EkertRun:
    """Sample faked pairs, tally coincidences, and estimate E, S, and key QBER."""
    if n <= 0:
        raise ValueError("need n > 0 pairs")
    if combos is None:
        combos = default_combinations()
    tables = _combo_tables(weights, combos, alice_spec, bob_spec)
    c = engine.accumulate_blocks(n, N_UNIFORMS, _pairs_kernel, tables, seed, workers)

    joint = c[:36].reshape(9, 4)
    emitted = c[36:45].reshape(3, 3)
    coincidences = joint.sum(axis=1).reshape(3, 3)
    d_emp: Dict[tuple, float] = {}
    e_emp: Dict[tuple, Optional[float]] = {}
    var_e: Dict[tuple, float] = {}
    for i, j in ALL_PAIRS:
        flat = joint[i * 3 + j]
        tot = int(flat.sum())
        d_emp[(i, j)] = tot / int(emitted[i, j]) if emitted[i, j] else 0.0
        if tot == 0:
            e_emp[(i, j)] = None
            var_e[(i, j)] = math.inf
        else:
            e = (int(flat[0]) + int(flat[3]) - int(flat[1]) - int(flat[2])) / tot
            e_emp[(i, j)] = e
            var_e[(i, j)] = max(1.0 - e * e, 1.0 / tot) / tot
    matrix = CorrelationMatrix(d=d_emp, e=e_emp)
    s = chsh(matrix)
    s_sigma = math.sqrt(sum(var_e[p] for p in CHSH_PAIRS))
    stats = AttackStats(
        protocol="ekert",
        rounds=n,
        sifted=int(c[45]),
        errors=int(c[46]),
        known=int(c[47]),
        coincidences=int(coincidences.sum()),
    )
    return EkertRun(
        stats=stats,
        matrix=matrix,
        emitted=emitted,
        coincidences=coincidences,
        s=s,
        s_sigma=s_sigma,
    )
