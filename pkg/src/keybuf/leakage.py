"""Exact brute-force leakage oracle.

Materializes the full joint law of (messages, Eve observations) for a small
"analytic" protocol instance by enumerating messages and encoder
randomization exactly and marginalizing channel noise, then evaluates the
scheme's secrecy decomposition on that table:

  total window leakage = wiretap term + keyed (OTP) term

where the wiretap term is bounded by the measured per-slot leakage and the
keyed term must vanish when keys come from outside the window and the
key-source transmissions are themselves secret.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import reduce

import numpy as np

from .buffer import KeyBuffer
from .channel import Dmc, WiretapChannelSpec, bsc, noise_channel
from .errors import BudgetExceeded, NonNormalized, OverlappingGroups, SeparationViolated
from .protocol import ProtocolConfig, plan_slot, resolve_input_distribution
from .transport import LinearCode, codeword_table, identity_code, repetition_code
from .wiretap import (
    BinnedCodebook,
    build_codebook,
    eve_observation_distributions,
    sequence_likelihoods,
)

DEFAULT_BUDGET = 10**7
EXACT_TOL = 1e-9

#: Marker for keys that are ideal uniform bits Eve never observes.
IDEAL_KEY = "ideal"


# ---------------------------------------------------------------------------
# Joint distributions over tuples of discrete variables


@dataclass(frozen=True)
class JointDistribution:
    """Dense probability table over named discrete variables."""

    variable_labels: tuple
    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if len(self.variable_labels) != t.ndim:
            raise OverlappingGroups("one label per table axis required")
        total = t.sum()
        if abs(total - 1.0) > EXACT_TOL:
            raise NonNormalized(f"table mass {total} deviates from 1")
        if t.min() < -1e-15:
            raise NonNormalized("negative probability entry")
        object.__setattr__(self, "table", t)

    @property
    def variable_arities(self) -> tuple:
        return self.table.shape

    def axes(self, labels) -> list[int]:
        return [self.variable_labels.index(lb) for lb in labels]

    def marginal(self, labels) -> np.ndarray:
        """Marginal table with axes ordered as in `labels`."""
        keep = self.axes(labels)
        drop = tuple(i for i in range(self.table.ndim) if i not in keep)
        summed = self.table.sum(axis=drop) if drop else self.table
        remaining = [lb for lb in self.variable_labels if lb in labels]
        order = [remaining.index(lb) for lb in labels]
        return np.transpose(summed, order)


def _plogp(p: np.ndarray) -> float:
    mask = p > 0
    return float((p[mask] * np.log2(p[mask])).sum())


def conditional_mi(joint: JointDistribution, group_a, group_b, group_c=()) -> float:
    """Exact I(A;B|C) in bits; clamped to be nonnegative.

    Empty A or B gives 0.  C may be empty (plain mutual information).
    """
    a, b, c = list(group_a), list(group_b), list(group_c)
    combined = a + b + c
    if len(set(combined)) != len(combined):
        raise OverlappingGroups(f"groups overlap: {combined}")
    unknown = [lb for lb in combined if lb not in joint.variable_labels]
    if unknown:
        raise OverlappingGroups(f"unknown variables: {unknown}")
    if not a or not b:
        return 0.0
    p = joint.marginal(a + b + c)
    na = int(np.prod([joint.table.shape[i] for i in joint.axes(a)]))
    nb = int(np.prod([joint.table.shape[i] for i in joint.axes(b)]))
    p = p.reshape(na, nb, -1)
    # I(A;B|C) = H(A,C) + H(B,C) - H(A,B,C) - H(C), written with sums of p log p
    value = (
        _plogp(p.reshape(-1))
        + _plogp(p.sum(axis=(0, 1)))
        - _plogp(p.sum(axis=1).reshape(-1))
        - _plogp(p.sum(axis=0).reshape(-1))
    )
    if value < -EXACT_TOL:
        raise NonNormalized(f"conditional MI {value} below -{EXACT_TOL}")
    return max(value, 0.0)


# ---------------------------------------------------------------------------
# Analytic protocol instances


@dataclass(frozen=True)
class AnalyticOtp:
    """One keyed message inside a slot.

    `key` is either IDEAL_KEY or a tuple of (source_slot, bit_offset) pairs,
    one per message bit, addressing the source slot's pushed bit stream
    (wiretap-message bits first, then that slot's OTP plaintext bits).
    """

    message_bits: int
    code: LinearCode
    key: tuple | str


@dataclass(frozen=True)
class AnalyticSlot:
    codebook: BinnedCodebook
    eve: Dmc
    otp: tuple = ()


@dataclass(frozen=True)
class AnalyticInstance:
    """A fully specified small protocol run for exact enumeration."""

    slots: tuple  # AnalyticSlot, slot j = slots[j-1]
    N1: int

    @property
    def num_slots(self) -> int:
        return len(self.slots)

    @property
    def window(self) -> range:
        return range(max(1, self.num_slots - self.N1), self.num_slots + 1)

    def slot(self, j: int) -> AnalyticSlot:
        return self.slots[j - 1]

    def bin_bits(self, j: int) -> int:
        bins = self.slot(j).codebook.num_bins
        width = bins.bit_length() - 1
        if 2**width != bins:
            raise SeparationViolated(
                f"slot {j} bin count {bins} is not a power of two; its bits "
                "cannot serve as keys"
            )
        return width


def w1_label(j: int) -> str:
    return f"W{j}_1"


def w2_label(j: int) -> str:
    return f"W{j}_2"


def z1_label(j: int) -> str:
    return f"Z{j}_1"


def z2_label(j: int) -> str:
    return f"Z{j}_2"


def window_w1(instance: AnalyticInstance) -> list[str]:
    return [w1_label(j) for j in instance.window]


def window_w2(instance: AnalyticInstance) -> list[str]:
    return [w2_label(j) for j in instance.window if instance.slot(j).otp]


def all_z(instance: AnalyticInstance) -> list[str]:
    labels = []
    for j in range(1, instance.num_slots + 1):
        labels.append(z1_label(j))
        if instance.slot(j).otp:
            labels.append(z2_label(j))
    return labels


def old_z(instance: AnalyticInstance) -> list[str]:
    cutoff = instance.window.start
    return [lb for lb in all_z(instance) if int(lb[1 : lb.index("_")]) < cutoff]


def window_z2(instance: AnalyticInstance) -> list[str]:
    return [z2_label(j) for j in instance.window if instance.slot(j).otp]


def check_separation(instance: AnalyticInstance) -> list[tuple[int, int]]:
    """(window slot, offending key-source slot) pairs; empty means separated."""
    cutoff = instance.window.start - 1  # k - N1 - 1
    bad = []
    for j in instance.window:
        for otp in instance.slot(j).otp:
            if otp.key == IDEAL_KEY:
                continue
            for source, _ in otp.key:
                if source > cutoff:
                    bad.append((j, source))
    return bad


def _require_separation(instance: AnalyticInstance, allow_violation: bool):
    bad = check_separation(instance)
    if bad and not allow_violation:
        raise SeparationViolated(
            f"window keys drawn from inside the window: {sorted(set(bad))}"
        )


# ---------------------------------------------------------------------------
# Exact joint construction


def _int_to_bits(value: int, width: int) -> np.ndarray:
    shifts = np.arange(width - 1, -1, -1)
    return ((value >> shifts) & 1).astype(np.uint8)


def _bits_to_int(bits: np.ndarray) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def build_joint(
    instance: AnalyticInstance, budget: int = DEFAULT_BUDGET
) -> JointDistribution:
    """Exact joint pmf over all messages and all Eve output sequences.

    Encoder randomization and ideal keys are marginalized analytically;
    channel noise enters through exact per-sequence transition products.
    Variable order: all message variables (slot order), then all Eve
    observation variables (slot order).
    """
    w_labels, w_arities = [], []
    z_labels, z_arities = [], []
    wz1_pmf = {}  # slot -> (bins, |Z|^n)
    ct_pmf = {}  # (slot, msg index) -> (2^mb, |Z|^n_bits)
    ideal_pmf = {}  # (slot, msg index) -> flat pmf used for ideal keys

    for j in range(1, instance.num_slots + 1):
        slot = instance.slot(j)
        w_labels.append(w1_label(j))
        w_arities.append(slot.codebook.num_bins)
        if slot.otp:
            w_labels.append(w2_label(j))
            w_arities.append(2 ** sum(o.message_bits for o in slot.otp))
        z_labels.append(z1_label(j))
        z_arities.append(slot.eve.output_alphabet_size**slot.codebook.n)
        wz1_pmf[j] = eve_observation_distributions(slot.codebook, slot.eve, budget)
        if slot.otp:
            dim = 1
            for i, otp in enumerate(slot.otp):
                table = codeword_table(otp.code).astype(np.int64)
                pmf = sequence_likelihoods(slot.eve, table)
                ct_pmf[(j, i)] = pmf
                ideal_pmf[(j, i)] = pmf.mean(axis=0)
                dim *= slot.eve.output_alphabet_size**otp.code.n_bits
            z_labels.append(z2_label(j))
            z_arities.append(dim)

    size = math.prod(w_arities) * math.prod(z_arities)
    if size > budget:
        raise BudgetExceeded(
            f"joint table of {size} cells exceeds the budget {budget}", size=size
        )

    table = np.zeros(tuple(w_arities) + tuple(z_arities))
    weight = 1.0 / math.prod(w_arities)
    w_index = {lb: i for i, lb in enumerate(w_labels)}

    for assignment in np.ndindex(*w_arities):
        # Bit streams each slot pushes to the buffer, for key lookups.
        slot_bits = {}
        for j in range(1, instance.num_slots + 1):
            slot = instance.slot(j)
            pieces = [_int_to_bits(assignment[w_index[w1_label(j)]], instance.bin_bits(j))]
            if slot.otp:
                total = sum(o.message_bits for o in slot.otp)
                pieces.append(
                    _int_to_bits(assignment[w_index[w2_label(j)]], total)
                )
            slot_bits[j] = np.concatenate(pieces)

        z_vectors = []
        for j in range(1, instance.num_slots + 1):
            slot = instance.slot(j)
            z_vectors.append(wz1_pmf[j][assignment[w_index[w1_label(j)]]])
            if slot.otp:
                w2_bits = _int_to_bits(
                    assignment[w_index[w2_label(j)]],
                    sum(o.message_bits for o in slot.otp),
                )
                pmf = None
                offset = 0
                for i, otp in enumerate(slot.otp):
                    v = w2_bits[offset : offset + otp.message_bits]
                    offset += otp.message_bits
                    if otp.key == IDEAL_KEY:
                        part = ideal_pmf[(j, i)]
                    else:
                        key = np.array(
                            [slot_bits[src][off] for src, off in otp.key],
                            dtype=np.uint8,
                        )
                        part = ct_pmf[(j, i)][_bits_to_int(v ^ key)]
                    pmf = part if pmf is None else np.kron(pmf, part)
                z_vectors.append(pmf)

        block = reduce(np.multiply.outer, z_vectors)
        table[assignment] = weight * block

    return JointDistribution(
        variable_labels=tuple(w_labels + z_labels), table=table
    )


# ---------------------------------------------------------------------------
# Leakage decomposition checks


@dataclass(frozen=True)
class WiretapTermResult:
    term: float
    per_slot_wiretap_leakage: dict
    epsilon: float
    n: int
    bound: float  # (N1+1) * n * epsilon -- window of N1+1 wiretap messages
    bound_strict: float  # N1 * n * epsilon as literally stated
    passed: bool


def verify_wiretap_term(
    joint: JointDistribution,
    instance: AnalyticInstance,
    allow_violation: bool = False,
) -> WiretapTermResult:
    """Bound the window wiretap messages' leakage by the measured per-slot
    leakage coefficient."""
    _require_separation(instance, allow_violation)
    term = conditional_mi(joint, window_w1(instance), all_z(instance))
    per_slot = {
        j: conditional_mi(joint, [w1_label(j)], [z1_label(j)])
        for j in instance.window
    }
    n = max(instance.slot(j).codebook.n for j in instance.window)
    epsilon = max(per_slot.values()) / n
    bound = (instance.N1 + 1) * n * epsilon
    return WiretapTermResult(
        term=term,
        per_slot_wiretap_leakage=per_slot,
        epsilon=epsilon,
        n=n,
        bound=bound,
        bound_strict=instance.N1 * n * epsilon,
        passed=term <= bound + EXACT_TOL,
    )


@dataclass(frozen=True)
class KeyedTermResult:
    term: float
    independence_old: float  # I(window OTP msgs ; pre-window Eve outputs)
    independence_obs: float  # I(window OTP msgs ; window OTP observations)
    markov: float  # I(old outputs ; window OTP outputs | window messages)
    passed: bool

    @property
    def structure_ok(self) -> bool:
        return (
            self.independence_old <= EXACT_TOL
            and self.independence_obs <= EXACT_TOL
            and self.markov <= EXACT_TOL
        )


def verify_keyed_term(
    joint: JointDistribution,
    instance: AnalyticInstance,
    allow_violation: bool = False,
) -> KeyedTermResult:
    """The keyed messages' conditional leakage, which must vanish exactly
    when keys are separated and the key sources are secret."""
    _require_separation(instance, allow_violation)
    w1 = window_w1(instance)
    w2 = window_w2(instance)
    term = conditional_mi(joint, w2, all_z(instance), w1)
    return KeyedTermResult(
        term=term,
        independence_old=conditional_mi(joint, w2, old_z(instance)),
        independence_obs=conditional_mi(joint, w2, window_z2(instance)),
        markov=conditional_mi(joint, old_z(instance), window_z2(instance), w1 + w2),
        passed=term <= EXACT_TOL,
    )


@dataclass(frozen=True)
class LeakageReport:
    k: int
    N1: int
    n: int
    epsilon: float
    per_slot_wiretap_leakage: dict
    wiretap_term: float
    keyed_term: float
    total_leakage_bits: float
    bound: float
    bound_strict: float
    chain_ok: bool
    passed: bool

    def csv_row(self) -> str:
        return (
            f"{self.k},{self.N1},{self.n},{self.epsilon:.12g},"
            f"{self.wiretap_term:.12g},{self.keyed_term:.12g},"
            f"{self.total_leakage_bits:.12g},{self.bound:.12g},"
            f"{'pass' if self.passed else 'fail'}"
        )

    CSV_HEADER = "k,N1,n,epsilon,wiretap_term,keyed_term,total,bound,pass"

    def text_report(self) -> str:
        lines = [
            f"window: slots {self.k - self.N1}..{self.k}  (N1={self.N1}, n={self.n})",
            f"per-slot wiretap leakage (bits):",
        ]
        for j, v in sorted(self.per_slot_wiretap_leakage.items()):
            lines.append(f"  slot {j}: {v:.9f}")
        lines += [
            f"epsilon (max per-slot leakage / n): {self.epsilon:.9f}",
            f"wiretap term:   {self.wiretap_term:.9f}",
            f"keyed term:     {self.keyed_term:.9f}",
            f"total leakage:  {self.total_leakage_bits:.9f}",
            f"bound (N1+1)*n*eps: {self.bound:.9f}   (N1*n*eps: {self.bound_strict:.9f})",
            f"chain-rule identity: {'ok' if self.chain_ok else 'VIOLATED'}",
            f"verdict: {'pass' if self.passed else 'FAIL'}",
        ]
        return "\n".join(lines)


def verify_window(
    joint: JointDistribution,
    instance: AnalyticInstance,
    allow_violation: bool = False,
) -> LeakageReport:
    """Full window leakage report with the chain-rule decomposition."""
    wt = verify_wiretap_term(joint, instance, allow_violation)
    kt = verify_keyed_term(joint, instance, allow_violation)
    total = conditional_mi(
        joint, window_w1(instance) + window_w2(instance), all_z(instance)
    )
    chain_ok = abs(total - wt.term - kt.term) <= EXACT_TOL
    passed = (
        chain_ok
        and wt.passed
        and kt.passed
        and total <= wt.bound + EXACT_TOL
    )
    return LeakageReport(
        k=instance.num_slots,
        N1=instance.N1,
        n=wt.n,
        epsilon=wt.epsilon,
        per_slot_wiretap_leakage=wt.per_slot_wiretap_leakage,
        wiretap_term=wt.term,
        keyed_term=kt.term,
        total_leakage_bits=total,
        bound=wt.bound,
        bound_strict=wt.bound_strict,
        chain_ok=chain_ok,
        passed=passed,
    )


# ---------------------------------------------------------------------------
# Shipped instances


def with_ideal_keys(instance: AnalyticInstance) -> AnalyticInstance:
    """Same instance with every buffered key replaced by an ideal pad."""
    slots = tuple(
        replace(
            slot,
            otp=tuple(replace(o, key=IDEAL_KEY) for o in slot.otp),
        )
        for slot in instance.slots
    )
    return AnalyticInstance(slots=slots, N1=instance.N1)


def toy_instance(seed: int = 7, eve_crossover: float = 0.2) -> AnalyticInstance:
    """Shipped 3-slot verification instance (n=2, binary, M=1, N1=1).

    Slot 1 supplies the keys and is shielded from Eve (her channel there is
    pure noise), miniaturizing the steady-state regime where key-source
    messages are already secure.  Slots 2 and 3 form the window; each sends
    one wiretap-coded bit plus one padded bit keyed from slot 1.
    """
    rng = np.random.default_rng(seed)
    uniform = np.array([0.5, 0.5])
    source = build_codebook(2, 4, 1, uniform, rng)
    window_book = build_codebook(2, 2, 2, uniform, rng)
    eve = bsc(eve_crossover)
    pad_code = repetition_code(1, 2)
    return AnalyticInstance(
        slots=(
            AnalyticSlot(codebook=source, eve=noise_channel(2, 2)),
            AnalyticSlot(
                codebook=window_book,
                eve=eve,
                otp=(AnalyticOtp(message_bits=1, code=pad_code, key=((1, 0),)),),
            ),
            AnalyticSlot(
                codebook=window_book,
                eve=eve,
                otp=(AnalyticOtp(message_bits=1, code=pad_code, key=((1, 1),)),),
            ),
        ),
        N1=1,
    )


def negative_control_instance(eve_crossover: float = 0.1) -> AnalyticInstance:
    """2-slot control whose slot-2 key is slot 1's message, which sits inside
    the N1=1 window: the keyed term must come out strictly positive."""
    book = BinnedCodebook(
        n=1,
        num_bins=2,
        codewords_per_bin=1,
        codewords=np.array([[[0]], [[1]]]),
        input_distribution=np.array([0.5, 0.5]),
    )
    eve = bsc(eve_crossover)
    return AnalyticInstance(
        slots=(
            AnalyticSlot(codebook=book, eve=eve),
            AnalyticSlot(
                codebook=book,
                eve=eve,
                otp=(AnalyticOtp(message_bits=1, code=identity_code(1), key=((1, 0),)),),
            ),
        ),
        N1=1,
    )


def from_protocol(
    config: ProtocolConfig,
    channels: WiretapChannelSpec,
    shielded_slots=(),
) -> AnalyticInstance:
    """Analytic instance mirroring `run_simulation`'s deterministic structure.

    Key provenance is replayed through the same FIFO bookkeeping the
    simulator uses (bit counts per slot are deterministic).  Slots listed in
    `shielded_slots` get a pure-noise Eve channel.
    """
    rng = np.random.default_rng(config.seed)
    dist = resolve_input_distribution(config, channels)
    codebook = build_codebook(
        config.n, config.num_bins, config.codewords_per_bin, dist, rng
    )
    code = config.otp_code()
    shielded = set(shielded_slots)
    buf = KeyBuffer(config.buffer_capacity)
    slots = []
    for k in range(1, config.num_slots + 1):
        plan = plan_slot(config, k)
        affordable = buf.occupancy_bits // config.message_bits
        actual_otp = min(plan.otp_messages, affordable)
        draw = buf.draw(actual_otp * config.message_bits)
        per_bit = [
            (slot, offset + i)
            for slot, offset, count in draw.ranges
            for i in range(count)
        ]
        otp = tuple(
            AnalyticOtp(
                message_bits=config.message_bits,
                code=code,
                key=tuple(
                    per_bit[i * config.message_bits : (i + 1) * config.message_bits]
                ),
            )
            for i in range(actual_otp)
        )
        eve = noise_channel(2, 2) if k in shielded else channels.eve
        slots.append(AnalyticSlot(codebook=codebook, eve=eve, otp=otp))
        buf.push(k, np.zeros((1 + actual_otp) * config.message_bits, dtype=np.uint8))
    return AnalyticInstance(slots=tuple(slots), N1=config.N1)
