"""Slot scheduler and end-to-end simulation.

Slot 1 carries a single wiretap-coded message in one minislot.  Every later
slot has M+1 minislots: the first carries a wiretap-coded message, the rest
carry one-time-padded messages keyed from the buffer.  Message counts ramp
up by one per slot until the cap 1 + C_over_Rs * M.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .buffer import KeyBuffer, fill_slots
from .channel import WiretapChannelSpec, analyze, transmit
from .errors import DimensionMismatch
from . import transport, wiretap


@dataclass
class ProtocolConfig:
    """Everything a simulation run needs besides the channels."""

    n: int = 8  # channel uses per minislot
    M: int = 1  # OTP minislots per slot (slots >= 2 have M+1 minislots)
    N1: int = 1  # secrecy window length in slots
    num_slots: int = 20
    C_over_Rs: int = 1
    message_bits: int = 2  # bits per source message (finite-n stand-in for nR_s)
    seed: int = 0
    buffer_capacity: int | None = None
    genie_mode: bool = False
    codewords_per_bin: int = 2
    otp_repeats: int = 1  # OTP code is bit-major repetition of this factor
    input_dist: str = "secrecy"  # "secrecy" | "main" | "uniform"
    grid_step: float = 0.01

    def __post_init__(self):
        if self.C_over_Rs < 1 or int(self.C_over_Rs) != self.C_over_Rs:
            raise DimensionMismatch("C_over_Rs must be a positive integer")
        if self.N1 >= self.num_slots:
            raise DimensionMismatch("N1 must be smaller than num_slots")
        otp_block = self.message_bits * self.otp_repeats
        if self.C_over_Rs * otp_block > self.n:
            raise DimensionMismatch(
                f"{self.C_over_Rs} OTP codewords of {otp_block} uses do not fit "
                f"in an n={self.n} minislot"
            )

    @property
    def message_cap(self) -> int:
        return 1 + self.C_over_Rs * self.M

    @property
    def num_bins(self) -> int:
        return 2**self.message_bits

    @property
    def rate_secret(self) -> float:
        """Effective R_s of the configured codes, bits per channel use."""
        return self.message_bits / self.n

    @property
    def rate_main(self) -> float:
        """Effective main-channel rate C of the configured codes."""
        return self.C_over_Rs * self.message_bits / self.n

    def otp_code(self) -> transport.LinearCode:
        return transport.repetition_code(self.message_bits, self.otp_repeats)


@dataclass(frozen=True)
class SlotPlan:
    slot_index: int
    num_messages: int
    num_minislots: int
    wiretap_messages: int = 1

    @property
    def otp_messages(self) -> int:
        return self.num_messages - self.wiretap_messages


def plan_slot(config: ProtocolConfig, k: int) -> SlotPlan:
    """Ramp-up schedule: slot 1 carries one message in one minislot; slot k
    carries min(k, cap) messages across M+1 minislots."""
    if k < 1:
        raise ValueError("slots are numbered from 1")
    if k == 1:
        return SlotPlan(slot_index=1, num_messages=1, num_minislots=1)
    return SlotPlan(
        slot_index=k,
        num_messages=min(k, config.message_cap),
        num_minislots=config.M + 1,
    )


def key_bits_needed(config: ProtocolConfig, plan: SlotPlan) -> int:
    return plan.otp_messages * config.message_bits


@dataclass
class SlotTrace:
    """Realized record of one slot, with everything the oracle and the
    acceptance checks need."""

    plan: SlotPlan
    wiretap_message: int
    wiretap_decoded: int
    otp_messages: list  # plaintext bit arrays actually transmitted
    otp_decoded: list
    key_provenance: tuple  # ((source_slot, count), ...)
    newest_key_source: int
    occupancy_before: int
    occupancy_after: int  # B_k, end of slot k
    arrived_bits: int
    drawn_bits: int
    dropped_bits: int
    starved_messages: int
    eve_wiretap: np.ndarray = field(repr=False, default=None)
    eve_otp: list = field(repr=False, default_factory=list)
    channel_uses: int = 0

    @property
    def errors(self) -> int:
        wrong = int(self.wiretap_decoded != self.wiretap_message)
        for sent, got in zip(self.otp_messages, self.otp_decoded):
            wrong += int(not np.array_equal(sent, got))
        return wrong

    @property
    def num_messages(self) -> int:
        return 1 + len(self.otp_messages)


def _bin_bits(value: int, width: int) -> np.ndarray:
    shifts = np.arange(width - 1, -1, -1)
    return ((value >> shifts) & 1).astype(np.uint8)


def resolve_input_distribution(
    config: ProtocolConfig, channels: WiretapChannelSpec
) -> np.ndarray:
    if config.input_dist == "uniform":
        m = channels.main.input_alphabet_size
        return np.full(m, 1.0 / m)
    result = analyze(channels, grid_step=config.grid_step)
    if config.input_dist == "main":
        return result.maximizing_input_main
    return result.maximizing_input


def run_simulation(config: ProtocolConfig, channels: WiretapChannelSpec) -> list[SlotTrace]:
    """Execute all slots; deterministic under the config seed.

    Key starvation never aborts: the slot simply transmits fewer OTP
    messages and the shortfall is recorded on the trace.
    """
    if channels.main.input_alphabet_size != 2:
        raise DimensionMismatch("the protocol requires binary channel inputs")
    rng = np.random.default_rng(config.seed)
    dist = resolve_input_distribution(config, channels)
    codebook = wiretap.build_codebook(
        config.n, config.num_bins, config.codewords_per_bin, dist, rng
    )
    code = config.otp_code()
    buf = KeyBuffer(config.buffer_capacity)
    traces: list[SlotTrace] = []

    for k in range(1, config.num_slots + 1):
        plan = plan_slot(config, k)
        occupancy_before = buf.occupancy_bits

        planned_otp = plan.otp_messages
        affordable = buf.occupancy_bits // config.message_bits
        actual_otp = min(planned_otp, affordable)
        starved = planned_otp - actual_otp
        draw = buf.draw(actual_otp * config.message_bits)

        # Wiretap minislot: degraded sampling, Eve's symbols come from Bob's.
        w = int(rng.integers(config.num_bins))
        enc = wiretap.encode(codebook, w, rng)
        y1 = transmit(channels.main, enc.codeword, rng)
        z1 = transmit(channels.degrading, y1, rng)
        w_hat = w if config.genie_mode else wiretap.decode(codebook, y1, channels.main)

        sent, decoded, eve_otp = [], [], []
        for i in range(actual_otp):
            v = rng.integers(0, 2, size=config.message_bits).astype(np.uint8)
            key = draw.bits[i * config.message_bits : (i + 1) * config.message_bits]
            ct = transport.encode_keyed(v, key, code)
            y2 = transmit(channels.main, ct.codeword, rng)
            z2 = transmit(channels.degrading, y2, rng)
            v_hat = (
                v.copy()
                if config.genie_mode
                else transport.decode_keyed(y2, key, code, channels.main)
            )
            sent.append(v)
            decoded.append(v_hat)
            eve_otp.append(z2)

        slot_bits = np.concatenate(
            [_bin_bits(w, config.message_bits)] + sent
            if sent
            else [_bin_bits(w, config.message_bits)]
        )
        dropped = buf.push(k, slot_bits)

        traces.append(
            SlotTrace(
                plan=plan,
                wiretap_message=w,
                wiretap_decoded=w_hat,
                otp_messages=sent,
                otp_decoded=decoded,
                key_provenance=draw.provenance,
                newest_key_source=draw.newest_source_slot,
                occupancy_before=occupancy_before,
                occupancy_after=buf.occupancy_bits,
                arrived_bits=int(slot_bits.size),
                drawn_bits=int(draw.bits.size),
                dropped_bits=dropped,
                starved_messages=starved,
                eve_wiretap=z1,
                eve_otp=eve_otp,
                channel_uses=config.n * plan.num_minislots,
            )
        )
    return traces


def asymptotic_rate(r_s: float, c: float, m: int) -> float:
    """Per-slot secrecy rate limit (R_s + C*M) / (M + 1); tends to C."""
    return (r_s + c * m) / (m + 1)


def achieved_rate(traces: list[SlotTrace], config: ProtocolConfig) -> float:
    """Correctly delivered message bits per channel use over the whole run."""
    if not traces:
        raise ValueError("need at least one trace")
    delivered = 0
    uses = 0
    for t in traces:
        if t.wiretap_decoded == t.wiretap_message:
            delivered += config.message_bits
        for sent, got in zip(t.otp_messages, t.otp_decoded):
            if np.array_equal(sent, got):
                delivered += config.message_bits
        uses += t.channel_uses
    return delivered / uses


def wilson_interval(successes: int, trials: int, z: float = 1.959964) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials == 0:
        return (0.0, 1.0)
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    return (max(center - half, 0.0), min(center + half, 1.0))


def error_rate(traces: list[SlotTrace]) -> tuple[float, tuple[float, float]]:
    """Fraction of slots with any mis-decoded message, with its Wilson 95%
    interval."""
    if not traces:
        raise ValueError("need at least one trace")
    bad = sum(1 for t in traces if t.errors > 0)
    return bad / len(traces), wilson_interval(bad, len(traces))


def separation_slot(config: ProtocolConfig) -> int:
    """First slot index from which key-age separation is expected to hold
    (ramp-up and buffer fill both complete)."""
    fill = fill_slots(config.rate_main, config.M, config.N1, config.rate_secret)
    return max(fill, (config.N1 + 1) * config.message_cap) + 1


def key_age_violations(traces: list[SlotTrace], n1: int, n2: int) -> list[int]:
    """Slots k >= n2 whose draw uses a key newer than slot k - n1 - 1."""
    bad = []
    for t in traces:
        k = t.plan.slot_index
        if k >= n2 and t.drawn_bits and t.newest_key_source > k - n1 - 1:
            bad.append(k)
    return bad


TRACE_COLUMNS = "k,num_messages,key_bits_drawn,newest_key_source,B_k,errors,channel_uses"


def traces_to_csv(traces: list[SlotTrace]) -> str:
    out = io.StringIO()
    out.write(TRACE_COLUMNS + "\n")
    for t in traces:
        out.write(
            f"{t.plan.slot_index},{t.num_messages},{t.drawn_bits},"
            f"{t.newest_key_source},{t.occupancy_after},{t.errors},{t.channel_uses}\n"
        )
    return out.getvalue()


def buffer_trace(traces: list[SlotTrace]) -> list[tuple[int, int, int, int]]:
    """(B_k, arrived, drawn, dropped) rows for `occupancy_trace_check`."""
    return [
        (t.occupancy_after, t.arrived_bits, t.drawn_bits, t.dropped_bits)
        for t in traces
    ]
