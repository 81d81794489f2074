"""Keyed transport: one-time-pad encryption followed by a small linear code.

The pad carries the secrecy; the linear code only provides a measurable,
tunable reliability over the main channel.  Binary channel inputs only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import Dmc
from .errors import (
    BudgetExceeded,
    DimensionMismatch,
    LengthMismatch,
    SymbolOutOfRange,
)
from .wiretap import sequence_likelihoods

MAX_MESSAGE_BITS = 16


def _gf2_rank(matrix: np.ndarray) -> int:
    m = matrix.copy() % 2
    rank = 0
    rows, cols = m.shape
    for col in range(cols):
        pivot = None
        for r in range(rank, rows):
            if m[r, col]:
                pivot = r
                break
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        for r in range(rows):
            if r != rank and m[r, col]:
                m[r] ^= m[rank]
        rank += 1
        if rank == rows:
            break
    return rank


@dataclass(frozen=True)
class LinearCode:
    """Binary linear block code given by a full-row-rank generator matrix."""

    generator: np.ndarray  # shape (k_bits, n_bits)

    def __post_init__(self):
        g = np.array(self.generator, dtype=np.uint8) % 2
        if g.ndim != 2:
            raise DimensionMismatch("generator must be a 2-D bit matrix")
        k, n = g.shape
        if k > n:
            raise DimensionMismatch(f"k={k} exceeds n={n}")
        if _gf2_rank(g) != k:
            raise DimensionMismatch("generator is not full row rank over GF(2)")
        g.setflags(write=False)
        object.__setattr__(self, "generator", g)

    @property
    def k_bits(self) -> int:
        return self.generator.shape[0]

    @property
    def n_bits(self) -> int:
        return self.generator.shape[1]


def identity_code(k: int) -> LinearCode:
    return LinearCode(np.eye(k, dtype=np.uint8))


def repetition_code(k: int, repeats: int) -> LinearCode:
    """Bit-major repetition: bit i occupies positions i*repeats..(i+1)*repeats-1."""
    g = np.zeros((k, k * repeats), dtype=np.uint8)
    for i in range(k):
        g[i, i * repeats : (i + 1) * repeats] = 1
    return LinearCode(g)


@dataclass(frozen=True)
class KeyedCiphertext:
    encrypted_bits: np.ndarray
    codeword: np.ndarray
    key_provenance: tuple  # ((source_slot, count), ...); -1 marks external keys


def as_bits(seq) -> np.ndarray:
    bits = np.asarray(seq, dtype=np.uint8)
    if bits.size and bits.max() > 1:
        raise SymbolOutOfRange("bit sequences may contain only 0 and 1")
    return bits


def otp_encrypt(message, key) -> np.ndarray:
    """Bitwise XOR; involutive."""
    m = as_bits(message)
    k = as_bits(key)
    if m.shape != k.shape:
        raise LengthMismatch(f"message length {m.size} != key length {k.size}")
    return m ^ k


def codeword_of(code: LinearCode, bits) -> np.ndarray:
    b = as_bits(bits)
    if b.size != code.k_bits:
        raise LengthMismatch(f"got {b.size} bits for a k={code.k_bits} code")
    return (b @ code.generator) % 2


def encode_keyed(message, key, code: LinearCode, key_provenance=None) -> KeyedCiphertext:
    """XOR the message with the key, then encode with the linear code."""
    encrypted = otp_encrypt(message, key)
    if encrypted.size != code.k_bits:
        raise DimensionMismatch(
            f"message length {encrypted.size} != code k_bits {code.k_bits}"
        )
    if key_provenance is None:
        key_provenance = ((-1, int(encrypted.size)),)
    return KeyedCiphertext(
        encrypted_bits=encrypted,
        codeword=codeword_of(code, encrypted),
        key_provenance=tuple(key_provenance),
    )


def message_table(k: int) -> np.ndarray:
    """All 2^k messages as bit rows, lexicographic (bit 0 most significant)."""
    values = np.arange(2**k, dtype=np.int64)
    shifts = np.arange(k - 1, -1, -1)
    return ((values[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


def codeword_table(code: LinearCode) -> np.ndarray:
    return (message_table(code.k_bits) @ code.generator) % 2


def decode_keyed(received, key, code: LinearCode, channel_main: Dmc) -> np.ndarray:
    """ML decode over all 2^k codewords, then strip the pad.

    Ties go to the lexicographically first message.
    """
    if code.k_bits > MAX_MESSAGE_BITS:
        raise BudgetExceeded(
            f"k_bits={code.k_bits} exceeds the exhaustive-decoding cap "
            f"{MAX_MESSAGE_BITS}",
            size=2**code.k_bits,
        )
    y = np.asarray(received, dtype=np.int64)
    if y.shape != (code.n_bits,):
        raise LengthMismatch(f"received length {y.size} != n_bits {code.n_bits}")
    if channel_main.input_alphabet_size != 2:
        raise SymbolOutOfRange("keyed transport supports binary-input channels only")
    table = codeword_table(code)
    likelihood = channel_main.transition[table.astype(np.int64), y].prod(axis=1)
    best = int(np.argmax(likelihood))
    return otp_encrypt(message_table(code.k_bits)[best], key)


def exact_block_error_probability(
    code: LinearCode, channel_main: Dmc, budget: int = 10**7
) -> float:
    """Exact ML block-error probability averaged over uniform code inputs."""
    if channel_main.input_alphabet_size != 2:
        raise SymbolOutOfRange("binary-input channels only")
    size = channel_main.output_alphabet_size**code.n_bits
    if size > budget:
        raise BudgetExceeded(f"|Y|^n = {size} exceeds budget {budget}", size=size)
    table = codeword_table(code)
    likelihood = sequence_likelihoods(channel_main, table.astype(np.int64))
    winner = np.argmax(likelihood, axis=0)
    idx = np.arange(table.shape[0])
    correct = (likelihood * (winner[None, :] == idx[:, None])).sum(axis=1)
    return float(1.0 - correct.mean())


def generator_to_text(code: LinearCode) -> str:
    """Serialize as `k n` header plus k rows of n bits."""
    lines = [f"{code.k_bits} {code.n_bits}"]
    for row in code.generator:
        lines.append(" ".join(str(int(b)) for b in row))
    return "\n".join(lines) + "\n"


def generator_from_text(text: str) -> LinearCode:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    k, n = (int(tok) for tok in lines[0].split())
    rows = [[int(tok) for tok in ln.split()] for ln in lines[1 : 1 + k]]
    g = np.array(rows, dtype=np.uint8)
    if g.shape != (k, n):
        raise DimensionMismatch(f"expected a {k}x{n} generator")
    return LinearCode(g)
