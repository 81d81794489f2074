"""Random-binning wiretap code with exhaustive ML decoding.

Bins play the role of messages; the extra codewords inside a bin are the
encoder's private randomization.  Everything here is desk-scale: block
lengths and codebook sizes are capped so that decoding and leakage can be
computed by full enumeration.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import Dmc, mutual_information
from .errors import BudgetExceeded, DimensionMismatch, MessageOutOfRange

MAX_CODEWORDS = 2**16
MAX_BLOCK = 16
DEFAULT_ENUM_BUDGET = 10**7


@dataclass(frozen=True)
class BinnedCodebook:
    """Wiretap codebook: `codewords[bin, index]` is a length-n input sequence."""

    n: int
    num_bins: int
    codewords_per_bin: int
    codewords: np.ndarray  # shape (num_bins, codewords_per_bin, n)
    input_distribution: np.ndarray

    def __post_init__(self):
        cw = np.array(self.codewords, dtype=np.int64)
        if cw.shape != (self.num_bins, self.codewords_per_bin, self.n):
            raise DimensionMismatch("codeword table shape mismatch")
        if self.num_bins < 1 or self.codewords_per_bin < 1:
            raise DimensionMismatch("need at least one bin and one codeword per bin")
        cw.setflags(write=False)
        object.__setattr__(self, "codewords", cw)
        dist = np.array(self.input_distribution, dtype=float)
        dist.setflags(write=False)
        object.__setattr__(self, "input_distribution", dist)

    @property
    def flat_codewords(self) -> np.ndarray:
        """Codewords in (bin, index) lexicographic order, shape (B*P, n)."""
        return self.codewords.reshape(-1, self.n)


@dataclass(frozen=True)
class WiretapEncoding:
    bin: int
    chosen_index: int
    codeword: np.ndarray


def build_codebook(
    n: int,
    num_bins: int,
    codewords_per_bin: int,
    input_distribution,
    rng: np.random.Generator,
) -> BinnedCodebook:
    """Draw every codeword symbol i.i.d. from the input distribution."""
    if num_bins * codewords_per_bin > MAX_CODEWORDS:
        raise BudgetExceeded(
            f"{num_bins * codewords_per_bin} codewords exceed the "
            f"{MAX_CODEWORDS} exhaustive-decoding budget",
            size=num_bins * codewords_per_bin,
        )
    if n > MAX_BLOCK:
        raise BudgetExceeded(f"block length {n} exceeds {MAX_BLOCK}", size=n)
    dist = np.asarray(input_distribution, dtype=float)
    symbols = rng.choice(len(dist), size=(num_bins, codewords_per_bin, n), p=dist)
    return BinnedCodebook(
        n=n,
        num_bins=num_bins,
        codewords_per_bin=codewords_per_bin,
        codewords=symbols,
        input_distribution=dist,
    )


def encode(codebook: BinnedCodebook, message: int, rng: np.random.Generator) -> WiretapEncoding:
    """Pick a uniformly random codeword from the message's bin."""
    if not 0 <= message < codebook.num_bins:
        raise MessageOutOfRange(f"message {message} not in [0, {codebook.num_bins})")
    idx = int(rng.integers(codebook.codewords_per_bin))
    return WiretapEncoding(
        bin=message, chosen_index=idx, codeword=codebook.codewords[message, idx]
    )


def decode(codebook: BinnedCodebook, received, channel_main: Dmc) -> int:
    """Maximum-likelihood decoding over all codewords.

    Ties are broken by the lowest (bin, index) pair, which is the flat
    codeword order, so results are deterministic.
    """
    y = np.asarray(received, dtype=np.int64)
    if y.shape != (codebook.n,):
        raise DimensionMismatch(f"received length {y.shape} != n={codebook.n}")
    likelihood = channel_main.transition[codebook.flat_codewords, y].prod(axis=1)
    return int(np.argmax(likelihood)) // codebook.codewords_per_bin


def sequence_likelihoods(channel: Dmc, sequences: np.ndarray) -> np.ndarray:
    """For each input sequence, the pmf over all output sequences.

    Output sequences are indexed lexicographically (first symbol is the most
    significant digit base |output alphabet|).  Returns shape
    (num_sequences, |output|^n).
    """
    seqs = np.asarray(sequences, dtype=np.int64)
    m, n = seqs.shape
    out = channel.output_alphabet_size
    result = np.ones((m, 1))
    for i in range(n):
        rows = channel.transition[seqs[:, i]]  # (m, out)
        result = (result[:, :, None] * rows[:, None, :]).reshape(m, -1)
    assert result.shape == (m, out**n)
    return result


def eve_observation_distributions(
    codebook: BinnedCodebook, channel_eve: Dmc, budget: int = DEFAULT_ENUM_BUDGET
) -> np.ndarray:
    """p(z^n | bin) for every bin, marginalized over the bin randomization."""
    size = channel_eve.output_alphabet_size**codebook.n
    if size > budget:
        raise BudgetExceeded(
            f"|Z|^n = {size} exceeds the enumeration budget {budget}", size=size
        )
    per_codeword = sequence_likelihoods(channel_eve, codebook.flat_codewords)
    return per_codeword.reshape(
        codebook.num_bins, codebook.codewords_per_bin, -1
    ).mean(axis=1)


def exact_single_slot_leakage(
    codebook: BinnedCodebook, channel_eve: Dmc, budget: int = DEFAULT_ENUM_BUDGET
) -> float:
    """Exact I(W; Z^n) in bits for a uniform message through Eve's channel."""
    p_z_given_w = eve_observation_distributions(codebook, channel_eve, budget)
    joint = p_z_given_w / codebook.num_bins
    return mutual_information(joint)


def exact_block_error_probability(
    codebook: BinnedCodebook, channel_main: Dmc, budget: int = DEFAULT_ENUM_BUDGET
) -> float:
    """Exact probability that ML decoding returns the wrong bin, averaged over
    a uniform message and uniform bin randomization."""
    size = channel_main.output_alphabet_size**codebook.n
    if size > budget:
        raise BudgetExceeded(
            f"|Y|^n = {size} exceeds the enumeration budget {budget}", size=size
        )
    likelihood = sequence_likelihoods(channel_main, codebook.flat_codewords)
    winner = np.argmax(likelihood, axis=0) // codebook.codewords_per_bin
    bins = np.repeat(np.arange(codebook.num_bins), codebook.codewords_per_bin)
    correct = (likelihood * (winner[None, :] == bins[:, None])).sum(axis=1)
    return float(1.0 - correct.mean())


def codebook_to_text(codebook: BinnedCodebook) -> str:
    """Serialize: header `n bins per_bin`, then one codeword per line in
    (bin, index) order."""
    lines = [f"{codebook.n} {codebook.num_bins} {codebook.codewords_per_bin}"]
    for word in codebook.flat_codewords:
        lines.append(" ".join(str(int(s)) for s in word))
    return "\n".join(lines) + "\n"


def codebook_from_text(text: str, input_distribution=None) -> BinnedCodebook:
    """Inverse of `codebook_to_text`; round-trips bit-exactly."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    n, bins, per_bin = (int(tok) for tok in lines[0].split())
    words = np.array(
        [[int(tok) for tok in ln.split()] for ln in lines[1 : 1 + bins * per_bin]],
        dtype=np.int64,
    )
    if input_distribution is None:
        num_symbols = int(words.max()) + 1 if words.size else 2
        input_distribution = np.full(num_symbols, 1.0 / num_symbols)
    return BinnedCodebook(
        n=n,
        num_bins=bins,
        codewords_per_bin=per_bin,
        codewords=words.reshape(bins, per_bin, n),
        input_distribution=input_distribution,
    )
