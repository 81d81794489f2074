import itertools

import numpy as np
import pytest

from keybuf.channel import Dmc, bec, bsc
from keybuf.errors import BudgetExceeded, MessageOutOfRange
from keybuf.wiretap import (
    build_codebook,
    codebook_from_text,
    codebook_to_text,
    decode,
    encode,
    exact_block_error_probability,
    exact_single_slot_leakage,
)

UNIFORM = np.array([0.5, 0.5])


def test_degenerate_codebook():
    book = build_codebook(1, 2, 1, UNIFORM, np.random.default_rng(0))
    assert book.codewords.shape == (2, 1, 1)


def test_build_deterministic_under_seed():
    a = build_codebook(4, 2, 4, UNIFORM, np.random.default_rng(7))
    b = build_codebook(4, 2, 4, UNIFORM, np.random.default_rng(7))
    assert np.array_equal(a.codewords, b.codewords)


def test_symbol_frequency_matches_input_distribution():
    book = build_codebook(8, 4, 8, UNIFORM, np.random.default_rng(5))
    assert book.codewords.mean() == pytest.approx(0.5, abs=0.1)


def test_budget_enforced():
    with pytest.raises(BudgetExceeded):
        build_codebook(8, 2**10, 2**7, UNIFORM, np.random.default_rng(0))
    with pytest.raises(BudgetExceeded):
        build_codebook(17, 2, 1, UNIFORM, np.random.default_rng(0))


class TestEncode:
    def test_single_codeword_bin(self):
        book = build_codebook(4, 2, 1, UNIFORM, np.random.default_rng(0))
        rng = np.random.default_rng(1)
        assert all(encode(book, 1, rng).chosen_index == 0 for _ in range(10))

    def test_randomization_uniform_over_bin(self):
        book = build_codebook(4, 2, 4, UNIFORM, np.random.default_rng(0))
        rng = np.random.default_rng(2)
        counts = np.zeros(4)
        for _ in range(10**4):
            counts[encode(book, 0, rng).chosen_index] += 1
        assert np.all(np.abs(counts / 10**4 - 0.25) < 0.02)

    def test_out_of_range_message(self):
        book = build_codebook(4, 2, 4, UNIFORM, np.random.default_rng(0))
        with pytest.raises(MessageOutOfRange):
            encode(book, 2, np.random.default_rng(0))


class TestDecode:
    def test_noiseless_roundtrip_exhaustive(self):
        # seed 11 yields 16 pairwise-distinct codewords, so a noiseless
        # observation identifies its bin unambiguously
        book = build_codebook(6, 4, 4, UNIFORM, np.random.default_rng(11))
        flat = book.codewords.reshape(16, 6)
        assert len({tuple(row) for row in flat}) == 16
        noiseless = Dmc(np.eye(2))
        for w in range(4):
            for i in range(4):
                assert decode(book, book.codewords[w, i], noiseless) == w

    def test_all_erased_ties_break_to_bin_zero(self):
        book = build_codebook(4, 2, 2, UNIFORM, np.random.default_rng(3))
        assert decode(book, [2, 2, 2, 2], bec(1.0)) == 0

    def test_monte_carlo_error_agrees_with_exact_enumeration(self):
        from keybuf.channel import transmit

        book = build_codebook(8, 2, 4, UNIFORM, np.random.default_rng(9))
        channel = bsc(0.05)
        exact = exact_block_error_probability(book, channel)
        rng = np.random.default_rng(10)
        errors = 0
        trials = 10**4
        for _ in range(trials):
            enc = encode(book, int(rng.integers(2)), rng)
            y = transmit(channel, enc.codeword, rng)
            errors += decode(book, y, channel) != enc.bin
        assert errors / trials <= exact + 0.01


class TestLeakage:
    def test_single_bin_leaks_nothing(self):
        book = build_codebook(4, 1, 4, UNIFORM, np.random.default_rng(0))
        assert exact_single_slot_leakage(book, bsc(0.1)) == 0.0

    def test_blind_eve_leaks_nothing(self):
        book = build_codebook(4, 4, 2, UNIFORM, np.random.default_rng(0))
        assert exact_single_slot_leakage(book, bec(1.0)) <= 1e-12

    def test_matches_independent_double_loop_enumeration(self):
        book = build_codebook(2, 2, 2, UNIFORM, np.random.default_rng(6))
        eve = bsc(0.2)
        fast = exact_single_slot_leakage(book, eve)

        # independent oracle: explicit loops over messages and z tuples
        t = eve.transition
        p_z_w = {}
        for w in range(2):
            for z in itertools.product(range(2), repeat=2):
                p = 0.0
                for i in range(2):
                    x = book.codewords[w, i]
                    p += 0.5 * t[x[0], z[0]] * t[x[1], z[1]]
                p_z_w[(w, z)] = p
        slow = 0.0
        for w in range(2):
            for z in itertools.product(range(2), repeat=2):
                joint = 0.5 * p_z_w[(w, z)]
                marg_z = 0.5 * (p_z_w[(0, z)] + p_z_w[(1, z)])
                if joint > 0:
                    slow += joint * np.log2(joint / (0.5 * marg_z))
        assert fast == pytest.approx(slow, abs=1e-12)

    def test_bounded_by_log_bins(self):
        for seed in range(10):
            book = build_codebook(3, 4, 2, UNIFORM, np.random.default_rng(seed))
            assert exact_single_slot_leakage(book, bsc(0.05)) <= 2.0 + 1e-12

    def test_monotone_under_extra_degradation(self):
        from keybuf.channel import compose

        book = build_codebook(4, 2, 2, UNIFORM, np.random.default_rng(8))
        last = np.inf
        for extra in (0.0, 0.1, 0.2, 0.3):
            eve = compose(bsc(0.1), bsc(extra))
            value = exact_single_slot_leakage(book, eve)
            assert value <= last + 1e-12
            last = value

    def test_more_randomization_usually_reduces_leakage(self):
        eve = bsc(0.3)
        nonincreasing = 0
        comparisons = 0
        for seed in range(100):
            values = []
            for per_bin in (1, 2, 4, 8):
                book = build_codebook(
                    14, 2, per_bin, UNIFORM, np.random.default_rng((seed, per_bin))
                )
                values.append(exact_single_slot_leakage(book, eve))
            for a, b in zip(values, values[1:]):
                comparisons += 1
                nonincreasing += b <= a + 1e-12
        assert nonincreasing / comparisons >= 0.9

    def test_enumeration_budget(self):
        book = build_codebook(16, 2, 1, UNIFORM, np.random.default_rng(0))
        with pytest.raises(BudgetExceeded):
            exact_single_slot_leakage(book, bec(0.5))  # 3^16 > 1e7


def test_text_round_trip():
    book = build_codebook(5, 4, 2, UNIFORM, np.random.default_rng(12))
    again = codebook_from_text(codebook_to_text(book))
    assert again.n == book.n
    assert again.num_bins == book.num_bins
    assert again.codewords_per_bin == book.codewords_per_bin
    assert np.array_equal(again.codewords, book.codewords)
    assert codebook_to_text(again) == codebook_to_text(book)
