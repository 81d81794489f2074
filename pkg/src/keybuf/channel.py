"""Discrete memoryless channels, degraded wiretap pairs, and capacity analysis.

Alphabets are ranges of small integers.  A channel is a row-stochastic
transition matrix; the eavesdropper's channel is always the composition of
the main channel with a degrading channel, so degradedness holds by
construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AlphabetTooLarge, DimensionMismatch, NonNormalized, SymbolOutOfRange

ROW_TOL = 1e-12
JOINT_TOL = 1e-9

#: Grid-search evaluation budget for `analyze`.
MAX_GRID_POINTS = 10**7


def _entropy_bits(p: np.ndarray) -> np.ndarray:
    """Shannon entropy (base 2) along the last axis, with 0*log(0) = 0."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def binary_entropy(p: float) -> float:
    """h(p) in bits."""
    return float(_entropy_bits(np.array([p, 1.0 - p])))


@dataclass(frozen=True)
class Dmc:
    """A discrete memoryless channel given by its transition matrix.

    Rows are indexed by input symbol, columns by output symbol.
    """

    transition: np.ndarray

    def __post_init__(self):
        t = np.array(self.transition, dtype=float)
        if t.ndim != 2:
            raise DimensionMismatch("transition matrix must be 2-D")
        if np.any(t < -ROW_TOL) or np.any(t > 1.0 + ROW_TOL):
            raise NonNormalized("transition entries must lie in [0, 1]")
        rows = t.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > ROW_TOL):
            raise NonNormalized(f"rows must sum to 1 within {ROW_TOL}")
        t.setflags(write=False)
        object.__setattr__(self, "transition", t)

    @property
    def input_alphabet_size(self) -> int:
        return self.transition.shape[0]

    @property
    def output_alphabet_size(self) -> int:
        return self.transition.shape[1]


def bsc(p: float) -> Dmc:
    """Binary symmetric channel with crossover probability p."""
    return Dmc(np.array([[1.0 - p, p], [p, 1.0 - p]]))


def bec(e: float) -> Dmc:
    """Binary erasure channel; output symbol 2 is the erasure."""
    return Dmc(np.array([[1.0 - e, 0.0, e], [0.0, 1.0 - e, e]]))


def noise_channel(num_inputs: int, num_outputs: int = 2) -> Dmc:
    """Channel whose output is uniform regardless of the input (zero capacity)."""
    return Dmc(np.full((num_inputs, num_outputs), 1.0 / num_outputs))


def compose(first: Dmc, second: Dmc) -> Dmc:
    """Channel obtained by feeding `first`'s output into `second`."""
    if first.output_alphabet_size != second.input_alphabet_size:
        raise DimensionMismatch("alphabet mismatch in channel composition")
    return Dmc(first.transition @ second.transition)


@dataclass(frozen=True)
class WiretapChannelSpec:
    """Degraded wiretap channel: Alice->Bob (`main`), Bob->Eve (`degrading`),
    and the derived Alice->Eve product channel (`eve`)."""

    main: Dmc
    degrading: Dmc
    eve: Dmc = field(default=None)  # derived when omitted

    def __post_init__(self):
        derived = compose(self.main, self.degrading)
        if self.eve is None:
            object.__setattr__(self, "eve", derived)
        elif not np.allclose(self.eve.transition, derived.transition, atol=ROW_TOL):
            raise NonNormalized("eve channel is not main x degrading")


def bsc_pair(p_main: float, p_eve: float) -> WiretapChannelSpec:
    """BSC(p_main) to Bob with Eve seeing BSC(p_eve), p_eve >= p_main."""
    q = (p_eve - p_main) / (1.0 - 2.0 * p_main)
    return WiretapChannelSpec(main=bsc(p_main), degrading=bsc(q))


def bec_pair(e_main: float, e_eve: float) -> WiretapChannelSpec:
    """BEC(e_main) to Bob with Eve seeing BEC(e_eve), e_eve >= e_main."""
    q = 1.0 - (1.0 - e_eve) / (1.0 - e_main)
    degrading = Dmc(
        np.array(
            [
                [1.0 - q, 0.0, q],
                [0.0, 1.0 - q, q],
                [0.0, 0.0, 1.0],
            ]
        )
    )
    return WiretapChannelSpec(main=bec(e_main), degrading=degrading)


def mutual_information(joint: np.ndarray) -> float:
    """I(X;Y) in bits from a dense joint table p(x, y).

    Zero-probability cells contribute nothing; the result is clamped to be
    nonnegative (it can dip below zero by rounding only).
    """
    joint = np.asarray(joint, dtype=float)
    total = joint.sum()
    if abs(total - 1.0) > JOINT_TOL:
        raise NonNormalized(f"joint mass {total} deviates from 1 beyond {JOINT_TOL}")
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    value = (
        _entropy_bits(px)
        + _entropy_bits(py)
        - _entropy_bits(joint.reshape(-1))
    )
    return max(float(value), 0.0)


def joint_from_input(input_dist: np.ndarray, channel: Dmc) -> np.ndarray:
    """Joint p(x, y) induced by an input distribution through a channel."""
    p = np.asarray(input_dist, dtype=float)
    return p[:, None] * channel.transition


@dataclass(frozen=True)
class ChannelAnalysis:
    """Grid-search capacities of a wiretap pair, all in bits per channel use."""

    capacity_main: float
    capacity_eve: float
    secrecy_capacity: float
    maximizing_input: np.ndarray  # argmax of the secrecy objective
    maximizing_input_main: np.ndarray  # argmax of I(X;Y)


def _simplex_grid(dims: int, step: float) -> np.ndarray:
    """All probability vectors with entries on a lattice of spacing `step`."""
    n = int(round(1.0 / step))
    count = math.comb(n + dims - 1, dims - 1)
    if count > MAX_GRID_POINTS:
        raise AlphabetTooLarge(
            f"grid of {count} points exceeds the {MAX_GRID_POINTS} budget"
        )

    def compositions(parts, total):
        if parts == 1:
            yield (total,)
            return
        for head in range(total + 1):
            for rest in compositions(parts - 1, total - head):
                yield (head,) + rest

    grid = np.array(list(compositions(dims, n)), dtype=float) / n
    return grid


def analyze(spec: WiretapChannelSpec, grid_step: float = 1e-3) -> ChannelAnalysis:
    """Exhaustive grid search for C, C_e, and the secrecy capacity.

    The secrecy objective is I(X;Y) - I(X;Z) maximized over the gridded
    input simplex; its maximum is floored at 0.
    """
    if not 0.0 < grid_step <= 0.1:
        raise ValueError("grid_step must lie in (0, 0.1]")
    m = spec.main.input_alphabet_size
    if m > 4:
        raise AlphabetTooLarge(f"input alphabet of {m} symbols is not supported")
    grid = _simplex_grid(m, grid_step)

    def rates(channel: Dmc) -> np.ndarray:
        row_h = _entropy_bits(channel.transition)
        return _entropy_bits(grid @ channel.transition) - grid @ row_h

    i_main = rates(spec.main)
    i_eve = rates(spec.eve)
    secrecy = i_main - i_eve
    best = int(np.argmax(secrecy))
    return ChannelAnalysis(
        capacity_main=float(i_main.max()),
        capacity_eve=float(i_eve.max()),
        secrecy_capacity=max(float(secrecy[best]), 0.0),
        maximizing_input=grid[best].copy(),
        maximizing_input_main=grid[int(np.argmax(i_main))].copy(),
    )


def transmit(channel: Dmc, inputs, rng: np.random.Generator) -> np.ndarray:
    """Pass a symbol sequence through the channel, sampling each output
    independently from the input symbol's transition row."""
    x = np.asarray(inputs, dtype=np.int64)
    if x.size and (x.min() < 0 or x.max() >= channel.input_alphabet_size):
        raise SymbolOutOfRange("input symbol outside the channel alphabet")
    if x.size == 0:
        return x.copy()
    cdf = np.cumsum(channel.transition, axis=1)
    u = rng.random(x.shape[0])
    return (u[:, None] > cdf[x]).sum(axis=1).astype(np.int64)
