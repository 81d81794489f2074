"""FIFO secret-key buffer with slot-tagged bits.

Every stored bit remembers which slot's message produced it and its offset
inside that slot's bit stream; draws report full provenance so key-age
properties can be audited after the fact.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import NonMonotoneSlot, Underflow
from .transport import as_bits


@dataclass
class _Segment:
    source_slot: int
    offset: int  # first bit's offset within the source slot's pushed stream
    bits: np.ndarray


@dataclass(frozen=True)
class KeyDraw:
    """Bits removed from the buffer head, oldest first."""

    bits: np.ndarray
    provenance: tuple  # ((source_slot, count), ...) in draw order
    ranges: tuple  # ((source_slot, start_offset, count), ...)

    @property
    def newest_source_slot(self) -> int:
        return max((slot for slot, _ in self.provenance), default=-1)


class KeyBuffer:
    """FIFO queue of key bits; `capacity_bits=None` means unbounded."""

    def __init__(self, capacity_bits: int | None = None):
        self.capacity_bits = capacity_bits
        self._segments: deque[_Segment] = deque()
        self._occupancy = 0

    @property
    def occupancy_bits(self) -> int:
        return self._occupancy

    @property
    def newest_slot(self) -> int:
        return self._segments[-1].source_slot if self._segments else -1

    def push(self, source_slot: int, bits) -> int:
        """Append bits for a new slot; returns how many arriving bits were
        dropped to respect a finite capacity.

        Overflow truncates the tail of the *arriving* bits only: older bits
        are never evicted, matching FIFO age ordering.
        """
        if self._segments and source_slot <= self._segments[-1].source_slot:
            raise NonMonotoneSlot(
                f"push slot {source_slot} not greater than "
                f"{self._segments[-1].source_slot}"
            )
        arriving = as_bits(bits).copy()
        dropped = 0
        if self.capacity_bits is not None:
            room = self.capacity_bits - self._occupancy
            if arriving.size > room:
                dropped = int(arriving.size - room)
                arriving = arriving[:room]
        if arriving.size:
            self._segments.append(_Segment(source_slot, 0, arriving))
            self._occupancy += int(arriving.size)
        return dropped

    def draw(self, count: int) -> KeyDraw:
        """Remove exactly `count` bits from the head (oldest first)."""
        if count > self._occupancy:
            raise Underflow(f"requested {count} bits, buffer holds {self._occupancy}")
        pieces = []
        ranges = []
        remaining = count
        while remaining > 0:
            seg = self._segments[0]
            take = min(remaining, seg.bits.size)
            pieces.append(seg.bits[:take])
            ranges.append((seg.source_slot, seg.offset, take))
            if take == seg.bits.size:
                self._segments.popleft()
            else:
                seg.bits = seg.bits[take:]
                seg.offset += take
            remaining -= take
        self._occupancy -= count
        provenance = tuple((slot, n) for slot, _, n in ranges)
        bits = np.concatenate(pieces) if pieces else np.zeros(0, dtype=np.uint8)
        return KeyDraw(bits=bits, provenance=provenance, ranges=tuple(ranges))

    def dump_lines(self) -> list[str]:
        """State dump for trace files: one `slot:bitcount` line per segment,
        plus the occupancy."""
        lines = [f"{seg.source_slot}:{seg.bits.size}" for seg in self._segments]
        lines.append(f"occupancy:{self._occupancy}")
        return lines


def occupancy_trace_check(trace) -> bool:
    """Exact integer check of the buffer recursion on a per-slot trace.

    `trace` is a sequence of (B_k, arrived, drawn, dropped) tuples where B_k
    is the occupancy at the *end* of slot k (the buffer starts empty), so
    B_k = B_{k-1} + arrived_k - drawn_k - dropped_k must hold exactly.
    """
    if not trace:
        raise ValueError("trace must be nonempty")
    previous = 0
    for b_k, arrived, drawn, dropped in trace:
        if b_k != previous + arrived - drawn - dropped:
            return False
        previous = b_k
    return True


def minimum_capacity(c: float, m: int, n1: int, n: int) -> int:
    """Finite-buffer size (bits) that preserves key-age separation."""
    return math.ceil(c * m * n1 * n - 1e-9)


def fill_slots(c: float, m: int, n1: int, r_s: float) -> int:
    """Slots until the buffer first holds `minimum_capacity` bits."""
    if n1 == 0:
        return 0
    return math.ceil(c * m * n1 / r_s - 1e-9)
