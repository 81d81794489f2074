import numpy as np
import pytest

from keybuf.buffer import (
    KeyBuffer,
    fill_slots,
    minimum_capacity,
    occupancy_trace_check,
)
from keybuf.errors import NonMonotoneSlot, Underflow


class TestPush:
    def test_first_push_sets_occupancy(self):
        buf = KeyBuffer()
        assert buf.push(1, [1, 0]) == 0
        assert buf.occupancy_bits == 2

    def test_overflow_truncates_arriving_tail(self):
        buf = KeyBuffer(capacity_bits=4)
        buf.push(1, [1, 1, 1])
        dropped = buf.push(2, [0, 1, 0])
        assert dropped == 2
        assert buf.occupancy_bits == 4
        # the retained arriving bit is the segment's first, not its last
        draw = buf.draw(4)
        assert list(draw.bits) == [1, 1, 1, 0]

    def test_unbounded_never_drops(self):
        buf = KeyBuffer()
        for slot in range(1, 50):
            assert buf.push(slot, np.ones(100, dtype=np.uint8)) == 0

    def test_slot_indices_must_increase(self):
        buf = KeyBuffer()
        buf.push(3, [1])
        with pytest.raises(NonMonotoneSlot):
            buf.push(3, [0])
        with pytest.raises(NonMonotoneSlot):
            buf.push(2, [0])

    def test_full_buffer_drops_everything(self):
        buf = KeyBuffer(capacity_bits=2)
        buf.push(1, [1, 0])
        assert buf.push(2, [1, 1, 1]) == 3
        assert buf.newest_slot == 1


class TestDraw:
    def test_fifo_with_segment_split(self):
        buf = KeyBuffer()
        buf.push(1, [1, 1, 0, 0])
        buf.push(2, [0, 1, 0, 1])
        draw = buf.draw(6)
        assert draw.provenance == ((1, 4), (2, 2))
        assert draw.ranges == ((1, 0, 4), (2, 0, 2))
        assert list(draw.bits) == [1, 1, 0, 0, 0, 1]
        assert buf.occupancy_bits == 2
        assert draw.newest_source_slot == 2

    def test_empty_draw_changes_nothing(self):
        buf = KeyBuffer()
        buf.push(1, [1, 0])
        draw = buf.draw(0)
        assert draw.bits.size == 0
        assert draw.provenance == ()
        assert draw.newest_source_slot == -1
        assert buf.occupancy_bits == 2

    def test_underflow(self):
        buf = KeyBuffer()
        buf.push(1, [1, 0, 1])
        with pytest.raises(Underflow):
            buf.draw(4)

    def test_split_segment_keeps_offsets(self):
        buf = KeyBuffer()
        buf.push(1, [1, 0, 1, 1])
        first = buf.draw(3)
        second = buf.draw(1)
        assert first.ranges == ((1, 0, 3),)
        assert second.ranges == ((1, 3, 1),)

    def test_fifo_differential_against_flat_model(self):
        # the buffer must behave exactly like one long bit list
        rng = np.random.default_rng(13)
        buf = KeyBuffer()
        model = []
        drawn_buf, drawn_model = [], []
        for slot in range(1, 200):
            bits = rng.integers(0, 2, size=int(rng.integers(0, 8))).astype(np.uint8)
            buf.push(slot, bits) if bits.size else None
            model.extend(bits.tolist())
            want = int(rng.integers(0, len(model) - len(drawn_model) + 1))
            draw = buf.draw(want)
            drawn_buf.extend(draw.bits.tolist())
            drawn_model.extend(model[len(drawn_model) : len(drawn_model) + want])
        assert drawn_buf == drawn_model
        assert buf.occupancy_bits == len(model) - len(drawn_model)

    def test_no_bit_is_ever_drawn_twice(self):
        rng = np.random.default_rng(17)
        buf = KeyBuffer()
        seen = set()
        for slot in range(1, 100):
            buf.push(slot, rng.integers(0, 2, size=6).astype(np.uint8))
            draw = buf.draw(int(rng.integers(0, buf.occupancy_bits + 1)))
            for src, offset, count in draw.ranges:
                for i in range(count):
                    assert (src, offset + i) not in seen
                    seen.add((src, offset + i))


class TestDump:
    def test_dump_lines_format(self):
        buf = KeyBuffer()
        buf.push(1, [1, 0])
        buf.push(2, [1, 1, 1])
        assert buf.dump_lines() == ["1:2", "2:3", "occupancy:5"]


class TestTraceCheck:
    def test_ramp_closed_form(self):
        # slot k adds 2k bits and removes 2(k-1), so occupancy is 2k
        trace = [(2 * k, 2 * k, 2 * (k - 1), 0) for k in range(1, 11)]
        assert occupancy_trace_check(trace)

    def test_corrupted_entry_detected(self):
        trace = [(2 * k, 2 * k, 2 * (k - 1), 0) for k in range(1, 11)]
        trace[4] = (trace[4][0] + 1, *trace[4][1:])
        assert not occupancy_trace_check(trace)

    def test_single_slot(self):
        assert occupancy_trace_check([(3, 3, 0, 0)])

    def test_drops_accounted(self):
        assert occupancy_trace_check([(4, 4, 0, 0), (4, 3, 0, 3)])
        assert not occupancy_trace_check([(4, 4, 0, 0), (4, 3, 0, 0)])

    def test_empty_trace_rejected(self):
        with pytest.raises(ValueError):
            occupancy_trace_check([])


class TestSizing:
    def test_minimum_capacity_example(self):
        assert minimum_capacity(0.75, 4, 2, 8) == 48

    def test_fill_slots_example(self):
        assert fill_slots(0.75, 4, 2, 0.25) == 24

    def test_degenerate_window(self):
        assert minimum_capacity(0.75, 4, 0, 8) == 0
        assert fill_slots(0.75, 4, 0, 0.25) == 0

    def test_fractional_capacity_rounds_up(self):
        assert minimum_capacity(0.3, 1, 1, 5) == 2  # 1.5 bits -> 2
