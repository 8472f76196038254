import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tldram.controller import AddressMap
from tldram.errors import ConfigError, WorkloadError
from tldram.geometry import DeviceGeometry
from tldram.workload import (
    CoreModel, RowSpace, Trace, TraceRecord, gen_hotcold, gen_zipf, parse_trace, read_trace,
)

SPACE = RowSpace.default()


def _row_ids(trace, space=SPACE):
    bank, sa, row, _ = space.amap.decode_array(trace.address)
    bank = (bank - space.bank_offset) % space.amap.banks
    return (bank * space.amap.subarrays + sa) * space.rows + row


def test_parse_trace():
    recs = parse_trace(["# comment", "", "3 R 0x40", "0 w 1f"])
    assert recs == [TraceRecord(3, False, 0x40), TraceRecord(0, True, 0x1F)]


@pytest.mark.parametrize("line,msg", [
    ("1 X 0x0", "expected"), ("a R 0x0", "bad number"), ("-1 R 0x0", "negative"),
    ("1 R 0xFFFFFFFFFFFF", "outside"), ("1 R", "expected"),
])
def test_parse_errors_carry_line(line, msg):
    with pytest.raises(WorkloadError, match=f"line 2: .*{msg}"):
        parse_trace(["0 R 0x0", line], capacity=1 << 30)


def test_trace_file_round_trip(tmp_path):
    tr = gen_hotcold(1, 500, 8, 0.5, 0.3, 2.0)
    p = tmp_path / "t.trace"
    with open(p, "w") as fh:
        tr.write(fh)
    assert read_trace(p) == tr


def test_hotcold_share():
    tr = gen_hotcold(11, 1_000_000, 32, 0.9)
    hot = np.mean(_row_ids(tr) < 32)
    assert 0.899 <= hot <= 0.901
    assert _row_ids(tr).max() < SPACE.size


def test_hot_set_packs_into_one_subarray():
    tr = gen_hotcold(2, 10_000, 32, 1.0)
    bank, sa, row, _ = SPACE.amap.decode_array(tr.address)
    assert set(bank.tolist()) == {0} and set(sa.tolist()) == {0} and row.max() < 32


def test_zipf_rank_ratio():
    tr = gen_zipf(5, 1_000_000, 1.0, 1024)
    counts = np.bincount(_row_ids(tr), minlength=2)
    assert counts[0] / counts[1] == pytest.approx(2.0, rel=0.05)


def test_generators_deterministic():
    assert gen_hotcold(3, 1000, 4, 0.8, 0.2, 5) == gen_hotcold(3, 1000, 4, 0.8, 0.2, 5)
    assert gen_zipf(3, 1000, 0.8, 64) == gen_zipf(3, 1000, 0.8, 64)
    assert not gen_hotcold(3, 1000, 4, 0.8) == gen_hotcold(4, 1000, 4, 0.8)


def test_generator_edges():
    assert len(gen_hotcold(1, 0, 4, 0.9)) == 0
    assert np.all(_row_ids(gen_hotcold(1, 200, 0, 0.9)) >= 0)
    tr = gen_hotcold(1, 200, SPACE.size, 0.1)
    assert len(tr) == 200
    with pytest.raises(ConfigError):
        gen_hotcold(1, 10, SPACE.size + 1, 0.5)
    with pytest.raises(ConfigError):
        gen_hotcold(1, 10, 4, 1.5)
    with pytest.raises(ConfigError):
        gen_zipf(1, 10, -1.0, 4)
    with pytest.raises(ConfigError):
        RowSpace(SPACE.amap, 0)


def test_bubble_mean():
    tr = gen_hotcold(9, 200_000, 4, 0.5, bubble_mean=20)
    assert tr.bubbles.mean() == pytest.approx(20, rel=0.02)
    assert tr.bubbles.min() >= 0


def test_bank_offset_rotates_banks():
    sp = RowSpace(SPACE.amap, SPACE.rows, bank_offset=3)
    bank, *_ = sp.split([0, SPACE.rows * 8])
    assert bank.tolist() == [3, 4]


def test_core_stalls_until_completion():
    core = CoreModel(0, [2, 5], [False, False], [0, 0], max_outstanding=1)
    assert core.ready_at == 2
    core.issue(2)
    assert core.stalled
    core.complete(30)
    assert not core.stalled and core.ready_at == 36
    core.issue(36)
    core.complete(50)
    assert core.done and core.retired == 9 and core.finish == 51
    assert core.ipc == pytest.approx(9 / 51)


def test_core_with_outstanding_slots():
    core = CoreModel(0, [0, 0, 0], [False] * 3, [0] * 3, max_outstanding=2)
    core.issue(0)
    assert not core.stalled and core.ready_at == 1
    core.issue(1)
    assert core.stalled
    core.complete(20)
    assert core.ready_at == 21
    with pytest.raises(ConfigError):
        CoreModel(0, [], [], [], max_outstanding=9)


@given(st.lists(st.integers(0, 30), min_size=1, max_size=40), st.lists(st.integers(1, 60), min_size=40))
def test_core_ipc_bounds(bubbles, lats):
    core = CoreModel(0, bubbles, [False] * len(bubbles), [0] * len(bubbles))
    for lat in lats[:len(bubbles)]:
        t = core.ready_at
        core.issue(t)
        core.complete(t + lat)
    assert core.done
    assert core.retired == sum(bubbles) + len(bubbles)
    assert 0 < core.ipc <= 1.0
