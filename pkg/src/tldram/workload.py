"""Traces and the in-order core front end.

Trace text format, one access per line::

    <bubble> R|W <hex address>

``bubble`` non-memory instructions retire (one per cycle) before the access
issues. Synthetic generators draw rows from a flat row-id space in which
consecutive ids walk the rows of one subarray first, then subarrays, then
banks, so a small hot set packs into a single subarray.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .controller import AddressMap
from .errors import ConfigError, WorkloadError
from .geometry import DeviceGeometry


class TraceRecord(NamedTuple):
    bubble: int
    is_write: bool
    address: int


def parse_trace(stream, capacity=None):
    """Parse trace text (any iterable of lines) into a list of ``TraceRecord``."""
    out = []
    for n, line in enumerate(stream, 1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        f = text.split()
        if len(f) != 3 or f[1] not in ("R", "W", "r", "w"):
            raise WorkloadError(f"expected '<bubble> R|W <hex address>', got {text!r}", n)
        try:
            bubble = int(f[0])
            address = int(f[2], 16)
        except ValueError:
            raise WorkloadError(f"bad number in {text!r}", n) from None
        if bubble < 0:
            raise WorkloadError("negative bubble count", n)
        if address < 0 or (capacity is not None and address >= capacity):
            raise WorkloadError(f"address {f[2]} outside capacity", n)
        out.append(TraceRecord(bubble, f[1] in ("W", "w"), address))
    return out


@dataclass
class Trace:
    """Column-oriented trace."""

    bubbles: np.ndarray
    is_write: np.ndarray
    address: np.ndarray

    def __len__(self):
        return len(self.address)

    @classmethod
    def from_records(cls, records):
        return cls(
            np.array([r.bubble for r in records], dtype=np.int64),
            np.array([r.is_write for r in records], dtype=bool),
            np.array([r.address for r in records], dtype=np.int64),
        )

    def records(self):
        return [TraceRecord(int(b), bool(w), int(a))
                for b, w, a in zip(self.bubbles, self.is_write, self.address)]

    def lines(self):
        rw = np.where(self.is_write, "W", "R")
        return [f"{b} {c} {a:#x}" for b, c, a in zip(self.bubbles.tolist(), rw.tolist(), self.address.tolist())]

    def write(self, fh):
        for line in self.lines():
            fh.write(line + "\n")

    def __eq__(self, other):
        return (isinstance(other, Trace) and np.array_equal(self.bubbles, other.bubbles)
                and np.array_equal(self.is_write, other.is_write)
                and np.array_equal(self.address, other.address))


def read_trace(path, capacity=None):
    with open(path) as fh:
        return Trace.from_records(parse_trace(fh, capacity))


@dataclass(frozen=True)
class RowSpace:
    """Flat row ids over ``banks x subarrays x rows`` logical rows.

    ``bank_offset`` rotates the bank of every id, which gives each core of a
    multi-core run its own hot subarray.
    """

    amap: AddressMap
    rows: int
    bank_offset: int = 0

    def __post_init__(self):
        if not 1 <= self.rows <= self.amap.rows:
            raise ConfigError(f"trace row span {self.rows} must lie in [1, {self.amap.rows}]")

    @classmethod
    def default(cls, geometry=None, rows=None):
        g = geometry or DeviceGeometry()
        return cls(AddressMap.for_geometry(g), rows or g.rows_per_subarray - g.near_rows)

    @property
    def size(self):
        return self.amap.banks * self.amap.subarrays * self.rows

    def split(self, ids):
        ids = np.asarray(ids, dtype=np.int64)
        row = ids % self.rows
        sa = (ids // self.rows) % self.amap.subarrays
        bank = (ids // (self.rows * self.amap.subarrays) + self.bank_offset) % self.amap.banks
        return bank, sa, row

    def addresses(self, ids, columns):
        bank, sa, row = self.split(ids)
        return self.amap.encode_array(bank, sa, row, columns)


def _bubbles(rng, n, mean):
    if mean < 0:
        raise ConfigError("bubble mean must be >= 0")
    if mean == 0:
        return np.zeros(n, dtype=np.int64)
    # geometric on {0, 1, ...} with the requested mean
    return rng.geometric(1.0 / (mean + 1.0), size=n).astype(np.int64) - 1


def _check_fraction(name, x):
    if not 0.0 <= x <= 1.0:
        raise ConfigError(f"{name} must lie in [0, 1], got {x}")


def gen_hotcold(seed, n, hot_row_count, hot_access_fraction, write_fraction=0.0, bubble_mean=0.0,
                space=None):
    """Hot/cold trace: the hot set is row ids ``[0, hot_row_count)``, the cold set the rest."""
    _check_fraction("hot_access_fraction", hot_access_fraction)
    _check_fraction("write_fraction", write_fraction)
    space = space or RowSpace.default()
    total = space.size
    if not 0 <= hot_row_count <= total:
        raise ConfigError(f"hot_row_count {hot_row_count} exceeds the {total}-row address space")
    rng = np.random.default_rng(seed)
    hot = rng.random(n) < hot_access_fraction
    if hot_row_count == 0:
        hot[:] = False
    elif hot_row_count == total:
        hot[:] = True
    hot_ids = rng.integers(0, max(hot_row_count, 1), size=n)
    cold_ids = rng.integers(min(hot_row_count, total - 1), total, size=n)
    ids = np.where(hot, hot_ids, cold_ids)
    cols = rng.integers(0, space.amap.columns, size=n)
    writes = rng.random(n) < write_fraction
    bubbles = _bubbles(rng, n, bubble_mean)
    return Trace(bubbles, writes, space.addresses(ids, cols))


def gen_zipf(seed, n, exponent, row_count, write_fraction=0.0, bubble_mean=0.0, space=None):
    """Row popularity proportional to ``rank ** -exponent``; rank 1 is row id 0."""
    if exponent < 0:
        raise ConfigError("zipf exponent must be >= 0")
    _check_fraction("write_fraction", write_fraction)
    space = space or RowSpace.default()
    if not 1 <= row_count <= space.size:
        raise ConfigError(f"row_count {row_count} outside [1, {space.size}]")
    rng = np.random.default_rng(seed)
    weights = np.arange(1, row_count + 1, dtype=np.float64) ** -float(exponent)
    ids = rng.choice(row_count, size=n, p=weights / weights.sum())
    cols = rng.integers(0, space.amap.columns, size=n)
    writes = rng.random(n) < write_fraction
    bubbles = _bubbles(rng, n, bubble_mean)
    return Trace(bubbles, writes, space.addresses(ids, cols))


class CoreModel:
    """In-order core: retires one bubble per cycle, then issues its next access.

    After an access issues, the core keeps going only if it still has a free
    outstanding slot; otherwise it stalls until a completion and resumes the
    cycle after. Every access retires as one instruction.
    """

    __slots__ = (
        "index", "bubbles", "writes", "addresses", "bank", "sa", "lrow", "col", "home",
        "n", "cursor", "ready_at", "outstanding", "max_outstanding", "stalled",
        "retired", "finish", "tail_bubbles",
    )

    def __init__(self, index, bubbles, writes, addresses, max_outstanding=1, tail_bubbles=0):
        if not 1 <= max_outstanding <= 8:
            raise ConfigError("max_outstanding must lie in [1, 8]")
        self.index = index
        self.bubbles = list(bubbles)
        self.writes = list(writes)
        self.addresses = list(addresses)
        self.n = len(self.bubbles)
        self.cursor = 0
        self.max_outstanding = max_outstanding
        self.outstanding = 0
        self.stalled = False
        self.retired = 0
        self.tail_bubbles = tail_bubbles
        self.ready_at = self.bubbles[0] if self.n else 0
        self.finish = 0
        if not self.n:
            self._tail(0)

    def _tail(self, start):
        self.retired += self.tail_bubbles
        self.finish = max(self.finish, start + self.tail_bubbles)

    @property
    def done(self):
        return self.cursor >= self.n and self.outstanding == 0

    def issue(self, now):
        """Account for the access at ``cursor`` issuing at ``now``; returns its index."""
        i = self.cursor
        self.cursor = i + 1
        self.retired += self.bubbles[i] + 1
        self.outstanding += 1
        self.finish = max(self.finish, now + 1)
        if self.outstanding >= self.max_outstanding:
            self.stalled = True
        elif self.cursor < self.n:
            self.ready_at = now + 1 + self.bubbles[self.cursor]
        else:
            self._tail(now + 1)
        return i

    def complete(self, cycle):
        self.outstanding -= 1
        if cycle + 1 > self.finish:
            self.finish = cycle + 1
        if self.stalled:
            self.stalled = False
            if self.cursor < self.n:
                self.ready_at = cycle + 1 + self.bubbles[self.cursor]
            else:
                self._tail(cycle + 1)

    @property
    def ipc(self):
        return self.retired / self.finish if self.finish else 0.0


def core_tick(core, controller, now, make_request):
    """Issue the core's next access at ``now`` if it is ready and there is room.

    ``make_request(core, index, now)`` builds the ``MemRequest``. Returns the
    request, or None if the core did not issue.
    """
    if core.stalled or core.cursor >= core.n or core.ready_at > now or controller.full:
        return None
    i = core.issue(now)
    req = make_request(core, i, now)
    controller.enqueue(req)
    return req
