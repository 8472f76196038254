"""Near-segment management.

Two ways to use the fast tier:

* as a hardware-managed, inclusive cache of far rows. Rows move in with an
  inter-segment MIG and only dirty victims pay a write-back MIG. Three
  policies decide when a far row is brought in and which slot it replaces.
* as a fixed indirection that places profiled hot rows in the near tier for
  the whole run (``PageMapTable``).

Cache state is kept per subarray, because a migration can only move a row
along the bitlines it already shares with its destination.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import ConfigError, InternalError


class PolicyKind(enum.Enum):
    NONE = "none"
    SIMPLE = "simple"
    WAIT_MINIMIZED = "wait_minimized"
    BENEFIT_BASED = "benefit_based"

    @classmethod
    def parse(cls, text):
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ConfigError(f"unknown policy kind {text!r} (expected one of {names})") from None


SERVE_NEAR = "SERVE_NEAR"
SERVE_FAR = "SERVE_FAR"
SERVE_FAR_THEN_MIGRATE = "SERVE_FAR_THEN_MIGRATE"


class Decision(NamedTuple):
    action: str
    slot: int = -1


class Slot:
    __slots__ = ("far_row", "dirty", "last_use", "benefit")

    def __init__(self):
        self.far_row = None
        self.dirty = False
        self.last_use = -1
        self.benefit = 0

    def __repr__(self):
        return f"Slot(far_row={self.far_row}, dirty={self.dirty}, last_use={self.last_use}, benefit={self.benefit})"


class NearCacheState:
    """Slot table of one subarray. Slot ``i`` is physical near row ``i``."""

    def __init__(self, n_slots):
        self.slots = [Slot() for _ in range(n_slots)]
        self.reverse = {}
        # benefit counters of rows that are not cached
        self.shadow = {}

    def lookup(self, far_row):
        return self.reverse.get(far_row)

    def check(self):
        """Raise ``InternalError`` unless ``reverse`` exactly inverts slot occupancy."""
        occupied = {s.far_row: i for i, s in enumerate(self.slots) if s.far_row is not None}
        if occupied != self.reverse:
            raise InternalError(f"near-cache reverse map {self.reverse} disagrees with slots {occupied}")
        if len(occupied) != sum(s.far_row is not None for s in self.slots):
            raise InternalError("far row cached in two slots")

    def mark_dirty(self, slot):
        self.slots[slot].dirty = True

    def evict(self, slot, now=0):
        """Invalidate ``slot``. Returns the far home row needing a write-back, or None if clean."""
        s = self.slots[slot]
        if s.far_row is None:
            raise InternalError(f"evicting empty near slot {slot}")
        row, dirty = s.far_row, s.dirty
        del self.reverse[row]
        if s.benefit:
            self.shadow[row] = s.benefit
        s.far_row, s.dirty, s.last_use, s.benefit = None, False, -1, 0
        return row if dirty else None

    def fill(self, slot, far_row, now):
        s = self.slots[slot]
        if s.far_row is not None:
            raise InternalError(f"filling occupied near slot {slot}")
        if far_row in self.reverse:
            raise InternalError(f"far row {far_row} already cached in slot {self.reverse[far_row]}")
        s.far_row, s.dirty, s.last_use = far_row, False, now
        s.benefit = self.shadow.pop(far_row, 0)
        self.reverse[far_row] = slot

    def decay(self):
        for s in self.slots:
            s.benefit >>= 1
        self.shadow = {r: b >> 1 for r, b in self.shadow.items() if b > 1}


def decay(state, epoch_len=None):
    """Halve every benefit counter. ``epoch_len`` is the caller's cadence; unused here."""
    state.decay()
    return state


@dataclass
class NearCachePolicy:
    kind: PolicyKind = PolicyKind.BENEFIT_BASED
    wait_threshold: int = 8
    benefit_cap: int = 255

    def on_access(self, state, far_row, queue_wait, now):
        """Decide how to serve an access to ``far_row``.

        Updates recency and benefit bookkeeping but never changes occupancy;
        the caller performs ``evict``/``fill`` for a migrate decision.
        """
        slot = state.reverse.get(far_row)
        if slot is not None:
            s = state.slots[slot]
            if s.far_row != far_row:
                raise InternalError(f"reverse map sends row {far_row} to slot {slot} holding {s.far_row}")
            s.last_use = now
            if s.benefit < self.benefit_cap:
                s.benefit += 1
            return Decision(SERVE_NEAR, slot)
        kind = self.kind
        if kind is PolicyKind.NONE or not state.slots:
            return Decision(SERVE_FAR)
        if kind is PolicyKind.BENEFIT_BASED:
            b = state.shadow.get(far_row, 0)
            if b < self.benefit_cap:
                b += 1
            state.shadow[far_row] = b
            victim, low = -1, None
            for i, s in enumerate(state.slots):
                if s.far_row is None:
                    return Decision(SERVE_FAR_THEN_MIGRATE, i)
                if low is None or s.benefit < low:
                    victim, low = i, s.benefit
            if b > low:
                return Decision(SERVE_FAR_THEN_MIGRATE, victim)
            return Decision(SERVE_FAR)
        if kind is PolicyKind.WAIT_MINIMIZED and queue_wait <= self.wait_threshold:
            return Decision(SERVE_FAR)
        return Decision(SERVE_FAR_THEN_MIGRATE, lru_slot(state))


def lru_slot(state):
    """Least recently used slot; empty slots count as oldest; ties go to the lower index."""
    victim, oldest = 0, None
    for i, s in enumerate(state.slots):
        if s.far_row is None:
            return i
        if oldest is None or s.last_use < oldest:
            victim, oldest = i, s.last_use
    return victim


def on_access(policy, state, far_row, queue_wait, now, **kw):
    """Functional form of ``NearCachePolicy.on_access``."""
    if not isinstance(policy, NearCachePolicy):
        policy = NearCachePolicy(PolicyKind.parse(policy.value if isinstance(policy, PolicyKind) else policy), **kw)
    return policy.on_access(state, far_row, queue_wait, now)


def evict(state, slot, now=0):
    return state.evict(slot, now)


@dataclass
class PageMapTable:
    """Fixed far-row to near-row placement.

    Keys are global row ids ``(bank * subarrays + subarray) * rows + row`` in
    the logical row space; values are near-row indices inside the same subarray.
    """

    indirection: dict = field(default_factory=dict)
    mode: str = "os-static-profile"

    def __post_init__(self):
        if self.mode not in ("controller-indirection", "os-static-profile"):
            raise ConfigError(f"unknown page map mode {self.mode!r}")


def build_profile_map(profile, k, rows_per_subarray=None, near_rows=None, subarrays=1,
                      mode="os-static-profile"):
    """Place the ``k`` most-accessed rows (ties: lower row id) in near rows.

    Each chosen row takes the next free near row of its own subarray. Without
    ``rows_per_subarray`` everything is treated as one subarray. A row whose
    subarray has no free near row left is skipped.
    """
    if k < 0:
        raise ConfigError("profile slot count must be >= 0")
    if near_rows is not None and k > near_rows * subarrays:
        raise ConfigError(f"profile slot count {k} exceeds near capacity {near_rows * subarrays}")
    ranked = sorted(profile.items(), key=lambda kv: (-kv[1], kv[0]))
    used = {}
    table = {}
    for row, _count in ranked:
        if len(table) == k:
            break
        sub = row // rows_per_subarray if rows_per_subarray else 0
        nxt = used.get(sub, 0)
        if near_rows is not None and nxt >= near_rows:
            continue
        used[sub] = nxt + 1
        table[row] = nxt
    return PageMapTable(table, mode)


def read_profile(lines):
    """Parse ``row_index count`` lines."""
    out = {}
    prev = -1
    for n, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        f = line.split()
        try:
            row, count = int(f[0]), int(f[1])
            if len(f) != 2 or row < 0 or count < 0:
                raise ValueError
        except (ValueError, IndexError):
            raise ConfigError(f"profile line {n}: expected 'row_index count', got {line!r}") from None
        if row <= prev:
            raise ConfigError(f"profile line {n}: rows must be strictly ascending")
        prev = row
        out[row] = count
    return out


def write_profile(profile, fh):
    for row in sorted(profile):
        fh.write(f"{row} {profile[row]}\n")
