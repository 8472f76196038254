"""Command-level bank state machine with tier-aware timing.

Every bank tracks the earliest cycle at which each command kind may issue.
Those bounds only ever grow, so each new command is checked against the
accumulated maximum of all constraints imposed by earlier commands.

``MIG`` copies a full row between tiers of one subarray over the shared
bitlines. It is self-activating: it needs a precharged bank, holds the bank
for ``tMIG`` of the slower participant and leaves the bank precharged. It never
touches the channel beyond its single command slot.
"""
from __future__ import annotations

from collections import defaultdict
from typing import NamedTuple

from .errors import ProtocolError
from .geometry import DEFAULT_ANCHORS, timing_params_for

ACT, RD, WR, PRE, MIG = "ACT", "RD", "WR", "PRE", "MIG"
KINDS = (ACT, RD, WR, PRE, MIG)

PRECHARGED, ACTIVATING, ACTIVE, PRECHARGING, MIGRATING = (
    "PRECHARGED", "ACTIVATING", "ACTIVE", "PRECHARGING", "MIGRATING",
)

MASK64 = (1 << 64) - 1


class Command(NamedTuple):
    """One DRAM command. ``arg`` is the column for RD/WR, the destination row for MIG."""

    kind: str
    bank: int
    subarray: int
    row: int
    arg: int = -1
    cycle: int = -1

    def at(self, cycle):
        return self._replace(cycle=cycle)


def tier_timings(geometry, anchors=DEFAULT_ANCHORS, decomposition=None, cycle_ns=1.25):
    """Per-tier timing parameters converted to controller cycles."""
    return [
        timing_params_for(geometry, i, anchors, decomposition).to_cycles(cycle_ns)
        for i in range(len(geometry.tiers))
    ]


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def initial_token(seed, row_key, col):
    """Power-on content of column ``col`` of the row identified by ``row_key``."""
    return splitmix64((seed * 0x100000001B3) ^ (row_key << 16) ^ col)


class DataStore:
    """Row images, stored sparsely.

    A row image is ``(base_key, overrides)``: column ``c`` holds
    ``overrides[c]`` if written, else ``initial_token(seed, base_key, c)``.
    Copying a row copies both parts, so migration is O(written columns).
    ``owner`` maps a physical row key to the key whose power-on content it
    holds; the controller uses it when logical and physical rows differ.
    """

    def __init__(self, geometry, seed=0, owner=None):
        self.geometry = geometry
        self.seed = seed
        self.columns = geometry.columns_per_row
        self._rows = geometry.rows_per_subarray
        self._sas = geometry.subarrays_per_bank
        self._owner = owner
        self.content = {}

    def key(self, bank, sa, row):
        return (bank * self._sas + sa) * self._rows + row

    def _image(self, key):
        img = self.content.get(key)
        if img is None:
            base = key if self._owner is None else self._owner(key)
            img = self.content[key] = (base, {})
        return img

    def read(self, bank, sa, row, col):
        base, over = self._image(self.key(bank, sa, row))
        v = over.get(col)
        return initial_token(self.seed, base, col) if v is None else v

    def write(self, bank, sa, row, col, value):
        self._image(self.key(bank, sa, row))[1][col] = value

    def copy_row(self, bank, sa, src, dst):
        base, over = self._image(self.key(bank, sa, src))
        self.content[self.key(bank, sa, dst)] = (base, dict(over))

    def row_image(self, bank, sa, row):
        base, over = self._image(self.key(bank, sa, row))
        return [over[c] if c in over else initial_token(self.seed, base, c)
                for c in range(self.columns)]


class BankState:
    """Protocol state of one bank.

    ``phase`` is the latched state (PRECHARGED, ACTIVE or MIGRATING);
    ``phase_at`` refines it with the in-flight windows.
    """

    __slots__ = (
        "phase", "open_sa", "open_row", "open_tier",
        "act_ok", "col_ok", "pre_ok", "busy_until",
        "last_act", "last_pre", "pending_copy",
    )

    def __init__(self):
        self.phase = PRECHARGED
        self.open_sa = -1
        self.open_row = None
        self.open_tier = None
        self.act_ok = 0
        self.col_ok = 0
        self.pre_ok = 0
        self.busy_until = 0
        self.last_act = -1
        self.last_pre = -1
        self.pending_copy = None

    @property
    def earliest(self):
        return {ACT: self.act_ok, MIG: self.act_ok, RD: self.col_ok, WR: self.col_ok, PRE: self.pre_ok}

    def phase_at(self, now, trcd=0, trp=0):
        """Phase at cycle ``now`` given the open tier's tRCD and the closed tier's tRP."""
        if self.phase == MIGRATING:
            return MIGRATING if now < self.busy_until else PRECHARGED
        if self.open_row is not None:
            return ACTIVATING if now < self.last_act + trcd else ACTIVE
        if self.last_pre >= 0 and now < self.last_pre + trp:
            return PRECHARGING
        return PRECHARGED


def _legal(state, cmd):
    """Phase legality only; raises if ``cmd`` could never issue from this state."""
    k = cmd.kind
    if k in (ACT, MIG):
        if state.open_row is not None:
            raise ProtocolError(f"{k} to bank {cmd.bank} while phase ACTIVE (row {state.open_row} open)")
    elif k in (RD, WR):
        if state.open_row is None:
            raise ProtocolError(f"{k} to bank {cmd.bank} while phase {state.phase}")
        if (state.open_sa, state.open_row) != (cmd.subarray, cmd.row):
            raise ProtocolError(
                f"{k} to bank {cmd.bank} row {cmd.subarray}/{cmd.row} but open row is "
                f"{state.open_sa}/{state.open_row}"
            )
    elif k == PRE:
        if state.open_row is None:
            raise ProtocolError(f"PRE to bank {cmd.bank} while phase {state.phase}")
    else:
        raise ProtocolError(f"unknown command kind {k!r}")


def earliest_issue(state, cmd, now=0):
    """Smallest cycle >= ``now`` at which ``cmd`` violates no per-bank constraint."""
    _legal(state, cmd)
    k = cmd.kind
    if k in (ACT, MIG):
        t = state.act_ok
    elif k == PRE:
        t = state.pre_ok
    else:
        t = state.col_ok
    return max(now, t)


class TimingEngine:
    """Owns the bank states and data store of one channel.

    ``timings`` is a list of per-tier ``TimingParams`` in cycles.
    """

    def __init__(self, geometry, timings, store=None, record=False):
        self.geometry = geometry
        self.timings = timings
        self.row_tier = geometry.row_tiers()
        self.banks = [BankState() for _ in range(geometry.banks)]
        self.store = store if store is not None else DataStore(geometry)
        self.trace = [] if record else None
        self.last_issue = -1
        self.counts = dict.fromkeys(KINDS, 0)
        # Per-tier cycle tables, indexed by tier.
        self._trc = [t.trc for t in timings]
        self._tras = [t.tras for t in timings]
        self._trp = [t.trp for t in timings]
        self._trcd = [t.trcd for t in timings]
        self._tmig = [t.tmig for t in timings]
        t0 = timings[0]
        self.tcl, self.twr, self.tccd = t0.tcl, t0.twr, t0.tccd

    def mig_tier(self, src, dst):
        ts, td = self.row_tier[src], self.row_tier[dst]
        if ts == td:
            raise ProtocolError(f"MIG rows {src} and {dst} are both in tier {ts}")
        return ts if ts > td else td

    def mig_cycles(self, src, dst):
        return self._tmig[self.mig_tier(src, dst)]

    def earliest_issue(self, cmd, now=0):
        return max(earliest_issue(self.banks[cmd.bank], cmd, now), self.last_issue + 1)

    def _settle(self, b):
        pc = b.pending_copy
        if pc is not None:
            bank, sa, src, dst = pc
            self.store.copy_row(bank, sa, src, dst)
            b.pending_copy = None
            b.phase = PRECHARGED

    def settle(self):
        """Apply every outstanding migration copy (end of simulation)."""
        for b in self.banks:
            self._settle(b)

    def issue(self, kind, bank, sa, row, arg=-1, now=0, value=None):
        """Issue one command at cycle ``now``.

        Returns ``(completion_cycle, data)``; ``data`` is the column token for
        RD and ``None`` otherwise.
        """
        b = self.banks[bank]
        if now <= self.last_issue:
            raise ProtocolError(f"{kind} at cycle {now}: channel already used at {self.last_issue}")
        if b.pending_copy is not None:
            if now < b.busy_until:
                raise ProtocolError(f"{kind} to bank {bank} at {now} during MIG (busy until {b.busy_until})")
            self._settle(b)
        data = None
        if kind == RD or kind == WR:
            if b.open_row != row or b.open_sa != sa:
                _legal(b, Command(kind, bank, sa, row, arg))
            if now < b.col_ok:
                raise ProtocolError(f"{kind} to bank {bank} at {now} before {b.col_ok}")
            b.col_ok = now + self.tccd
            if kind == RD:
                data = self.store.read(bank, sa, row, arg)
                done = now + self.tcl
            else:
                self.store.write(bank, sa, row, arg, value)
                done = now + self.tcl + self.twr
                if done > b.pre_ok:
                    b.pre_ok = done
        elif kind == ACT:
            if b.open_row is not None:
                _legal(b, Command(kind, bank, sa, row, arg))
            if now < b.act_ok:
                raise ProtocolError(f"ACT to bank {bank} at {now} before {b.act_ok}")
            tier = self.row_tier[row]
            b.phase = ACTIVE
            b.open_sa, b.open_row, b.open_tier = sa, row, tier
            b.last_act = now
            x = now + self._trc[tier]
            if x > b.act_ok:
                b.act_ok = x
            x = now + self._trcd[tier]
            if x > b.col_ok:
                b.col_ok = x
            x = now + self._tras[tier]
            if x > b.pre_ok:
                b.pre_ok = x
            done = now + self._trcd[tier]
        elif kind == PRE:
            if b.open_row is None:
                _legal(b, Command(kind, bank, sa, row, arg))
            if now < b.pre_ok:
                raise ProtocolError(f"PRE to bank {bank} at {now} before {b.pre_ok}")
            row = b.open_row
            sa = b.open_sa
            x = now + self._trp[b.open_tier]
            if x > b.act_ok:
                b.act_ok = x
            b.phase = PRECHARGED
            b.open_sa, b.open_row, b.open_tier = -1, None, None
            b.last_pre = now
            done = x
        elif kind == MIG:
            if b.open_row is not None:
                _legal(b, Command(kind, bank, sa, row, arg))
            if now < b.act_ok:
                raise ProtocolError(f"MIG to bank {bank} at {now} before {b.act_ok}")
            done = now + self._tmig[self.mig_tier(row, arg)]
            b.phase = MIGRATING
            b.busy_until = done
            b.act_ok = done
            if done > b.col_ok:
                b.col_ok = done
            if done > b.pre_ok:
                b.pre_ok = done
            b.pending_copy = (bank, sa, row, arg)
        else:
            raise ProtocolError(f"unknown command kind {kind!r}")
        self.last_issue = now
        self.counts[kind] += 1
        if self.trace is not None:
            self.trace.append(Command(kind, bank, sa, row, arg, now))
        return done, data

    def apply(self, cmd, now=None):
        """``issue`` for a ``Command`` record; uses ``cmd.cycle`` when ``now`` is omitted."""
        now = cmd.cycle if now is None else now
        return self.issue(cmd.kind, cmd.bank, cmd.subarray, cmd.row, cmd.arg, now)


# --- trace dump format: ``cycle kind bank subarray row [row2|col]`` -------------

def format_command(cmd):
    parts = [str(cmd.cycle), cmd.kind, str(cmd.bank), str(cmd.subarray), str(cmd.row)]
    if cmd.kind in (RD, WR, MIG):
        parts.append(str(cmd.arg))
    return " ".join(parts)


def dump_command_trace(trace, fh):
    for cmd in trace:
        fh.write(format_command(cmd) + "\n")


def parse_command_trace(lines):
    out = []
    for n, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        f = line.split()
        if len(f) not in (5, 6) or f[1] not in KINDS:
            raise ValueError(f"line {n}: malformed command {line!r}")
        c, kind, bank, sa, row = int(f[0]), f[1], int(f[2]), int(f[3]), int(f[4])
        arg = int(f[5]) if len(f) == 6 else -1
        out.append(Command(kind, bank, sa, row, arg, c))
    return out


# --- independent oracle -------------------------------------------------------

class Violation(NamedTuple):
    constraint: str
    first: Command | None
    second: Command


def validate_command_trace(trace, geometry, timings):
    """Re-check a timed command trace from scratch.

    Every ordered pair of commands on the same bank is tested against the
    pairwise minimum gaps. Pairs further apart than the largest gap cannot
    violate anything and are skipped. Phase legality is checked by scanning
    back to the most recent row command on the bank. Returns all violations.
    """
    tiers = geometry.row_tiers()
    nrows = len(tiers)
    violations = []

    def tier(row):
        return tiers[row] if 0 <= row < nrows else None

    for prev, cur in zip(trace, trace[1:]):
        if cur.cycle <= prev.cycle:
            violations.append(Violation("channel", prev, cur))

    window = max(max(t.trc, t.tmig, t.tras, t.tcl + t.twr, t.trp, t.trcd, t.tccd) for t in timings)
    by_bank = defaultdict(list)
    for cmd in trace:
        ok = (0 <= cmd.bank < geometry.banks and 0 <= cmd.subarray < geometry.subarrays_per_bank
              and tier(cmd.row) is not None)
        if cmd.kind in (RD, WR):
            ok = ok and 0 <= cmd.arg < geometry.columns_per_row
        if cmd.kind == MIG:
            ok = ok and tier(cmd.arg) is not None and tier(cmd.arg) != tier(cmd.row)
        if not ok:
            violations.append(Violation("structure", None, cmd))
            continue
        by_bank[cmd.bank].append(cmd)

    def mig_tier(c):
        return max(tiers[c.row], tiers[c.arg])

    for cmds in by_bank.values():
        for j, b in enumerate(cmds):
            # phase legality
            last = None
            for i in range(j - 1, -1, -1):
                if cmds[i].kind in (ACT, PRE, MIG):
                    last = cmds[i]
                    break
            if b.kind in (RD, WR, PRE):
                if last is None or last.kind != ACT or (last.subarray, last.row) != (b.subarray, b.row):
                    violations.append(Violation("phase", last, b))
            elif last is not None and last.kind == ACT:
                violations.append(Violation("phase", last, b))
            # pairwise gaps
            i = j - 1
            while i >= 0 and b.cycle - cmds[i].cycle < window:
                a = cmds[i]
                gap = b.cycle - a.cycle
                i -= 1
                need = []
                if a.kind == ACT:
                    t = timings[tiers[a.row]]
                    if b.kind in (ACT, MIG):
                        need.append(("tRC", t.trc))
                    elif b.kind in (RD, WR):
                        need.append(("tRCD", t.trcd))
                    elif b.kind == PRE:
                        need.append(("tRAS", t.tras))
                elif a.kind == PRE:
                    if b.kind in (ACT, MIG):
                        need.append(("tRP", timings[tiers[a.row]].trp))
                elif a.kind == MIG:
                    need.append(("tMIG", timings[mig_tier(a)].tmig))
                elif a.kind in (RD, WR):
                    if b.kind in (RD, WR):
                        need.append(("tCCD", timings[0].tccd))
                    if a.kind == WR and b.kind == PRE:
                        need.append(("tWR", timings[0].tcl + timings[0].twr))
                for name, g in need:
                    if gap < g:
                        violations.append(Violation(name, a, b))
    return violations
