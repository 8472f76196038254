"""Memory controller: address mapping, FR-FCFS scheduling, tier placement.

Logical rows (what addresses decode to) and physical rows (what the bank
sees) differ on a tiered geometry. Logical rows are laid out far-first: the
first ``rows - near`` logical rows of a subarray live in the far tiers and the
remaining ones in the near tier. A workload that stays below the far-row count
touches exactly the same addresses on a tiered geometry and on a conventional
one with the same cells per bitline. Near rows reserved as cache slots are
not addressable.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .energy import EnergyModel
from .errors import ConfigError, InternalError, WorkloadError
from .policies import (
    SERVE_FAR_THEN_MIGRATE,
    SERVE_NEAR,
    NearCachePolicy,
    NearCacheState,
    PolicyKind,
)
from .timing import ACT, MIG, PRE, RD, WR, Command, DataStore, TimingEngine, splitmix64

FIELDS = ("column", "bank", "subarray", "row")

# scheduling priority classes, lowest first; request id is added on top
_AGED, _JOB, _HIT, _MISS = 0, 1 << 48, 2 << 48, 3 << 48


@dataclass(frozen=True)
class AddressMap:
    """Mixed-radix split of a byte address into DRAM coordinates.

    Fields are listed low to high above the byte-in-column offset. With
    power-of-two dimensions this is the usual bit-field layout.
    """

    columns: int
    banks: int
    subarrays: int
    rows: int
    bytes_per_column: int = 64
    order: tuple = FIELDS

    def __post_init__(self):
        if sorted(self.order) != sorted(FIELDS):
            raise ConfigError(f"address order must be a permutation of {FIELDS}, got {self.order}")

    @classmethod
    def for_geometry(cls, geometry, order=FIELDS):
        return cls(geometry.columns_per_row, geometry.banks, geometry.subarrays_per_bank,
                   geometry.rows_per_subarray, geometry.bytes_per_column, tuple(order))

    def _radix(self, name):
        return {"column": self.columns, "bank": self.banks,
                "subarray": self.subarrays, "row": self.rows}[name]

    @property
    def capacity(self):
        return self.bytes_per_column * self.columns * self.banks * self.subarrays * self.rows

    def decode(self, address):
        """Return ``(bank, subarray, row, column)``."""
        if not 0 <= address < self.capacity:
            raise WorkloadError(f"address {address:#x} outside capacity {self.capacity:#x}")
        x = address // self.bytes_per_column
        out = {}
        for name in self.order:
            r = self._radix(name)
            out[name] = x % r
            x //= r
        return out["bank"], out["subarray"], out["row"], out["column"]

    def encode(self, bank, subarray, row, column):
        vals = {"column": column, "bank": bank, "subarray": subarray, "row": row}
        x = 0
        for name in reversed(self.order):
            r = self._radix(name)
            v = vals[name]
            if not 0 <= v < r:
                raise WorkloadError(f"{name} {v} outside [0, {r})")
            x = x * r + v
        return x * self.bytes_per_column

    def decode_array(self, addresses):
        a = np.asarray(addresses, dtype=np.int64)
        if a.size and (a.min() < 0 or a.max() >= self.capacity):
            bad = int(np.flatnonzero((a < 0) | (a >= self.capacity))[0])
            raise WorkloadError(f"address {int(a[bad]):#x} outside capacity {self.capacity:#x}", bad + 1)
        x = a // self.bytes_per_column
        out = {}
        for name in self.order:
            r = self._radix(name)
            out[name] = x % r
            x = x // r
        return out["bank"], out["subarray"], out["row"], out["column"]

    def encode_array(self, bank, subarray, row, column):
        vals = {"column": column, "bank": bank, "subarray": subarray, "row": row}
        x = np.zeros(np.shape(bank), dtype=np.int64)
        for name in reversed(self.order):
            x = x * self._radix(name) + np.asarray(vals[name], dtype=np.int64)
        return x * self.bytes_per_column


def decode(amap, address):
    return amap.decode(address)


class MemRequest:
    __slots__ = (
        "id", "core", "address", "is_write", "arrival", "completion",
        "bank", "sa", "lrow", "col", "home", "first_cmd", "opened",
        "served_tier", "row_hit", "value",
    )

    def __init__(self, id, core, address, is_write, arrival, bank=0, sa=0, lrow=0, col=0, home=0):
        self.id = id
        self.core = core
        self.address = address
        self.is_write = is_write
        self.arrival = arrival
        self.completion = None
        self.bank, self.sa, self.lrow, self.col, self.home = bank, sa, lrow, col, home
        self.first_cmd = -1
        self.opened = False
        self.served_tier = None
        self.row_hit = False
        self.value = None

    def __repr__(self):
        return (f"MemRequest(id={self.id}, core={self.core}, addr={self.address:#x}, "
                f"write={self.is_write}, arrival={self.arrival}, completion={self.completion})")


class RowPlacement:
    """Static logical-to-physical row mapping for one configuration."""

    def __init__(self, geometry, cache_slots=0, page_map=None):
        self.geometry = geometry
        self.rows = geometry.rows_per_subarray
        self.near = geometry.near_rows
        self.cache_slots = cache_slots
        if cache_slots > self.near:
            raise ConfigError(f"{cache_slots} cache slots exceed {self.near} near rows")
        self.far = self.rows - self.near
        # global logical id -> physical row, only for rows moved by a page map
        self.moved = {}
        if page_map is not None:
            for gid, near_row in page_map.indirection.items():
                lrow = gid % self.rows
                if not lrow < self.far:
                    raise ConfigError(f"page map source row {gid} is not a far row")
                if not cache_slots <= near_row < self.near:
                    raise ConfigError(f"page map target near row {near_row} unavailable")
                sub = gid - lrow
                displaced = sub + self.far + near_row
                self.moved[gid] = near_row
                self.moved[displaced] = lrow + self.near
        self.logical_of = {}
        for gid, prow in self.moved.items():
            self.logical_of[gid - gid % self.rows + prow] = gid

    def home(self, gid):
        p = self.moved.get(gid)
        if p is not None:
            return p
        lrow = gid % self.rows
        return (lrow + self.near) % self.rows

    def home_array(self, lrow):
        return (np.asarray(lrow, dtype=np.int64) + self.near) % self.rows

    def owner(self, pkey):
        """Logical global id whose power-on data sits in physical row key ``pkey``."""
        g = self.logical_of.get(pkey)
        if g is not None:
            return g
        prow = pkey % self.rows
        return pkey - prow + (prow - self.near) % self.rows


@dataclass
class ControllerStats:
    requests: int = 0
    reads: int = 0
    writes: int = 0
    latency_sum: int = 0
    near_served: int = 0
    far_served: int = 0
    row_hits: int = 0
    migrations: int = 0
    migrations_decided: int = 0
    writebacks: int = 0


class Controller:
    """Per-bank queues in front of a ``TimingEngine``.

    ``pick(now)`` finds the cycle ``t >= now`` of the next issuable command and
    the command FR-FCFS would choose at ``t``; ``issue`` commits it.
    """

    def __init__(self, geometry, timings, policy=None, cache_slots=0, page_map=None,
                 aging_cap=10_000, queue_capacity=64, decay_epoch=100_000,
                 energy=None, data_seed=0, record_commands=False, record_service=False,
                 check_invariants=False):
        self.geometry = geometry
        self.placement = RowPlacement(geometry, cache_slots, page_map)
        self.rows = geometry.rows_per_subarray
        self.sas = geometry.subarrays_per_bank
        store = DataStore(geometry, seed=data_seed, owner=self.placement.owner)
        self.engine = TimingEngine(geometry, timings, store, record=record_commands)
        self.banks = self.engine.banks
        self.row_tier = self.engine.row_tier
        self.tiered = geometry.is_tiered
        self.policy = policy or NearCachePolicy(PolicyKind.NONE)
        self.caching = self.tiered and cache_slots > 0 and self.policy.kind is not PolicyKind.NONE
        self.cache_slots = cache_slots if self.caching else 0
        self.caches = {}
        self.aging_cap = aging_cap
        self.queue_capacity = queue_capacity
        self.decay_epoch = decay_epoch
        self.next_decay = decay_epoch
        self.queue = []
        self.jobs = [[] for _ in range(geometry.banks)]
        self.n_jobs = 0
        self.energy = energy or EnergyModel(geometry)
        self.ledger = self.energy.new_ledger()
        self._tier_power = self.energy.tier_power
        self._rdwr = self.energy.rdwr_cost
        self.stats = ControllerStats()
        self.latencies = []
        self.per_core = {}
        self.data_seed = data_seed
        self.service_log = [] if record_service else None
        self.check_invariants = check_invariants
        self._completed = set()

    # --- queue -----------------------------------------------------------------

    @property
    def full(self):
        return len(self.queue) >= self.queue_capacity

    def cache_for(self, bank, sa):
        key = bank * self.sas + sa
        st = self.caches.get(key)
        if st is None:
            st = self.caches[key] = NearCacheState(self.cache_slots)
        return st

    def enqueue(self, req):
        if len(self.queue) >= self.queue_capacity:
            raise InternalError("enqueue on a full request queue")
        self.queue.append(req)

    # --- scheduling --------------------------------------------------------------

    def _target(self, req):
        """Physical row currently holding ``req``'s data."""
        if self.caching:
            st = self.caches.get(req.bank * self.sas + req.sa)
            if st is not None:
                slot = st.reverse.get(req.home)
                if slot is not None:
                    return slot
        return req.home

    def pick(self, now):
        """Return ``(t, kind, req, bank, row)`` for the next command, or None if idle.

        Candidates are each queued request's next command and each bank's
        pending migration step. Among those issuable at the earliest cycle
        ``t``: aged requests first (oldest), then migration steps, then row
        hits (lowest id), then the lowest request id. ``row`` is the physical
        row the request targets (None for migration steps).
        """
        t0 = self.engine.last_issue + 1
        if now > t0:
            t0 = now
        best_t = -1
        best_key = 0
        best = None
        banks = self.banks
        jobs = self.jobs
        if self.n_jobs:
            for bank, jl in enumerate(jobs):
                if jl:
                    b = banks[bank]
                    if b.open_row is not None:
                        t, kind = b.pre_ok, PRE
                    else:
                        t, kind = b.act_ok, MIG
                    if t < t0:
                        t = t0
                    if best is None or t < best_t:
                        best_t, best_key, best = t, _JOB, (kind, None, bank, None)
        aging = self.aging_cap
        caches = self.caches if self.caching else None
        sas = self.sas
        for req in self.queue:
            bank = req.bank
            if jobs[bank]:
                continue
            b = banks[bank]
            prow = req.home
            if caches is not None:
                st = caches.get(bank * sas + req.sa)
                if st is not None:
                    slot = st.reverse.get(prow)
                    if slot is not None:
                        prow = slot
            orow = b.open_row
            if orow is None:
                t, kind, key = b.act_ok, ACT, _MISS
            elif orow == prow and b.open_sa == req.sa:
                t, kind, key = b.col_ok, (WR if req.is_write else RD), _HIT
            else:
                t, kind, key = b.pre_ok, PRE, _MISS
            if t < t0:
                t = t0
            if best is not None and t > best_t:
                continue
            if t - req.arrival > aging:
                key = _AGED
            key += req.id
            if best is None or t < best_t or key < best_key:
                best_t, best_key, best = t, key, (kind, req, bank, prow)
        if best is None:
            return None
        return (best_t,) + best

    def advance(self, now, t_ev, heap, blocked=False):
        """Issue commands at their FR-FCFS cycles while they fall before ``t_ev``.

        Served requests are pushed on ``heap`` as ``(completion, id, req)`` and
        pull ``t_ev`` earlier. With ``blocked`` set (a core waits for queue
        space) control returns after the first served request. Returns
        ``(now, t_ev, busy)`` where ``busy`` means a command is still issuable
        before ``t_ev``.
        """
        banks = self.banks
        queue = self.queue
        engine = self.engine
        while True:
            if not queue and not self.n_jobs:
                return now, t_ev, False
            if len(queue) == 1 and not self.n_jobs:
                # Single candidate: same choice pick() would make, without the scan.
                req = queue[0]
                b = banks[req.bank]
                prow = req.home
                if self.caching:
                    st = self.caches.get(req.bank * self.sas + req.sa)
                    if st is not None:
                        slot = st.reverse.get(prow)
                        if slot is not None:
                            prow = slot
                t0 = engine.last_issue + 1
                if now > t0:
                    t0 = now
                orow = b.open_row
                if orow is None:
                    t = b.act_ok if b.act_ok > t0 else t0
                    if t >= t_ev:
                        return now, t_ev, False
                    if req.first_cmd < 0:
                        req.first_cmd = t
                    engine.issue(ACT, req.bank, req.sa, prow, -1, t)
                    tier = self.row_tier[prow]
                    led = self.ledger
                    led.activations[tier] += 1
                    led.activation_energy += self._tier_power[tier]
                    req.opened = True
                    now = t + 1
                    continue
                if orow == prow and b.open_sa == req.sa:
                    t = b.col_ok if b.col_ok > t0 else t0
                    if t >= t_ev:
                        return now, t_ev, False
                    if req.first_cmd < 0:
                        req.first_cmd = t
                    served = self._serve(t, WR if req.is_write else RD, req, req.bank, prow)
                else:
                    t = b.pre_ok if b.pre_ok > t0 else t0
                    if t >= t_ev:
                        return now, t_ev, False
                    if req.first_cmd < 0:
                        req.first_cmd = t
                    engine.issue(PRE, req.bank, b.open_sa, orow, -1, t)
                    req.opened = True
                    now = t + 1
                    continue
            else:
                p = self.pick(now)
                if p is None or p[0] >= t_ev:
                    return now, t_ev, False
                t = p[0]
                served = self.issue(t, p[1], p[2], p[3], p[4])
            now = t + 1
            if served is not None:
                c = served.completion
                heapq.heappush(heap, (c, served.id, served))
                if c < t_ev:
                    t_ev = c
                if blocked:
                    return now, t_ev, True

    def schedule(self, now):
        """The command FR-FCFS would issue at exactly ``now``, or None."""
        p = self.pick(now)
        if p is None or p[0] != now:
            return None
        t, kind, req, bank, prow = p
        b = self.banks[bank]
        if kind == PRE:
            return Command(PRE, bank, b.open_sa, b.open_row)
        if req is None:
            return Command(MIG, bank, *self.jobs[bank][0])
        if kind == ACT:
            return Command(ACT, bank, req.sa, prow)
        return Command(kind, bank, req.sa, prow, req.col)

    def issue(self, t, kind, req, bank, prow=None):
        """Issue a picked command at cycle ``t``. Returns the request it served, if any."""
        engine = self.engine
        if req is None:
            if kind == PRE:
                b = self.banks[bank]
                engine.issue(PRE, bank, b.open_sa, b.open_row, -1, t)
            else:
                sa, src, dst = self.jobs[bank].pop(0)
                self.n_jobs -= 1
                engine.issue(MIG, bank, sa, src, dst, t)
                self.ledger.migrations += 1
                self.ledger.migration_energy += self._tier_power[max(self.row_tier[src], self.row_tier[dst])]
                self.stats.migrations += 1
            return None
        if req.first_cmd < 0:
            req.first_cmd = t
        if kind == PRE:
            b = self.banks[bank]
            engine.issue(PRE, bank, b.open_sa, b.open_row, -1, t)
            req.opened = True
            return None
        if prow is None:
            prow = self._target(req)
        if kind == ACT:
            engine.issue(ACT, bank, req.sa, prow, -1, t)
            tier = self.row_tier[prow]
            led = self.ledger
            led.activations[tier] += 1
            led.activation_energy += self._tier_power[tier]
            req.opened = True
            return None
        return self._serve(t, kind, req, bank, prow)

    def _serve(self, t, kind, req, bank, prow):
        tier = self.row_tier[prow]
        if self.caching:
            self._maybe_decay(t)
            st = self.cache_for(bank, req.sa)
            decision = self.policy.on_access(st, req.home, req.first_cmd - req.arrival, t)
            action = decision.action
            if action == SERVE_NEAR:
                if decision.slot != prow:
                    raise InternalError(f"request {req.id} targeted row {prow}, policy says slot {decision.slot}")
                if kind == WR:
                    st.slots[decision.slot].dirty = True
        else:
            action = None
        if kind == WR:
            value = splitmix64(self.data_seed ^ (0xA5A5 << 40) ^ req.id)
            done, _ = self.engine.issue(WR, bank, req.sa, prow, req.col, t, value)
        else:
            done, value = self.engine.issue(RD, bank, req.sa, prow, req.col, t)
        req.value = value
        led = self.ledger
        led.column_ops += 1
        led.rdwr_energy += self._rdwr
        req.served_tier = tier
        req.row_hit = not req.opened
        req.completion = done
        self.queue.remove(req)
        if self.service_log is not None:
            self.service_log.append((req.id, req.is_write, req.bank, req.sa, req.lrow, req.col, value))
        if action == SERVE_FAR_THEN_MIGRATE:
            self._migrate(st, bank, req.sa, req.home, decision.slot, t)
            if self.check_invariants:
                st.check()
        return req

    def _migrate(self, st, bank, sa, far_row, slot, now):
        jl = self.jobs[bank]
        s = st.slots[slot]
        if s.far_row is not None:
            wb = st.evict(slot, now)
            if wb is not None:
                jl.append((sa, slot, wb))
                self.stats.writebacks += 1
                self.n_jobs += 1
        st.fill(slot, far_row, now)
        jl.append((sa, far_row, slot))
        self.n_jobs += 1
        self.stats.migrations_decided += 1

    def _maybe_decay(self, now):
        while now >= self.next_decay:
            for st in self.caches.values():
                st.decay()
            self.next_decay += self.decay_epoch

    # --- completion ------------------------------------------------------------

    def on_complete(self, req):
        if req.completion is None:
            raise InternalError(f"request {req.id} completed without a completion cycle")
        if req.id in self._completed:
            raise InternalError(f"request {req.id} completed twice")
        if self.check_invariants:
            self._completed.add(req.id)
        lat = req.completion - req.arrival
        s = self.stats
        s.requests += 1
        s.latency_sum += lat
        if req.is_write:
            s.writes += 1
        else:
            s.reads += 1
        if self.tiered and req.served_tier == 0:
            s.near_served += 1
        else:
            s.far_served += 1
        if req.row_hit:
            s.row_hits += 1
        self.latencies.append(lat)
        pc = self.per_core.get(req.core)
        if pc is None:
            pc = self.per_core[req.core] = [0, 0]
        pc[0] += 1
        pc[1] += lat
        return lat

    @property
    def mean_latency(self):
        s = self.stats
        return s.latency_sum / s.requests if s.requests else 0.0

    @property
    def idle(self):
        return not self.queue and not self.n_jobs

    def check(self):
        """Sweep structural invariants; raises ``InternalError``."""
        for st in self.caches.values():
            st.check()
            for s in st.slots:
                if s.benefit > self.policy.benefit_cap:
                    raise InternalError("benefit counter above saturation cap")
        expected = self.stats.migrations_decided + self.stats.writebacks
        if self.idle and self.stats.migrations != expected:
            raise InternalError(
                f"MIG count {self.stats.migrations} != decided {self.stats.migrations_decided}"
                f" + write-backs {self.stats.writebacks}"
            )


def completion_heap_push(heap, req):
    heapq.heappush(heap, (req.completion, req.id, req))
