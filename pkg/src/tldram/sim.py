"""Simulation loop: cores -> controller -> timing engine, plus the run report.

The loop is event driven. Between external events (a core becoming ready,
a request completing) nothing new enters the controller, so it jumps straight
to the next cycle at which some queued command can issue and lets FR-FCFS
choose among the commands issuable at that cycle.
"""
from __future__ import annotations

import csv
import dataclasses
import heapq
import io
from dataclasses import dataclass, field

import numpy as np

from . import __version__, kernel
from .config import RunConfig
from .controller import AddressMap, Controller, ControllerStats, MemRequest
from .energy import EnergyLedger, EnergyModel, savings_vs
from .errors import ConfigError, InternalError, WorkloadError
from .geometry import DEFAULT_ANCHORS
from .policies import NearCachePolicy, build_profile_map, read_profile
from .timing import tier_timings
from .workload import CoreModel, RowSpace, Trace, gen_hotcold, gen_zipf, read_trace

SCHEMA_HEADER = "# tldram-sim schema v1"


def derive_seed(seed, *path):
    """Stable 64-bit child seed for subsystem ``path`` of a run seed."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def build_traces(config):
    """One trace per core, as dictated by ``config.trace``."""
    t = config.trace
    geometry = config.geometry.build()
    amap = AddressMap.for_geometry(geometry, config.geometry.address_order)
    count = config.cores.count
    if t.source == "file":
        paths = [p.strip() for p in t.path.split(",") if p.strip()]
        if len(paths) != count:
            raise ConfigError(f"trace.path lists {len(paths)} files for {count} cores")
        return [read_trace(p, amap.capacity) for p in paths]
    traces = []
    for c in range(count):
        space = RowSpace(amap, config.trace_rows, bank_offset=c)
        seed = derive_seed(config.seed, 1, c)
        if t.source == "hotcold":
            traces.append(gen_hotcold(seed, t.n, t.hot_rows, t.hot_fraction, t.write_fraction,
                                      t.bubble_mean, space))
        else:
            traces.append(gen_zipf(seed, t.n, t.zipf_exponent, t.zipf_rows, t.write_fraction,
                                   t.bubble_mean, space))
    return traces


def load_page_map(config, geometry):
    p = config.policy
    if not p.profile_file:
        return None
    try:
        with open(p.profile_file) as fh:
            profile = read_profile(fh)
    except OSError as e:
        raise ConfigError(f"cannot read profile {p.profile_file}: {e}") from None
    return build_profile_map(profile, p.profile_slots, geometry.rows_per_subarray, geometry.near_rows,
                             geometry.banks * geometry.subarrays_per_bank, p.profile_mode)


def row_profile(config, traces=None):
    """Access counts per global logical row id over all cores' traces."""
    geometry = config.geometry.build()
    amap = AddressMap.for_geometry(geometry, config.geometry.address_order)
    counts = {}
    for trace in traces if traces is not None else build_traces(config):
        bank, sa, row, _ = amap.decode_array(trace.address)
        gid = (bank * geometry.subarrays_per_bank + sa) * geometry.rows_per_subarray + row
        ids, n = np.unique(gid, return_counts=True)
        for i, c in zip(ids.tolist(), n.tolist()):
            counts[i] = counts.get(i, 0) + c
    return counts


def _percentile(values, q):
    if len(values) == 0:
        return 0.0
    # nearest-rank
    a = np.sort(np.asarray(values, dtype=np.int64))
    k = max(0, int(np.ceil(q / 100.0 * len(a))) - 1)
    return float(a[k])


@dataclass
class StatsReport:
    per_core_ipc: list
    mean_latency: float
    p95_latency: float
    near_fraction: float
    row_hit_rate: float
    migrations: int
    requests: int
    elapsed_cycles: int
    energy: dict
    config: RunConfig
    weighted_speedup: float | None = None
    savings_vs_baseline: float | None = None
    per_core_latency: list = field(default_factory=list)
    version: str = __version__

    @property
    def seed(self):
        return self.config.seed

    @property
    def ipc(self):
        return sum(self.per_core_ipc) / len(self.per_core_ipc)

    def rows(self):
        out = [("version", self.version), ("seed", self.seed), ("requests", self.requests),
               ("elapsed_cycles", self.elapsed_cycles)]
        for i, v in enumerate(self.per_core_ipc):
            out.append((f"ipc.core{i}", v))
        for i, v in enumerate(self.per_core_latency):
            out.append((f"mean_latency.core{i}", v))
        out += [
            ("weighted_speedup", self.weighted_speedup),
            ("mean_latency", self.mean_latency),
            ("p95_latency", self.p95_latency),
            ("near_fraction", self.near_fraction),
            ("row_hit_rate", self.row_hit_rate),
            ("migrations", self.migrations),
        ]
        for k, v in self.energy.items():
            out.append((f"energy.{k}", v))
        out.append(("savings_vs_baseline", self.savings_vs_baseline))
        for k, v in self.config.items().items():
            out.append((f"config.{k}", v))
        return out

    def to_csv(self):
        buf = io.StringIO()
        buf.write(SCHEMA_HEADER + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in self.rows():
            w.writerow([k, _cell(v)])
        return buf.getvalue()


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


@dataclass
class SimResult:
    report: StatsReport
    controller: Controller
    cores: list
    traces: list


def build_controller(config, record_commands=False, record_service=False, check_invariants=False,
                     timings=None):
    geometry = config.geometry.build()
    if timings is None:
        timings = tier_timings(geometry, DEFAULT_ANCHORS, config.timing.decomposition(), config.timing.cycle_ns)
    p = config.policy
    policy = NearCachePolicy(p.kind, p.wait_threshold, p.benefit_cap)
    return Controller(
        geometry, timings, policy,
        cache_slots=config.cache_slots,
        page_map=load_page_map(config, geometry),
        aging_cap=config.controller.aging_cap,
        queue_capacity=config.controller.queue_capacity,
        decay_epoch=p.decay_epoch,
        energy=EnergyModel(geometry, DEFAULT_ANCHORS, config.energy.rdwr_cost),
        data_seed=derive_seed(config.seed, 0),
        record_commands=record_commands,
        record_service=record_service,
        check_invariants=check_invariants,
    )


def _decode(trace, controller, config):
    """Per-access ``(bank, sa, lrow, col, home)`` arrays; rejects accesses to cache-reserved rows."""
    geometry = controller.geometry
    amap = AddressMap.for_geometry(geometry, config.geometry.address_order)
    bank, sa, lrow, col = amap.decode_array(trace.address)
    placement = controller.placement
    home = placement.home_array(lrow)
    if placement.moved:
        gid = (bank * geometry.subarrays_per_bank + sa) * geometry.rows_per_subarray + lrow
        for i in np.flatnonzero(np.isin(gid, list(placement.moved))):
            home[i] = placement.moved[int(gid[i])]
    if placement.cache_slots:
        reserved = (home < placement.cache_slots)
        if reserved.any():
            bad = int(np.flatnonzero(reserved)[0])
            raise WorkloadError(
                f"address {int(trace.address[bad]):#x} falls in a near row reserved for caching", bad + 1)
    return bank, sa, lrow, col, home


def _core_for(index, trace, controller, config):
    bank, sa, lrow, col, home = _decode(trace, controller, config)
    core = CoreModel(index, trace.bubbles.tolist(), trace.is_write.tolist(), trace.address.tolist(),
                     config.cores.max_outstanding)
    core_cols = (bank.tolist(), sa.tolist(), lrow.tolist(), col.tolist(), home.tolist())
    return core, core_cols


def simulate(config, traces=None, record_commands=False, record_service=False, check_invariants=False,
             compiled=None, timings=None):
    """Run one configuration to completion.

    ``compiled`` selects the compiled loop (faster, statistics only). By
    default it is used whenever numba is installed and nothing beyond the
    statistics is recorded. Both loops give identical reports. ``timings``
    overrides the per-tier cycle timings derived from the config.
    """
    if traces is None:
        traces = build_traces(config)
    if len(traces) != config.cores.count:
        raise ConfigError(f"{len(traces)} traces for {config.cores.count} cores")
    ctrl = build_controller(config, record_commands, record_service, check_invariants, timings)
    wants_detail = record_commands or record_service or check_invariants
    if compiled is None:
        compiled = kernel.available() and not wants_detail
    if compiled:
        if wants_detail:
            raise ConfigError("the compiled loop records statistics only")
        if not kernel.available():
            raise ConfigError("the compiled loop needs numba")
        return _simulate_compiled(config, traces, ctrl)
    cores, cols = [], []
    for i, tr in enumerate(traces):
        c, cc = _core_for(i, tr, ctrl, config)
        cores.append(c)
        cols.append(cc)

    heap = []
    next_id = 0
    now = 0
    advance = ctrl.advance
    on_complete = ctrl.on_complete
    queue = ctrl.queue
    cap = ctrl.queue_capacity
    pending = [c for c in cores if c.n]
    inf = float("inf")
    while True:
        while heap and heap[0][0] <= now:
            _, _, req = heapq.heappop(heap)
            on_complete(req)
            cores[req.core].complete(req.completion)
        t_ev = heap[0][0] if heap else inf
        blocked = False
        if pending:
            finished = False
            for core in pending:
                if core.stalled:
                    continue
                if core.ready_at <= now:
                    if len(queue) < cap:
                        i = core.issue(now)
                        bank, sa, lrow, col, home = cols[core.index]
                        queue.append(MemRequest(next_id, core.index, core.addresses[i], core.writes[i], now,
                                                bank[i], sa[i], lrow[i], col[i], home[i]))
                        next_id += 1
                        if core.cursor >= core.n:
                            finished = True
                        elif not core.stalled and core.ready_at < t_ev:
                            t_ev = core.ready_at
                    else:
                        blocked = True
                elif core.ready_at < t_ev:
                    t_ev = core.ready_at
            if finished:
                pending = [c for c in pending if c.cursor < c.n]
        if queue or ctrl.n_jobs:
            now, t_ev, busy = advance(now, t_ev, heap, blocked)
            if busy:
                continue
        if t_ev == inf:
            if not ctrl.idle:
                raise InternalError(f"simulation stalled at cycle {now} with work queued")
            break
        now = t_ev

    ctrl.engine.settle()
    if check_invariants:
        ctrl.check()
    per_core = [ctrl.per_core.get(c.index, (0, 0)) for c in cores]
    report = make_report(config, ctrl.stats, ctrl.ledger, ctrl.latencies, per_core,
                         [c.ipc for c in cores], [c.finish for c in cores])
    return SimResult(report, ctrl, cores, traces)


def _simulate_compiled(config, traces, ctrl):
    cols = [_decode(tr, ctrl, config) for tr in traces]
    n = np.array([len(tr) for tr in traces], dtype=np.int64)
    off = np.concatenate(([0], np.cumsum(n)[:-1])).astype(np.int64)

    def cat(arrays, dtype=np.int64):
        return np.ascontiguousarray(np.concatenate(arrays), dtype=dtype) if arrays else np.zeros(0, dtype)

    timings = ctrl.engine.timings
    tt = [np.array([getattr(t, name) for t in timings], dtype=np.int64)
          for name in ("trc", "tras", "trp", "trcd", "tmig")]
    t0 = timings[0]
    g = ctrl.geometry
    p = config.policy
    out = kernel._run(
        off, n, cat([tr.bubbles for tr in traces]), cat([tr.is_write for tr in traces], np.bool_),
        cat([c[0] for c in cols]), cat([c[1] for c in cols]), cat([c[4] for c in cols]),
        np.asarray(ctrl.row_tier, dtype=np.int64), *tt, t0.tcl, t0.twr, t0.tccd,
        g.banks, g.subarrays_per_bank, g.rows_per_subarray, g.is_tiered,
        config.cores.max_outstanding, ctrl.aging_cap, ctrl.queue_capacity,
        kernel.POLICY_CODES[ctrl.policy.kind.value], ctrl.cache_slots, p.wait_threshold, p.benefit_cap,
        p.decay_epoch, np.asarray(ctrl._tier_power, dtype=np.float64), float(ctrl._rdwr),
    )
    st, acts, e_act, e_mig, e_rw, lat, pc_cnt, pc_lat, retired, finish = out
    if st[kernel.S_ERR]:
        raise InternalError(f"compiled loop failed with code {int(st[kernel.S_ERR])}")
    stats = ControllerStats(
        requests=int(st[kernel.S_REQ]), reads=int(st[kernel.S_RD]), writes=int(st[kernel.S_WR]),
        latency_sum=int(st[kernel.S_LAT]), near_served=int(st[kernel.S_NEAR]),
        far_served=int(st[kernel.S_FAR]), row_hits=int(st[kernel.S_HIT]),
        migrations=int(st[kernel.S_MIG]), migrations_decided=int(st[kernel.S_DEC]),
        writebacks=int(st[kernel.S_WB]),
    )
    if stats.migrations != stats.migrations_decided + stats.writebacks:
        raise InternalError("MIG count disagrees with migration decisions")
    ledger = EnergyLedger(float(e_act), float(e_mig), float(e_rw), acts.tolist(), stats.migrations,
                          int(st[kernel.S_COLOPS]))
    ipcs = [int(r) / int(f) if f else 0.0 for r, f in zip(retired, finish)]
    per_core = list(zip(pc_cnt.tolist(), pc_lat.tolist()))
    report = make_report(config, stats, ledger, lat, per_core, ipcs, finish.tolist())
    return SimResult(report, None, None, traces)


def make_report(config, s, led, latencies, per_core, ipcs, finishes):
    """Assemble a ``StatsReport`` from run totals; ``per_core`` holds (count, latency sum) pairs."""
    n = s.requests
    energy = {
        "activation": led.activation_energy,
        "migration": led.migration_energy,
        "rdwr": led.rdwr_energy,
        "total": led.total,
    }
    for i, c in enumerate(led.activations):
        energy[f"activations.tier{i}"] = c
    per_core_lat = [tot / cnt if cnt else 0.0 for cnt, tot in per_core]
    return StatsReport(
        per_core_ipc=ipcs,
        mean_latency=s.latency_sum / n if n else 0.0,
        p95_latency=_percentile(latencies, 95),
        near_fraction=s.near_served / n if n else 0.0,
        row_hit_rate=s.row_hits / n if n else 0.0,
        migrations=s.migrations,
        requests=n,
        elapsed_cycles=max(finishes, default=0),
        energy=energy,
        config=config,
        per_core_latency=per_core_lat,
    )


def run(config, traces=None):
    """Simulate ``config``; if it names a baseline, fill the comparison fields too."""
    result = simulate(config, traces)
    report = result.report
    if config.baseline:
        from .config import load
        base_cfg = load(config.baseline)
        check_comparable(config, base_cfg)
        base = simulate(base_cfg, result.traces)
        attach_baseline(report, result.traces, base_cfg, base)
    return report


def check_comparable(a, b):
    """Both configs must generate the same traces (``trace.rows`` compared after resolving auto)."""
    ta = dataclasses.replace(a.trace, rows=a.trace_rows)
    tb = dataclasses.replace(b.trace, rows=b.trace_rows)
    if a.seed != b.seed or ta != tb or a.cores != b.cores:
        raise ConfigError("compared configs must share seed, trace source and core setup")


def alone_ipcs(config, traces):
    """IPC of each core's trace run by itself on ``config``."""
    if len(traces) == 1:
        return simulate(config, traces).report.per_core_ipc
    solo = config.replace(**{"cores.count": 1})
    return [simulate(solo, [t]).report.per_core_ipc[0] for t in traces]


def weighted_speedup(ipcs, reference_ipcs):
    return sum(a / b for a, b in zip(ipcs, reference_ipcs))


def attach_baseline(report, traces, base_cfg, base_result):
    ref = alone_ipcs(base_cfg, traces) if len(traces) > 1 else base_result.report.per_core_ipc
    report.weighted_speedup = weighted_speedup(report.per_core_ipc, ref)
    led_total = report.energy["total"]
    base_total = base_result.report.energy["total"]
    report.savings_vs_baseline = None if base_total == 0 else (base_total - led_total) / base_total
    return report


__all__ = [
    "SCHEMA_HEADER", "StatsReport", "SimResult", "simulate", "run", "build_traces", "row_profile",
    "derive_seed", "weighted_speedup", "alone_ipcs", "savings_vs",
]
