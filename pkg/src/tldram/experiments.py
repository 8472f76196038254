"""Multi-run experiments: near-segment size sweeps, paired comparisons, tradeoff tables."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .config import RunConfig
from .errors import ConfigError
from .geometry import DEFAULT_ANCHORS, tradeoff_table
from .sim import SCHEMA_HEADER, attach_baseline, build_traces, check_comparable, simulate


def _csv(header, rows):
    buf = io.StringIO()
    buf.write(SCHEMA_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


@dataclass(frozen=True)
class SweepPoint:
    size: int
    ipc: float
    mean_latency: float
    near_fraction: float


def sweep_configs(config, sizes):
    """One config per near size: ``size`` near cells per bitline, ``size`` cache slots.

    The bitline keeps its total length, so growing the near segment shortens
    the far one. Unless ``trace.rows`` is set, every point replays the same
    trace, spanning the far rows of the largest near size.
    """
    total = sum(config.geometry.tier_cells)
    for s in sizes:
        if not 1 <= s < total:
            raise ConfigError(f"near size {s} must lie in [1, {total - 1}]")
    changes = {}
    if config.trace.rows is None and sizes:
        changes["trace.rows"] = total - max(sizes)
    out = []
    for s in sizes:
        out.append(config.replace(**changes, **{"geometry.tier_cells": (s, total - s), "policy.slots": s}))
    return out


def _point(args):
    size, cfg, traces = args
    r = simulate(cfg, traces).report
    return SweepPoint(size, r.ipc, r.mean_latency, r.near_fraction)


def sweep_near_size(config, sizes, jobs=1):
    """Run one simulation per near size; results follow the order of ``sizes``."""
    sizes = list(sizes)
    cfgs = sweep_configs(config, sizes)
    if not cfgs:
        return []
    traces = build_traces(cfgs[0])
    work = [(s, c, traces) for s, c in zip(sizes, cfgs)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            return list(ex.map(_point, work))
    return [_point(w) for w in work]


def sweep_csv(points):
    return _csv(("size", "ipc", "mean_latency", "near_fraction"),
                [(p.size, p.ipc, p.mean_latency, p.near_fraction) for p in points])


@dataclass
class Comparison:
    """Paired reports; ``b`` is the baseline."""

    a: object
    b: object

    @property
    def ipc_delta_pct(self):
        return 100.0 * (self.a.ipc - self.b.ipc) / self.b.ipc if self.b.ipc else 0.0

    @property
    def latency_delta(self):
        return self.a.mean_latency - self.b.mean_latency

    @property
    def savings(self):
        return self.a.savings_vs_baseline

    def rows(self):
        return [
            ("baseline", "b"),
            ("ipc.a", self.a.ipc), ("ipc.b", self.b.ipc), ("ipc_delta_pct", self.ipc_delta_pct),
            ("mean_latency.a", self.a.mean_latency), ("mean_latency.b", self.b.mean_latency),
            ("latency_delta", self.latency_delta),
            ("near_fraction.a", self.a.near_fraction), ("near_fraction.b", self.b.near_fraction),
            ("energy.a", self.a.energy["total"]), ("energy.b", self.b.energy["total"]),
            ("savings_vs_baseline", self.savings),
            ("weighted_speedup", self.a.weighted_speedup),
        ]

    def to_csv(self):
        return _csv(("key", "value"), [(k, "" if v is None else v) for k, v in self.rows()])


def compare(config_a, config_b):
    """Run both configs on the same traces; ``config_b`` is the baseline."""
    check_comparable(config_a, config_b)
    traces = build_traces(config_a)
    ra = simulate(config_a, traces)
    rb = simulate(config_b, traces)
    attach_baseline(ra.report, traces, config_b, rb)
    return Comparison(ra.report, rb.report)


def emit_tradeoff(cells, anchors=DEFAULT_ANCHORS):
    """Latency / die-size / power per bitline length, in input order."""
    rows = tradeoff_table(list(cells), anchors)
    return _csv(("cells", "trc_ns", "trcd_ns", "die_norm", "power_norm"), rows)


__all__ = ["RunConfig", "SweepPoint", "sweep_configs", "sweep_near_size", "sweep_csv",
           "Comparison", "compare", "emit_tradeoff"]
