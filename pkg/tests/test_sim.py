import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tldram import kernel
from tldram.config import RunConfig
from tldram.controller import AddressMap
from tldram.errors import ConfigError
from tldram.policies import write_profile
from oracles import check_integrity
from tldram.sim import (
    SCHEMA_HEADER, alone_ipcs, build_traces, derive_seed, row_profile, run, simulate, weighted_speedup,
)

needs_numba = pytest.mark.skipif(not kernel.available(), reason="numba not installed")


def test_derive_seed_stable():
    assert derive_seed(1, 1, 0) == derive_seed(1, 1, 0)
    assert derive_seed(1, 1, 0) != derive_seed(1, 1, 1) != derive_seed(2, 1, 1)


def test_single_tier_has_no_near_service():
    cfg = RunConfig().replace(**{"geometry.tier_cells": 512, "trace.n": 3000})
    r = simulate(cfg).report
    assert r.near_fraction == 0 and r.migrations == 0
    assert r.energy["activations.tier0"] > 0


def test_report_shape(small_config):
    r = simulate(small_config).report
    assert 0 <= r.near_fraction <= 1 and 0 <= r.row_hit_rate <= 1
    assert r.config == small_config and r.requests == 2000
    text = r.to_csv()
    assert text.startswith(SCHEMA_HEADER + "\nkey,value\n")
    assert "config.policy.kind,benefit_based" in text


def test_same_config_same_bytes(small_config):
    assert simulate(small_config).report.to_csv() == simulate(small_config).report.to_csv()


def test_seed_changes_result(small_config):
    other = small_config.replace(seed=2)
    assert simulate(small_config).report.to_csv() != simulate(other).report.to_csv()


def test_profile_mapping_serves_hot_rows_near(tmp_path):
    base = RunConfig().replace(**{"trace.n": 5000, "trace.hot_rows": 32, "trace.hot_fraction": 0.7})
    traces = build_traces(base)
    prof = row_profile(base, traces)
    path = tmp_path / "hot.prof"
    with open(path, "w") as fh:
        write_profile(prof, fh)
    cfg = base.replace(**{"policy.profile_file": str(path), "policy.profile_slots": 32})
    r = simulate(cfg, traces).report
    # the 32 hottest rows are exactly the hot set, so near service equals the hot share
    amap = AddressMap.for_geometry(cfg.geometry.build())
    bank, sa, row, _ = amap.decode_array(traces[0].address)
    hot = np.mean((bank == 0) & (sa == 0) & (row < 32))
    assert r.near_fraction == hot
    assert r.migrations == 0


def test_profile_mode_keeps_data(tmp_path):
    base = RunConfig().replace(**{"trace.n": 2000, "trace.hot_rows": 8, "trace.write_fraction": 0.5})
    path = tmp_path / "p.prof"
    with open(path, "w") as fh:
        write_profile(row_profile(base), fh)
    cfg = base.replace(**{"policy.profile_file": str(path), "policy.profile_slots": 8})
    assert check_integrity(simulate(cfg, record_service=True)) > 0


def test_weighted_speedup_against_itself():
    cfg = RunConfig().replace(**{"trace.n": 1500, "cores.count": 3, "policy.kind": "simple"})
    traces = build_traces(cfg)
    ipcs = simulate(cfg, traces).report.per_core_ipc
    alone = alone_ipcs(cfg, traces)
    assert [a / b for a, b in zip(alone, alone)] == [1.0, 1.0, 1.0]
    assert weighted_speedup(ipcs, ipcs) == 3.0


def test_run_with_baseline(tmp_path):
    base = tmp_path / "base.cfg"
    base.write_text("geometry.tier_cells = 512\ntrace.rows = 480\ntrace.n = 3000\n")
    cfg = RunConfig().replace(**{"baseline": str(base), "policy.kind": "benefit_based", "trace.n": 3000})
    rep = run(cfg)
    assert rep.weighted_speedup is not None and rep.savings_vs_baseline is not None
    base.write_text("geometry.tier_cells = 512\ntrace.rows = 480\ntrace.n = 3001\n")
    with pytest.raises(ConfigError):
        run(cfg)


def test_trace_count_must_match_cores(small_config):
    with pytest.raises(ConfigError):
        simulate(small_config.replace(**{"cores.count": 2}), build_traces(small_config))


@needs_numba
def test_compiled_refuses_detail(small_config):
    with pytest.raises(ConfigError):
        simulate(small_config, record_commands=True, compiled=True)


_CASES = [
    {"policy.kind": k, "trace.n": 4000} for k in ("none", "simple", "wait_minimized", "benefit_based")
] + [
    {"policy.kind": "benefit_based", "policy.slots": 4, "cores.count": 4, "cores.max_outstanding": 4,
     "trace.n": 1500, "trace.bubble_mean": 1, "controller.queue_capacity": 5,
     "controller.aging_cap": 40, "policy.decay_epoch": 300},
    {"geometry.tier_cells": (16, 64, 432), "policy.kind": "simple", "trace.n": 3000,
     "cores.count": 2, "cores.max_outstanding": 2, "trace.source": "zipf"},
    {"geometry.tier_cells": 512, "trace.rows": 480, "trace.n": 3000, "cores.count": 2},
]


@needs_numba
@pytest.mark.parametrize("changes", _CASES)
def test_compiled_matches_reference(changes):
    cfg = RunConfig().replace(**changes)
    a = simulate(cfg, compiled=False).report.to_csv()
    b = simulate(cfg, compiled=True).report.to_csv()
    assert a == b


@needs_numba
@settings(max_examples=25)
@given(
    kind=st.sampled_from(["none", "simple", "wait_minimized", "benefit_based"]),
    slots=st.integers(1, 32), cores=st.integers(1, 4), outstanding=st.integers(1, 8),
    qcap=st.integers(1, 16), aging=st.integers(1, 500), bubble=st.floats(0, 10),
    wfrac=st.floats(0, 1), hot=st.integers(0, 64), seed=st.integers(0, 2**32),
    epoch=st.integers(50, 5000), wait=st.integers(0, 20),
)
def test_compiled_matches_reference_property(kind, slots, cores, outstanding, qcap, aging, bubble, wfrac,
                                             hot, seed, epoch, wait):
    cfg = RunConfig().replace(**{
        "policy.kind": kind, "policy.slots": slots, "cores.count": cores,
        "cores.max_outstanding": outstanding, "controller.queue_capacity": qcap,
        "controller.aging_cap": aging, "trace.bubble_mean": bubble, "trace.write_fraction": wfrac,
        "trace.hot_rows": hot, "seed": seed, "policy.decay_epoch": epoch, "policy.wait_threshold": wait,
        "trace.n": 400,
    })
    traces = build_traces(cfg)
    assert simulate(cfg, traces, compiled=False).report.to_csv() == \
        simulate(cfg, traces, compiled=True).report.to_csv()


def test_invariant_checks_pass(small_config):
    r = simulate(small_config.replace(**{"cores.count": 2, "cores.max_outstanding": 4}),
                 check_invariants=True)
    s = r.controller.stats
    assert s.migrations == s.migrations_decided + s.writebacks
    assert s.requests == 4000
