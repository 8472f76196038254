import csv
import io

import pytest

from tldram.cli import main
from tldram.config import RunConfig
from tldram.errors import ConfigError
from tldram.experiments import compare, emit_tradeoff, sweep_configs, sweep_near_size, sweep_csv


def _rows(text):
    lines = text.splitlines()
    assert lines[0] == "# tldram-sim schema v1"
    return list(csv.reader(io.StringIO("\n".join(lines[1:]))))


def test_tradeoff_csv():
    rows = _rows(emit_tradeoff([512, 32]))
    assert rows[0] == ["cells", "trc_ns", "trcd_ns", "die_norm", "power_norm"]
    assert [r[0] for r in rows[1:]] == ["512", "32"]
    assert float(rows[2][1]) == pytest.approx(23.1) and float(rows[2][3]) == pytest.approx(3.76)
    assert len(_rows(emit_tradeoff([]))) == 1


def test_sweep_configs_rescale_geometry():
    cfgs = sweep_configs(RunConfig().replace(**{"policy.kind": "simple"}), [16, 64])
    assert [c.geometry.tier_cells for c in cfgs] == [(16, 496), (64, 448)]
    assert [c.cache_slots for c in cfgs] == [16, 64]
    assert {c.trace_rows for c in cfgs} == {448}
    with pytest.raises(ConfigError):
        sweep_configs(RunConfig(), [512])


def test_sweep_empty_and_order():
    cfg = RunConfig().replace(**{"policy.kind": "benefit_based", "trace.n": 1500})
    assert sweep_near_size(cfg, []) == []
    pts = sweep_near_size(cfg, [64, 8, 32])
    assert [p.size for p in pts] == [64, 8, 32]
    assert sweep_near_size(cfg, [64, 8, 32], jobs=2) == pts
    assert len(_rows(sweep_csv(pts))) == 4


def test_small_near_segment_misses_large_hot_set():
    cfg = RunConfig().replace(**{"policy.kind": "benefit_based", "trace.n": 4000, "trace.hot_rows": 64})
    (pt,) = sweep_near_size(cfg, [1])
    assert pt.near_fraction < 0.2


def test_compare_with_itself():
    cfg = RunConfig().replace(**{"trace.n": 1500, "policy.kind": "simple"})
    c = compare(cfg, cfg)
    assert c.ipc_delta_pct == 0 and c.latency_delta == 0 and c.savings == 0
    assert c.a.weighted_speedup == 1.0
    assert ("baseline", "b") in c.rows()


def test_compare_rejects_mismatch():
    with pytest.raises(ConfigError):
        compare(RunConfig(), RunConfig(seed=9))


def _write(p, text):
    p.write_text(text)
    return str(p)


def test_cli_subcommands(tmp_path, capsys):
    tl = _write(tmp_path / "tl.cfg", "policy.kind = benefit_based\ntrace.n = 1500\nbaseline = base.cfg\n")
    _write(tmp_path / "base.cfg", "geometry.tier_cells = 512\ntrace.rows = 480\ntrace.n = 1500\n")
    out = tmp_path / "run.csv"
    assert main(["run", "--config", tl, "--out", str(out)]) == 0
    keys = dict(r for r in _rows(out.read_text())[1:])
    assert keys["config.policy.kind"] == "benefit_based" and keys["savings_vs_baseline"] != ""

    assert main(["compare", "--a", tl, "--b", str(tmp_path / "base.cfg"), "--out", str(tmp_path / "c.csv")]) == 0
    assert main(["sweep", "--config", tl, "--near-sizes", "16,32", "--out", str(tmp_path / "s.csv")]) == 0
    assert [r[0] for r in _rows((tmp_path / "s.csv").read_text())] == ["size", "16", "32"]

    assert main(["tradeoff", "--cells", "32,512"]) == 0
    assert "3.76" in capsys.readouterr().out

    prof = tmp_path / "p.prof"
    assert main(["profile", "--config", tl, "--out", str(prof)]) == 0
    counts = [int(line.split()[1]) for line in prof.read_text().splitlines()]
    assert sum(counts) == 1500


def test_cli_trace_override(tmp_path):
    cfg = _write(tmp_path / "c.cfg", "cores.count = 1\n")
    tr = _write(tmp_path / "t.trace", "0 R 0x0\n3 W 0x40\n")
    out = tmp_path / "r.csv"
    assert main(["run", "--config", cfg, "--trace", tr, "--out", str(out)]) == 0
    assert "requests,2" in out.read_text()


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["tradeoff", "--cells", "a,b"]) == 1
    bad = _write(tmp_path / "bad.cfg", "trace.source = file\ntrace.path = t.trace\n")
    _write(tmp_path / "t.trace", "0 R 0x0\nzz\n")
    assert main(["run", "--config", bad]) == 1
    assert "line 2" in capsys.readouterr().err


def test_cli_internal_error_code(monkeypatch, tmp_path):
    from tldram import cli
    from tldram.errors import InternalError

    def boom(cfg):
        raise InternalError("invariant broken")

    monkeypatch.setattr(cli, "run", boom)
    cfg = _write(tmp_path / "c.cfg", "trace.n = 10\n")
    assert main(["run", "--config", cfg]) == 2
