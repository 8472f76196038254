import pytest
from hypothesis import given, strategies as st

from tldram.config import RunConfig, from_text, load
from tldram.errors import ConfigError
from tldram.policies import PolicyKind


def test_defaults():
    c = RunConfig()
    assert c.geometry.tier_cells == (32, 480)
    assert c.cache_slots == 0 and c.trace_rows == 480
    assert c.replace(**{"policy.kind": "simple"}).cache_slots == 32


def test_round_trip_text():
    c = RunConfig().replace(**{"policy.kind": "benefit_based", "policy.slots": 16, "trace.n": 7,
                               "timing.cycle_ns": 0.625, "geometry.tier_cells": (16, 16, 480)})
    assert from_text(c.to_text()) == c


@given(st.sampled_from(list(PolicyKind)), st.integers(0, 32), st.integers(0, 2**64 - 1),
       st.floats(0.0, 1.0), st.integers(1, 8), st.sampled_from(["hotcold", "zipf"]))
def test_round_trip_property(kind, slots, seed, frac, outstanding, source):
    c = RunConfig().replace(**{"policy.kind": kind, "policy.slots": slots, "seed": seed,
                               "trace.hot_fraction": frac, "cores.max_outstanding": outstanding,
                               "trace.source": source})
    assert from_text(c.to_text()) == c


@pytest.mark.parametrize("text,msg", [
    ("geometry.colour = 3", "unknown"),
    ("nonsense", "expected"),
    ("trace.n = -1", "trace.n"),
    ("trace.n = many", "bad value"),
    ("policy.kind = lru", "unknown policy"),
    ("policy.kind = simple\npolicy.slots = 33", "exceeds"),
    ("policy.kind = simple\ngeometry.tier_cells = 512", "tiered"),
    ("timing.tras_frac = 0.5", "tras_frac"),
    ("cores.count = 0", "cores.count"),
    ("seed = 1\nseed = 2", "duplicate"),
    ("trace.source = file", "trace.path"),
    ("policy.profile_file = p.txt\npolicy.kind = simple", "mutually exclusive"),
])
def test_validation(text, msg):
    with pytest.raises(ConfigError, match=msg):
        from_text(text)


def test_load_resolves_relative_paths(tmp_path):
    (tmp_path / "sub").mkdir()
    p = tmp_path / "sub" / "run.cfg"
    p.write_text("trace.source = file\ntrace.path = a.trace\nbaseline = base.cfg  # comment\n")
    c = load(p)
    assert c.trace.path == str(tmp_path / "sub" / "a.trace")
    assert c.baseline == str(tmp_path / "sub" / "base.cfg")
    with pytest.raises(ConfigError):
        load(tmp_path / "missing.cfg")
