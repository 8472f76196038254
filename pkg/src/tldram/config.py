"""Run configuration.

On disk a config is flat ``section.key = value`` text; ``#`` starts a comment.
Keys absent from the file keep their defaults, unknown keys are errors.
``RunConfig.to_text`` writes every key, and ``from_text(to_text(c)) == c``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .geometry import DecompositionRatios, DeviceGeometry
from .policies import PolicyKind

AUTO = "auto"


def _int_tuple(text):
    return tuple(int(x) for x in text.replace(" ", "").split(",") if x)


def _str_tuple(text):
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _opt_int(text):
    return None if text.strip().lower() == AUTO else int(text)


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def _fmt(value):
    if value is None:
        return AUTO
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, PolicyKind):
        return value.value
    return str(value)


def _field(default, parse, **kw):
    return field(default=default, metadata={"parse": parse, **kw})


def _check(cond, msg):
    if not cond:
        raise ConfigError(msg)


@dataclass(frozen=True)
class GeometryConfig:
    tier_cells: tuple = _field((32, 480), _int_tuple)
    banks: int = _field(8, int)
    subarrays_per_bank: int = _field(8, int)
    columns_per_row: int = _field(128, int)
    bytes_per_column: int = _field(64, int)
    address_order: tuple = _field(("column", "bank", "subarray", "row"), _str_tuple)

    def __post_init__(self):
        self.build()

    def build(self):
        return DeviceGeometry(self.tier_cells, self.subarrays_per_bank, self.banks,
                              self.columns_per_row, self.bytes_per_column)


@dataclass(frozen=True)
class TimingConfig:
    cycle_ns: float = _field(1.25, float)
    tras_frac: float = _field(0.7, float)
    trp_frac: float = _field(0.3, float)
    trcd_frac: float = _field(0.3, float)
    tcl_ns: float = _field(13.1, float)
    twr_ns: float = _field(15.0, float)
    tccd_ns: float = _field(5.0, float)
    mig_extra_ns: float = _field(4.0, float)

    def __post_init__(self):
        _check(self.cycle_ns > 0, "timing.cycle_ns must be positive")
        self.decomposition()

    def decomposition(self):
        return DecompositionRatios(self.tras_frac, self.trp_frac, self.trcd_frac,
                                   self.tcl_ns, self.twr_ns, self.tccd_ns, self.mig_extra_ns)


@dataclass(frozen=True)
class PolicyConfig:
    kind: PolicyKind = _field(PolicyKind.NONE, PolicyKind.parse)
    slots: int | None = _field(None, _opt_int)
    wait_threshold: int = _field(8, int)
    decay_epoch: int = _field(100_000, int)
    benefit_cap: int = _field(255, int)
    profile_file: str = _field("", str)
    profile_slots: int = _field(0, int)
    profile_mode: str = _field("os-static-profile", str)

    def __post_init__(self):
        _check(self.slots is None or self.slots >= 0, "policy.slots must be >= 0 or auto")
        _check(self.wait_threshold >= 0, "policy.wait_threshold must be >= 0")
        _check(self.decay_epoch >= 1, "policy.decay_epoch must be >= 1")
        _check(1 <= self.benefit_cap <= 1 << 30, "policy.benefit_cap out of range")
        _check(self.profile_slots >= 0, "policy.profile_slots must be >= 0")
        _check(self.profile_mode in ("os-static-profile", "controller-indirection"),
               f"unknown policy.profile_mode {self.profile_mode!r}")


@dataclass(frozen=True)
class ControllerConfig:
    aging_cap: int = _field(10_000, int)
    queue_capacity: int = _field(64, int)

    def __post_init__(self):
        _check(self.aging_cap >= 1, "controller.aging_cap must be >= 1")
        _check(self.queue_capacity >= 1, "controller.queue_capacity must be >= 1")


@dataclass(frozen=True)
class CoreConfig:
    count: int = _field(1, int)
    max_outstanding: int = _field(1, int)

    def __post_init__(self):
        _check(1 <= self.count <= 64, "cores.count must lie in [1, 64]")
        _check(1 <= self.max_outstanding <= 8, "cores.max_outstanding must lie in [1, 8]")


TRACE_SOURCES = ("hotcold", "zipf", "file")


@dataclass(frozen=True)
class TraceConfig:
    source: str = _field("hotcold", str)
    path: str = _field("", str)
    n: int = _field(100_000, int)
    rows: int | None = _field(None, _opt_int)
    hot_rows: int = _field(32, int)
    hot_fraction: float = _field(0.9, float)
    write_fraction: float = _field(0.3, float)
    bubble_mean: float = _field(20.0, float)
    zipf_exponent: float = _field(1.0, float)
    zipf_rows: int = _field(1024, int)

    def __post_init__(self):
        _check(self.source in TRACE_SOURCES, f"trace.source must be one of {TRACE_SOURCES}")
        _check(self.source != "file" or self.path, "trace.source = file needs trace.path")
        _check(self.n >= 0, "trace.n must be >= 0")
        _check(self.rows is None or self.rows >= 1, "trace.rows must be >= 1 or auto")
        _check(self.hot_rows >= 0, "trace.hot_rows must be >= 0")
        _check(0 <= self.hot_fraction <= 1, "trace.hot_fraction must lie in [0, 1]")
        _check(0 <= self.write_fraction <= 1, "trace.write_fraction must lie in [0, 1]")
        _check(self.bubble_mean >= 0, "trace.bubble_mean must be >= 0")
        _check(self.zipf_exponent >= 0, "trace.zipf_exponent must be >= 0")
        _check(self.zipf_rows >= 1, "trace.zipf_rows must be >= 1")


@dataclass(frozen=True)
class EnergyConfig:
    rdwr_cost: float = _field(0.1, float)

    def __post_init__(self):
        _check(self.rdwr_cost >= 0, "energy.rdwr_cost must be >= 0")


SECTIONS = ("geometry", "timing", "policy", "controller", "cores", "trace", "energy")


@dataclass(frozen=True)
class RunConfig:
    seed: int = _field(1, int)
    baseline: str = _field("", str)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    timing: TimingConfig = field(default_factory=TimingConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    cores: CoreConfig = field(default_factory=CoreConfig)
    trace: TraceConfig = field(default_factory=TraceConfig)
    energy: EnergyConfig = field(default_factory=EnergyConfig)

    def __post_init__(self):
        _check(0 <= self.seed < 1 << 64, "seed must be a 64-bit unsigned integer")
        g = self.geometry.build()
        if self.policy.kind is not PolicyKind.NONE and not g.is_tiered:
            raise ConfigError("near-segment caching needs a tiered geometry")
        slots = self.cache_slots
        _check(slots <= g.near_rows, f"policy.slots {slots} exceeds {g.near_rows} near rows")
        if self.policy.profile_file:
            _check(g.is_tiered, "profile mapping needs a tiered geometry")
            _check(self.policy.kind is PolicyKind.NONE,
                   "profile mapping and near-segment caching are mutually exclusive")
            _check(self.policy.profile_slots <= g.near_rows,
                   f"policy.profile_slots exceeds {g.near_rows} near rows")

    @property
    def cache_slots(self):
        if self.policy.kind is PolicyKind.NONE:
            return 0
        g = self.geometry.build()
        return g.near_rows if self.policy.slots is None else self.policy.slots

    @property
    def trace_rows(self):
        """Logical rows per subarray that generated traces may touch."""
        if self.trace.rows is not None:
            return self.trace.rows
        g = self.geometry.build()
        return g.rows_per_subarray - g.near_rows

    def replace(self, **changes):
        """Copy with dotted-key overrides, e.g. ``replace(**{"policy.slots": 16})``."""
        return from_items(self.items() | {k: _fmt(v) for k, v in changes.items()})

    def items(self):
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name in SECTIONS:
                for sf in dataclasses.fields(v):
                    out[f"{f.name}.{sf.name}"] = _fmt(getattr(v, sf.name))
            else:
                out[f.name] = _fmt(v)
        return out

    def to_text(self):
        return "".join(f"{k} = {v}\n" for k, v in self.items().items())

    def save(self, path):
        Path(path).write_text(self.to_text())


def _parsers():
    top = {f.name: f.metadata["parse"] for f in dataclasses.fields(RunConfig) if f.name not in SECTIONS}
    sections = {}
    for f in dataclasses.fields(RunConfig):
        if f.name in SECTIONS:
            cls = f.default_factory
            sections[f.name] = (cls, {sf.name: sf.metadata["parse"] for sf in dataclasses.fields(cls)})
    return top, sections


def from_items(items):
    top, sections = _parsers()
    top_vals = {}
    sec_vals = {name: {} for name in sections}
    for key, raw in items.items():
        try:
            if "." in key:
                sec, name = key.split(".", 1)
                if sec not in sections or name not in sections[sec][1]:
                    raise ConfigError(f"unknown config key {key!r}")
                sec_vals[sec][name] = sections[sec][1][name](raw)
            else:
                if key not in top:
                    raise ConfigError(f"unknown config key {key!r}")
                top_vals[key] = top[key](raw)
        except ConfigError:
            raise
        except (ValueError, TypeError) as e:
            raise ConfigError(f"bad value {raw!r} for {key}: {e}") from None
    built = {name: sections[name][0](**vals) for name, vals in sec_vals.items()}
    return RunConfig(**top_vals, **built)


def from_text(text, source="<config>"):
    items = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in items:
            raise ConfigError(f"{source}:{n}: duplicate key {key!r}")
        items[key] = value
    return from_items(items)


def load(path):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    cfg = from_text(text, str(path))
    return _resolve_paths(cfg, Path(path).parent)


def _resolve_paths(cfg, base):
    """Make relative trace/profile/baseline paths relative to the config file."""
    changes = {}
    if cfg.trace.path:
        changes["trace.path"] = ",".join(_rel(p, base) for p in cfg.trace.path.split(","))
    if cfg.policy.profile_file:
        changes["policy.profile_file"] = _rel(cfg.policy.profile_file, base)
    if cfg.baseline:
        changes["baseline"] = _rel(cfg.baseline, base)
    return cfg.replace(**changes) if changes else cfg


def _rel(p, base):
    p = Path(p.strip())
    return str(p if p.is_absolute() else base / p)
