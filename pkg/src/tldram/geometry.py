"""Analytical bitline models: latency, activation energy and die size.

A subarray's bitline is split into tiers by isolation transistors. Tier 0
sits next to the sense amplifiers. Accessing tier ``i`` turns on the ``i``
isolation transistors in front of it, so the amplifier sees every cell of
tiers ``0..i`` plus ``i`` series resistances.

Latency and energy are affine in the number of connected cells, plus a fixed
penalty per isolation transistor crossed. Die size is a constant plus a
sense-amplifier amortisation term ``beta / cells_per_bitline``, plus a flat
overhead per extra tier. All coefficients are solved from the calibration
anchors, so the anchor points are reproduced exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError


@dataclass(frozen=True)
class CalibrationAnchors:
    short_cells: int = 32
    long_cells: int = 512
    trc_short_ns: float = 23.1
    trc_long_ns: float = 52.5
    trc_far_ns: float = 65.8
    power_short: float = 0.51
    power_long: float = 1.00
    power_far: float = 1.49
    die_short: float = 3.76
    die_long: float = 1.00
    die_segmented: float = 1.03

    def __post_init__(self):
        values = [v for v in vars(self).values()]
        if any(v <= 0 for v in values):
            raise ConfigError("calibration anchors must be strictly positive")
        if not self.short_cells < self.long_cells:
            raise ConfigError("short_cells must be below long_cells")
        if not self.trc_short_ns < self.trc_long_ns < self.trc_far_ns:
            raise ConfigError("anchors need trc_short < trc_long < trc_far")
        if not self.power_short < self.power_long < self.power_far:
            raise ConfigError("anchors need power_short < power_long < power_far")

    def _line(self, y_short, y_long):
        slope = (y_long - y_short) / (self.long_cells - self.short_cells)
        return y_short - slope * self.short_cells, slope

    @property
    def trc_line(self):
        """(intercept, slope) of tRC in ns against connected cells."""
        return self._line(self.trc_short_ns, self.trc_long_ns)

    @property
    def iso_penalty_ns(self):
        return self.trc_far_ns - self.trc_long_ns

    @property
    def power_line(self):
        return self._line(self.power_short, self.power_long)

    @property
    def toggle_cost(self):
        return self.power_far - self.power_long

    @property
    def die_coefficients(self):
        """(alpha, beta) with die(n) = alpha + beta / n."""
        beta = (self.die_short - self.die_long) / (1 / self.short_cells - 1 / self.long_cells)
        return self.die_long - beta / self.long_cells, beta

    @property
    def die_per_tier(self):
        return self.die_segmented - self.die_long


DEFAULT_ANCHORS = CalibrationAnchors()


@dataclass(frozen=True)
class TierSpec:
    cells_in_segment: int
    isolation_transistors_to_amp: int
    connected_cells_when_accessed: int


@dataclass(frozen=True)
class DeviceGeometry:
    tier_cells: tuple[int, ...] = (32, 480)
    subarrays_per_bank: int = 8
    banks: int = 8
    columns_per_row: int = 128
    bytes_per_column: int = 64
    tiers: tuple[TierSpec, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cells = tuple(int(c) for c in self.tier_cells)
        if not cells:
            raise ConfigError("geometry needs at least one tier")
        if any(c < 1 for c in cells):
            raise ConfigError(f"every tier needs at least one cell, got {cells}")
        for name in ("subarrays_per_bank", "banks", "columns_per_row", "bytes_per_column"):
            if getattr(self, name) < 1:
                raise ConfigError(f"geometry.{name} must be >= 1")
        object.__setattr__(self, "tier_cells", cells)
        tiers, connected = [], 0
        for i, c in enumerate(cells):
            connected += c
            tiers.append(TierSpec(c, i, connected))
        object.__setattr__(self, "tiers", tuple(tiers))

    @classmethod
    def single(cls, cells, **kw):
        return cls(tier_cells=(cells,), **kw)

    @property
    def cells_per_bitline(self):
        return sum(self.tier_cells)

    @property
    def rows_per_subarray(self):
        return self.cells_per_bitline

    @property
    def near_rows(self):
        """Rows in tier 0. For a single-tier geometry there is no near segment."""
        return self.tier_cells[0] if len(self.tier_cells) > 1 else 0

    @property
    def is_tiered(self):
        return len(self.tier_cells) > 1

    def tier_of_row(self, row):
        if not 0 <= row < self.rows_per_subarray:
            raise ConfigError(f"row {row} outside subarray of {self.rows_per_subarray} rows")
        for i, t in enumerate(self.tiers):
            if row < t.connected_cells_when_accessed:
                return i
        raise AssertionError("unreachable")

    def row_tiers(self):
        """Tier index for every physical row, as a list."""
        out = []
        for i, c in enumerate(self.tier_cells):
            out.extend([i] * c)
        return out


def _tier(geometry, tier_index):
    if not 0 <= tier_index < len(geometry.tiers):
        raise ConfigError(
            f"tier index {tier_index} invalid for geometry with {len(geometry.tiers)} tiers"
        )
    return geometry.tiers[tier_index]


def trc_of_tier(geometry, tier_index, anchors=DEFAULT_ANCHORS):
    t = _tier(geometry, tier_index)
    a, b = anchors.trc_line
    return a + b * t.connected_cells_when_accessed + anchors.iso_penalty_ns * t.isolation_transistors_to_amp


def power_of_tier(geometry, tier_index, anchors=DEFAULT_ANCHORS):
    t = _tier(geometry, tier_index)
    a, b = anchors.power_line
    return a + b * t.connected_cells_when_accessed + anchors.toggle_cost * t.isolation_transistors_to_amp


def die_size(geometry, anchors=DEFAULT_ANCHORS):
    alpha, beta = anchors.die_coefficients
    return alpha + beta / geometry.cells_per_bitline + anchors.die_per_tier * (len(geometry.tiers) - 1)


@dataclass(frozen=True)
class DecompositionRatios:
    """Split of a tier's tRC into the other row timings, plus fixed column timings."""

    tras_frac: float = 0.7
    trp_frac: float = 0.3
    trcd_frac: float = 0.3
    tcl_ns: float = 13.1
    twr_ns: float = 15.0
    tccd_ns: float = 5.0
    mig_extra_ns: float = 4.0

    def __post_init__(self):
        if not math.isclose(self.tras_frac + self.trp_frac, 1.0, abs_tol=1e-9):
            raise ConfigError(
                f"tras_frac + trp_frac must equal 1, got {self.tras_frac} + {self.trp_frac}"
            )
        for name in ("tras_frac", "trp_frac", "trcd_frac"):
            if not 0 < getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in (0, 1)")
        for name in ("tcl_ns", "twr_ns", "tccd_ns"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.mig_extra_ns < 0:
            raise ConfigError("mig_extra_ns must be non-negative")


def ns_to_cycles(ns, cycle_ns):
    # ceiling, tolerant of float noise like 15.000000000000002
    return max(1, math.ceil(ns / cycle_ns - 1e-9))


@dataclass(frozen=True)
class TimingParams:
    trc: float
    tras: float
    trp: float
    trcd: float
    tcl: float
    twr: float
    tccd: float
    tmig: float

    def to_cycles(self, cycle_ns):
        return TimingParams(*(ns_to_cycles(v, cycle_ns) for v in vars(self).values()))


def timing_params_for(geometry, tier_index, anchors=DEFAULT_ANCHORS, decomposition=None):
    d = decomposition or DecompositionRatios()
    trc = trc_of_tier(geometry, tier_index, anchors)
    return TimingParams(
        trc=trc,
        tras=d.tras_frac * trc,
        trp=d.trp_frac * trc,
        trcd=d.trcd_frac * trc,
        tcl=d.tcl_ns,
        twr=d.twr_ns,
        tccd=d.tccd_ns,
        tmig=trc + d.mig_extra_ns,
    )


def tradeoff_table(cell_counts, anchors=DEFAULT_ANCHORS, decomposition=None):
    """Single-tier sweep over cells-per-bitline.

    Returns ``(cells, trc_ns, trcd_ns, die_norm, power_norm)`` rows in input order.
    """
    d = decomposition or DecompositionRatios()
    rows = []
    for n in cell_counts:
        if n < 1:
            raise ConfigError(f"cell count must be >= 1, got {n}")
        g = DeviceGeometry.single(n)
        trc = trc_of_tier(g, 0, anchors)
        rows.append((n, trc, d.trcd_frac * trc, die_size(g, anchors), power_of_tier(g, 0, anchors)))
    return rows
