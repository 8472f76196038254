"""Normalized access-energy ledger.

Activation energy per tier comes from the bitline power model; a migration
drives the whole connected bitline with the isolation transistor on, so it is
charged as an activation of its slower participant. Column commands cost a
flat amount, precharge is free.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .geometry import DEFAULT_ANCHORS, power_of_tier
from .timing import ACT, MIG, PRE, RD, WR


@dataclass
class EnergyLedger:
    activation_energy: float = 0.0
    migration_energy: float = 0.0
    rdwr_energy: float = 0.0
    activations: list = field(default_factory=list)
    migrations: int = 0
    column_ops: int = 0

    @property
    def total(self):
        return self.activation_energy + self.migration_energy + self.rdwr_energy

    def merged(self, other):
        n = max(len(self.activations), len(other.activations))
        acts = [0] * n
        for i, c in enumerate(self.activations):
            acts[i] += c
        for i, c in enumerate(other.activations):
            acts[i] += c
        return EnergyLedger(
            self.activation_energy + other.activation_energy,
            self.migration_energy + other.migration_energy,
            self.rdwr_energy + other.rdwr_energy,
            acts,
            self.migrations + other.migrations,
            self.column_ops + other.column_ops,
        )


class EnergyModel:
    """Per-event costs for one geometry, precomputed."""

    def __init__(self, geometry, anchors=DEFAULT_ANCHORS, rdwr_cost=0.1):
        self.geometry = geometry
        self.tier_power = [power_of_tier(geometry, i, anchors) for i in range(len(geometry.tiers))]
        self.rdwr_cost = rdwr_cost
        self.row_tier = geometry.row_tiers()

    def new_ledger(self):
        return EnergyLedger(activations=[0] * len(self.tier_power))

    def charge(self, ledger, cmd):
        kind = cmd.kind
        if kind == ACT:
            tier = self.row_tier[cmd.row]
            ledger.activations[tier] += 1
            ledger.activation_energy += self.tier_power[tier]
        elif kind == MIG:
            tier = max(self.row_tier[cmd.row], self.row_tier[cmd.arg])
            ledger.migrations += 1
            ledger.migration_energy += self.tier_power[tier]
        elif kind in (RD, WR):
            ledger.column_ops += 1
            ledger.rdwr_energy += self.rdwr_cost
        elif kind != PRE:
            raise ValueError(f"unknown command kind {kind!r}")
        return ledger

    def recompute(self, ledger):
        """Totals from the event counts alone, for cross-checking accumulated sums."""
        return (
            sum(c * p for c, p in zip(ledger.activations, self.tier_power)),
            ledger.column_ops * self.rdwr_cost,
        )


def charge(ledger, cmd, geometry, anchors=DEFAULT_ANCHORS, rdwr_cost=0.1):
    if not ledger.activations:
        ledger.activations = [0] * len(geometry.tiers)
    return EnergyModel(geometry, anchors, rdwr_cost).charge(ledger, cmd)


def savings_vs(ledger, baseline):
    """Fractional energy saved relative to ``baseline``; None when the baseline spent nothing."""
    base = baseline.total
    if base == 0:
        return None
    return (base - ledger.total) / base
