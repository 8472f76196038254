import pytest
from hypothesis import given, strategies as st

from tldram.energy import EnergyLedger, EnergyModel, charge, savings_vs
from tldram.geometry import DeviceGeometry
from tldram.timing import ACT, MIG, PRE, RD, WR, Command

TL = DeviceGeometry((32, 480))


def test_near_and_far_activations():
    m = EnergyModel(TL, rdwr_cost=0.0)
    led = m.new_ledger()
    for _ in range(10):
        m.charge(led, Command(ACT, 0, 0, 3))
    for _ in range(2):
        m.charge(led, Command(ACT, 0, 0, 300))
    assert led.total == pytest.approx(8.08)
    assert led.activations == [10, 2]


def test_migration_charged_at_slower_tier():
    m = EnergyModel(TL)
    led = m.charge(m.new_ledger(), Command(MIG, 0, 0, 300, 3))
    assert led.migration_energy == pytest.approx(1.49) and led.migrations == 1


def test_column_and_precharge_costs():
    m = EnergyModel(TL, rdwr_cost=0.25)
    led = m.new_ledger()
    for k in (RD, WR, PRE):
        m.charge(led, Command(k, 0, 0, 3, 0))
    assert led.rdwr_energy == pytest.approx(0.5) and led.column_ops == 2
    with pytest.raises(ValueError):
        m.charge(led, Command("NOP", 0, 0, 0))


def test_functional_charge():
    led = charge(EnergyLedger(), Command(ACT, 0, 0, 0), DeviceGeometry.single(512))
    assert led.activation_energy == pytest.approx(1.0)


def test_savings():
    a = EnergyLedger(activation_energy=70.0)
    b = EnergyLedger(activation_energy=100.0)
    assert savings_vs(a, b) == pytest.approx(0.3)
    assert savings_vs(b, b) == 0.0
    assert savings_vs(a, EnergyLedger()) is None


@given(st.lists(st.tuples(st.sampled_from([ACT, RD, WR, PRE]), st.integers(0, 511)), max_size=200))
def test_totals_match_counts(cmds):
    m = EnergyModel(TL)
    led = m.new_ledger()
    for k, row in cmds:
        m.charge(led, Command(k, 0, 0, row, 0))
    act, rw = m.recompute(led)
    assert led.activation_energy == pytest.approx(act)
    assert led.rdwr_energy == pytest.approx(rw)


def test_merge():
    a = EnergyLedger(1.0, 2.0, 3.0, [1, 2], 1, 4)
    b = EnergyLedger(1.0, 0.0, 1.0, [3], 0, 1)
    m = a.merged(b)
    assert m.total == pytest.approx(8.0) and m.activations == [4, 2] and m.column_ops == 5
