"""Independent oracles shared by several test modules."""
from tldram.timing import initial_token


def check_integrity(result):
    """Replay served accesses against a flat memory and compare every read."""
    ctrl = result.controller
    g = ctrl.geometry
    seed = ctrl.data_seed
    shadow = {}
    reads = 0
    for rid, is_write, bank, sa, lrow, col, value in ctrl.service_log:
        key = ((bank * g.subarrays_per_bank + sa) * g.rows_per_subarray + lrow, col)
        if is_write:
            shadow[key] = value
        else:
            reads += 1
            expect = shadow.get(key, initial_token(seed, key[0], col))
            assert value == expect, f"request {rid} read {value:#x}, memory holds {expect:#x}"
    # final contents: the newest copy of each written row is where the controller says it is
    store = ctrl.engine.store
    for (gid, col), value in shadow.items():
        bank, rest = divmod(gid, g.subarrays_per_bank * g.rows_per_subarray)
        sa, lrow = divmod(rest, g.rows_per_subarray)
        home = ctrl.placement.home(gid)
        row = home
        st_ = ctrl.caches.get(bank * g.subarrays_per_bank + sa)
        if st_ is not None and home in st_.reverse:
            row = st_.reverse[home]
        assert store.read(bank, sa, row, col) == value
    return reads
