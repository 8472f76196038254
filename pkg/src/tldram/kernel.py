"""Compiled simulation loop.

A line-for-line port of the event loop in ``sim`` together with the
controller, engine timing state, near-cache policies and energy ledger, over
flat integer arrays. It produces the same statistics as the reference
objects but keeps no row data, command trace or service log, so runs that
need those use the reference path. The two are checked against each other
in the test suite.
"""
from __future__ import annotations

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

POLICY_CODES = {"none": 0, "simple": 1, "wait_minimized": 2, "benefit_based": 3}

_AGED, _JOB, _HIT, _MISS = 0, 1 << 48, 2 << 48, 3 << 48
_INF = 1 << 62
_MAXJ = 8

# stat slots
(S_REQ, S_RD, S_WR, S_LAT, S_NEAR, S_FAR, S_HIT, S_MIG, S_DEC, S_WB, S_COLOPS, S_ERR) = range(12)
N_STATS = 12
ERR_STALL = 1
ERR_JOBS = 2


def _heap_push(heap, size, key):
    i = size
    heap[i] = key
    while i > 0:
        p = (i - 1) >> 1
        if heap[p] <= heap[i]:
            break
        heap[p], heap[i] = heap[i], heap[p]
        i = p
    return size + 1


def _heap_pop(heap, size):
    top = heap[0]
    size -= 1
    heap[0] = heap[size]
    i = 0
    while True:
        l = 2 * i + 1
        if l >= size:
            break
        c = l
        if l + 1 < size and heap[l + 1] < heap[l]:
            c = l + 1
        if heap[i] <= heap[c]:
            break
        heap[i], heap[c] = heap[c], heap[i]
        i = c
    return top, size


def _run(
    # traces, concatenated over cores
    c_off, c_n, t_bub, t_wr, t_bank, t_sa, t_home,
    # timing per tier and fixed
    row_tier, trc, tras, trp, trcd, tmig, tcl, twr, tccd,
    # geometry and controller
    n_banks, sas, rows, tiered, max_out, aging, qcap,
    # policy
    policy, n_slots, wait_thr, ben_cap, decay_epoch,
    # energy
    tier_power, rdwr,
):
    n_cores = c_off.shape[0]
    total = 0
    for c in range(n_cores):
        total += c_n[c]
    caching = tiered and n_slots > 0 and policy != 0

    # cores
    cursor = np.zeros(n_cores, np.int64)
    ready = np.zeros(n_cores, np.int64)
    outst = np.zeros(n_cores, np.int64)
    stalled = np.zeros(n_cores, np.bool_)
    retired = np.zeros(n_cores, np.int64)
    finish = np.zeros(n_cores, np.int64)
    for c in range(n_cores):
        if c_n[c] > 0:
            ready[c] = t_bub[c_off[c]]

    # requests
    r_core = np.empty(total, np.int64)
    r_idx = np.empty(total, np.int64)
    r_arr = np.empty(total, np.int64)
    r_first = np.empty(total, np.int64)
    r_open = np.zeros(total, np.bool_)
    r_done = np.empty(total, np.int64)
    r_tier = np.empty(total, np.int64)
    queue = np.empty(qcap, np.int64)
    qn = 0

    # completion heap keyed by completion * total + id
    heap = np.empty(total + 1, np.int64)
    hn = 0
    mult = total + 1

    # banks
    b_sa = np.full(n_banks, -1, np.int64)
    b_row = np.full(n_banks, -1, np.int64)
    b_tier = np.zeros(n_banks, np.int64)
    b_act = np.zeros(n_banks, np.int64)
    b_col = np.zeros(n_banks, np.int64)
    b_pre = np.zeros(n_banks, np.int64)
    last_issue = -1

    # migration jobs: per bank FIFO of (sa, src, dst)
    jobs = np.zeros((n_banks, _MAXJ, 3), np.int64)
    j_head = np.zeros(n_banks, np.int64)
    j_cnt = np.zeros(n_banks, np.int64)
    n_jobs = 0

    # near caches, one per (bank, subarray)
    n_sub = n_banks * sas
    ns = n_slots if caching else 0
    s_far = np.full((n_sub, max(ns, 1)), -1, np.int64)
    s_dirty = np.zeros((n_sub, max(ns, 1)), np.bool_)
    s_last = np.full((n_sub, max(ns, 1)), -1, np.int64)
    s_ben = np.zeros((n_sub, max(ns, 1)), np.int64)
    rev = np.full((n_sub if caching else 1, rows), -1, np.int64)
    shadow = np.zeros((n_sub if caching else 1, rows), np.int64)
    next_decay = decay_epoch

    stats = np.zeros(N_STATS, np.int64)
    acts = np.zeros(tier_power.shape[0], np.int64)
    e_act = 0.0
    e_mig = 0.0
    e_rw = 0.0
    lat = np.empty(total, np.int64)
    n_lat = 0
    pc_cnt = np.zeros(n_cores, np.int64)
    pc_lat = np.zeros(n_cores, np.int64)

    next_id = 0
    now = 0
    while True:
        # completions due
        while hn > 0 and heap[0] // mult <= now:
            key, hn = _heap_pop(heap, hn)
            rid = key % mult
            done = r_done[rid]
            lt = done - r_arr[rid]
            stats[S_REQ] += 1
            stats[S_LAT] += lt
            ti = r_idx[rid]
            if t_wr[ti]:
                stats[S_WR] += 1
            else:
                stats[S_RD] += 1
            if tiered and r_tier[rid] == 0:
                stats[S_NEAR] += 1
            else:
                stats[S_FAR] += 1
            if not r_open[rid]:
                stats[S_HIT] += 1
            lat[n_lat] = lt
            n_lat += 1
            c = r_core[rid]
            pc_cnt[c] += 1
            pc_lat[c] += lt
            outst[c] -= 1
            if done + 1 > finish[c]:
                finish[c] = done + 1
            if stalled[c]:
                stalled[c] = False
                if cursor[c] < c_n[c]:
                    ready[c] = done + 1 + t_bub[c_off[c] + cursor[c]]
        t_ev = heap[0] // mult if hn > 0 else _INF

        # cores issue
        blocked = False
        for c in range(n_cores):
            if cursor[c] >= c_n[c] or stalled[c]:
                continue
            if ready[c] <= now:
                if qn < qcap:
                    i = cursor[c]
                    ti = c_off[c] + i
                    cursor[c] = i + 1
                    retired[c] += t_bub[ti] + 1
                    outst[c] += 1
                    if now + 1 > finish[c]:
                        finish[c] = now + 1
                    if outst[c] >= max_out:
                        stalled[c] = True
                    elif cursor[c] < c_n[c]:
                        ready[c] = now + 1 + t_bub[ti + 1]
                    rid = next_id
                    next_id += 1
                    r_core[rid] = c
                    r_idx[rid] = ti
                    r_arr[rid] = now
                    r_first[rid] = -1
                    queue[qn] = rid
                    qn += 1
                    if cursor[c] < c_n[c] and not stalled[c] and ready[c] < t_ev:
                        t_ev = ready[c]
                else:
                    blocked = True
            elif ready[c] < t_ev:
                t_ev = ready[c]

        # issue commands before the next external event
        busy = False
        while qn > 0 or n_jobs > 0:
            # --- pick ---
            t0 = last_issue + 1
            if now > t0:
                t0 = now
            best_t = -1
            best_key = 0
            found = False
            b_kind = 0  # 0 PRE, 1 ACT, 2 COL, 3 MIG
            b_req = -1
            b_bank = -1
            b_prow = -1
            if n_jobs > 0:
                for bank in range(n_banks):
                    if j_cnt[bank] > 0:
                        if b_row[bank] >= 0:
                            t = b_pre[bank]
                            k = 0
                        else:
                            t = b_act[bank]
                            k = 3
                        if t < t0:
                            t = t0
                        if not found or t < best_t:
                            found = True
                            best_t = t
                            best_key = _JOB
                            b_kind = k
                            b_req = -1
                            b_bank = bank
            for qi in range(qn):
                rid = queue[qi]
                ti = r_idx[rid]
                bank = t_bank[ti]
                if j_cnt[bank] > 0:
                    continue
                prow = t_home[ti]
                sa = t_sa[ti]
                if caching:
                    sl = rev[bank * sas + sa, prow]
                    if sl >= 0:
                        prow = sl
                orow = b_row[bank]
                if orow < 0:
                    t = b_act[bank]
                    k = 1
                    key = _MISS
                elif orow == prow and b_sa[bank] == sa:
                    t = b_col[bank]
                    k = 2
                    key = _HIT
                else:
                    t = b_pre[bank]
                    k = 0
                    key = _MISS
                if t < t0:
                    t = t0
                if found and t > best_t:
                    continue
                if t - r_arr[rid] > aging:
                    key = _AGED
                key += rid
                if not found or t < best_t or key < best_key:
                    found = True
                    best_t = t
                    best_key = key
                    b_kind = k
                    b_req = rid
                    b_bank = bank
                    b_prow = prow
            if not found or best_t >= t_ev:
                break

            # --- issue ---
            t = best_t
            bank = b_bank
            served = -1
            if b_req < 0:
                if b_kind == 0:
                    ot = b_tier[bank]
                    x = t + trp[ot]
                    if x > b_act[bank]:
                        b_act[bank] = x
                    b_sa[bank] = -1
                    b_row[bank] = -1
                else:
                    h = j_head[bank]
                    sa = jobs[bank, h, 0]
                    src = jobs[bank, h, 1]
                    dst = jobs[bank, h, 2]
                    j_head[bank] = (h + 1) % _MAXJ
                    j_cnt[bank] -= 1
                    n_jobs -= 1
                    ts = row_tier[src]
                    td = row_tier[dst]
                    mt = ts if ts > td else td
                    done = t + tmig[mt]
                    b_act[bank] = done
                    if done > b_col[bank]:
                        b_col[bank] = done
                    if done > b_pre[bank]:
                        b_pre[bank] = done
                    stats[S_MIG] += 1
                    e_mig += tier_power[mt]
            else:
                rid = b_req
                ti = r_idx[rid]
                if r_first[rid] < 0:
                    r_first[rid] = t
                prow = b_prow
                if b_kind == 0:
                    ot = b_tier[bank]
                    x = t + trp[ot]
                    if x > b_act[bank]:
                        b_act[bank] = x
                    b_sa[bank] = -1
                    b_row[bank] = -1
                    r_open[rid] = True
                elif b_kind == 1:
                    tier = row_tier[prow]
                    b_sa[bank] = t_sa[ti]
                    b_row[bank] = prow
                    b_tier[bank] = tier
                    x = t + trc[tier]
                    if x > b_act[bank]:
                        b_act[bank] = x
                    x = t + trcd[tier]
                    if x > b_col[bank]:
                        b_col[bank] = x
                    x = t + tras[tier]
                    if x > b_pre[bank]:
                        b_pre[bank] = x
                    acts[tier] += 1
                    e_act += tier_power[tier]
                    r_open[rid] = True
                else:
                    # serve the column access
                    tier = row_tier[prow]
                    sa = t_sa[ti]
                    home = t_home[ti]
                    is_wr = t_wr[ti]
                    migrate = False
                    mslot = -1
                    sub = bank * sas + sa
                    if caching:
                        while t >= next_decay:
                            for u in range(n_sub):
                                for s in range(ns):
                                    s_ben[u, s] >>= 1
                                for r in range(rows):
                                    shadow[u, r] >>= 1
                            next_decay += decay_epoch
                        sl = rev[sub, home]
                        if sl >= 0:
                            s_last[sub, sl] = t
                            if s_ben[sub, sl] < ben_cap:
                                s_ben[sub, sl] += 1
                            if is_wr:
                                s_dirty[sub, sl] = True
                        elif policy == 3:
                            bb = shadow[sub, home]
                            if bb < ben_cap:
                                bb += 1
                            shadow[sub, home] = bb
                            victim = -1
                            low = 0
                            empty = -1
                            for s in range(ns):
                                if s_far[sub, s] < 0:
                                    empty = s
                                    break
                                if victim < 0 or s_ben[sub, s] < low:
                                    victim = s
                                    low = s_ben[sub, s]
                            if empty >= 0:
                                migrate = True
                                mslot = empty
                            elif bb > low:
                                migrate = True
                                mslot = victim
                        elif policy == 1 or (policy == 2 and r_first[rid] - r_arr[rid] > wait_thr):
                            migrate = True
                            mslot = 0
                            oldest = 0
                            found_old = False
                            for s in range(ns):
                                if s_far[sub, s] < 0:
                                    mslot = s
                                    break
                                if not found_old or s_last[sub, s] < oldest:
                                    mslot = s
                                    oldest = s_last[sub, s]
                                    found_old = True
                    b_col[bank] = t + tccd
                    if is_wr:
                        done = t + tcl + twr
                        if done > b_pre[bank]:
                            b_pre[bank] = done
                    else:
                        done = t + tcl
                    stats[S_COLOPS] += 1
                    e_rw += rdwr
                    r_tier[rid] = tier
                    r_done[rid] = done
                    # remove from queue, keeping order
                    j = 0
                    for qi in range(qn):
                        if queue[qi] != rid:
                            queue[j] = queue[qi]
                            j += 1
                    qn = j
                    if migrate:
                        if s_far[sub, mslot] >= 0:
                            old = s_far[sub, mslot]
                            rev[sub, old] = -1
                            if s_ben[sub, mslot] != 0:
                                shadow[sub, old] = s_ben[sub, mslot]
                            if s_dirty[sub, mslot]:
                                if j_cnt[bank] >= _MAXJ:
                                    stats[S_ERR] = ERR_JOBS
                                    return stats, acts, e_act, e_mig, e_rw, lat[:n_lat], pc_cnt, pc_lat, retired, finish
                                p = (j_head[bank] + j_cnt[bank]) % _MAXJ
                                jobs[bank, p, 0] = sa
                                jobs[bank, p, 1] = mslot
                                jobs[bank, p, 2] = old
                                j_cnt[bank] += 1
                                n_jobs += 1
                                stats[S_WB] += 1
                            s_far[sub, mslot] = -1
                            s_dirty[sub, mslot] = False
                            s_last[sub, mslot] = -1
                            s_ben[sub, mslot] = 0
                        s_far[sub, mslot] = home
                        s_dirty[sub, mslot] = False
                        s_last[sub, mslot] = t
                        s_ben[sub, mslot] = shadow[sub, home]
                        shadow[sub, home] = 0
                        rev[sub, home] = mslot
                        if j_cnt[bank] >= _MAXJ:
                            stats[S_ERR] = ERR_JOBS
                            return stats, acts, e_act, e_mig, e_rw, lat[:n_lat], pc_cnt, pc_lat, retired, finish
                        p = (j_head[bank] + j_cnt[bank]) % _MAXJ
                        jobs[bank, p, 0] = sa
                        jobs[bank, p, 1] = home
                        jobs[bank, p, 2] = mslot
                        j_cnt[bank] += 1
                        n_jobs += 1
                        stats[S_DEC] += 1
                    served = rid
            last_issue = t
            now = t + 1
            if served >= 0:
                hn = _heap_push(heap, hn, r_done[served] * mult + served)
                if r_done[served] < t_ev:
                    t_ev = r_done[served]
                if blocked:
                    busy = True
                    break
        if busy:
            continue
        if t_ev == _INF:
            if qn > 0 or n_jobs > 0:
                stats[S_ERR] = ERR_STALL
            break
        now = t_ev
    return stats, acts, e_act, e_mig, e_rw, lat[:n_lat], pc_cnt, pc_lat, retired, finish


if numba is not None:
    _heap_push = numba.njit(cache=True)(_heap_push)
    _heap_pop = numba.njit(cache=True)(_heap_pop)
    _run = numba.njit(cache=True)(_run)


def available():
    return numba is not None
