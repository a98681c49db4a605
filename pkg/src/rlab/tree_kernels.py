"""Compiled kernels for decision-tree growth and forest prediction.

Training operates on a CSR view of the feature matrix: each node's split
search walks only the stored nonzeros of the sampled candidate features
and accounts for the zero entries as one implicit value group, which is
what makes sparse export baskets cheap to split on.  All randomness comes
from an explicit splitmix64 counter passed in by the caller, so results
are independent of thread scheduling.
"""

from __future__ import annotations

import numpy as np
from numba import njit

LEAF = -1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True, nogil=True, inline="always")
def _next_u64(state):
    state = state + _GOLDEN
    z = state
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    return state, z


@njit(cache=True, nogil=True, inline="always")
def _rand_below(state, n):
    state, z = _next_u64(state)
    return state, np.int64(z % np.uint64(n))


@njit(cache=True, nogil=True)
def grow_tree(indptr, indices, data, y, n_features,
              max_depth, min_leaf, mtry, bootstrap, seed):
    """Grow one CART tree; returns preorder node arrays.

    max_depth < 0 means unbounded.  Rows enter with bootstrap multiplicity
    (weights); min_leaf counts weighted samples.
    """
    n_rows = len(indptr) - 1
    state = seed

    w = np.zeros(n_rows, dtype=np.float64)
    if bootstrap:
        for _ in range(n_rows):
            state, r = _rand_below(state, n_rows)
            w[r] += 1.0
    else:
        w[:] = 1.0

    rows = np.empty(n_rows, dtype=np.int64)
    n_eff = 0
    for r in range(n_rows):
        if w[r] > 0:
            rows[n_eff] = r
            n_eff += 1

    cap = 2 * n_rows + 1
    feat_out = np.full(cap, LEAF, dtype=np.int32)
    thr_out = np.zeros(cap, dtype=np.float64)
    left_out = np.full(cap, LEAF, dtype=np.int32)
    right_out = np.full(cap, LEAF, dtype=np.int32)
    val_out = np.zeros(cap, dtype=np.float64)
    nsamp_out = np.zeros(cap, dtype=np.int64)

    # scratch reused across nodes
    perm = np.arange(n_features, dtype=np.int64)
    cand = np.empty(mtry, dtype=np.int64)
    cand_slot = np.full(n_features, -1, dtype=np.int64)
    bval = np.empty((mtry, n_eff if n_eff > 0 else 1), dtype=np.float64)
    brow = np.empty((mtry, n_eff if n_eff > 0 else 1), dtype=np.int64)
    bw = np.empty((mtry, n_eff if n_eff > 0 else 1), dtype=np.float64)
    bwy = np.empty((mtry, n_eff if n_eff > 0 else 1), dtype=np.float64)
    cnt = np.zeros(mtry, dtype=np.int64)
    swsum = np.zeros(mtry, dtype=np.float64)
    swysum = np.zeros(mtry, dtype=np.float64)
    gv = np.empty(n_eff + 2, dtype=np.float64)
    gw = np.empty(n_eff + 2, dtype=np.float64)
    gwy = np.empty(n_eff + 2, dtype=np.float64)
    side = np.zeros(n_rows, dtype=np.uint8)
    tmp_l = np.empty(n_eff if n_eff > 0 else 1, dtype=np.int64)
    tmp_r = np.empty(n_eff if n_eff > 0 else 1, dtype=np.int64)

    # stack frames: (start, end, depth, parent_code); parent_code = id*2+is_right
    stack_start = np.empty(cap + 1, dtype=np.int64)
    stack_end = np.empty(cap + 1, dtype=np.int64)
    stack_depth = np.empty(cap + 1, dtype=np.int64)
    stack_parent = np.empty(cap + 1, dtype=np.int64)
    top = 0
    stack_start[0] = 0
    stack_end[0] = n_eff
    stack_depth[0] = 0
    stack_parent[0] = -1
    top = 1
    n_nodes = 0

    while top > 0:
        top -= 1
        start = stack_start[top]
        end = stack_end[top]
        depth = stack_depth[top]
        parent_code = stack_parent[top]

        node_id = n_nodes
        n_nodes += 1
        if parent_code >= 0:
            pid = parent_code >> 1
            if parent_code & 1:
                right_out[pid] = node_id
            else:
                left_out[pid] = node_id

        wt = 0.0
        yt = 0.0
        for idx in range(start, end):
            r = rows[idx]
            wt += w[r]
            yt += w[r] * y[r]
        val_out[node_id] = yt / wt if wt > 0 else 0.0
        nsamp_out[node_id] = np.int64(wt)

        is_leaf = (yt == 0.0 or yt == wt
                   or (max_depth >= 0 and depth >= max_depth)
                   or wt < 2 * min_leaf)

        best_dec = -1.0
        best_slot = -1
        best_thr = 0.0
        if not is_leaf:
            # draw mtry distinct candidate features, then visit in index order
            for i in range(mtry):
                state, j = _rand_below(state, n_features - i)
                j += i
                perm[i], perm[j] = perm[j], perm[i]
                cand[i] = perm[i]
            cand.sort()
            for s in range(mtry):
                cand_slot[cand[s]] = s
                cnt[s] = 0
                swsum[s] = 0.0
                swysum[s] = 0.0

            for idx in range(start, end):
                r = rows[idx]
                for e in range(indptr[r], indptr[r + 1]):
                    s = cand_slot[indices[e]]
                    if s >= 0:
                        k = cnt[s]
                        bval[s, k] = data[e]
                        brow[s, k] = r
                        bw[s, k] = w[r]
                        bwy[s, k] = w[r] * y[r]
                        swsum[s] += w[r]
                        swysum[s] += w[r] * y[r]
                        cnt[s] = k + 1

            py = yt / wt
            g_parent = 2.0 * py * (1.0 - py)

            for s in range(mtry):
                k = cnt[s]
                zero_w = wt - swsum[s]
                zero_wy = yt - swysum[s]
                if k == 0:
                    continue  # single implicit group, nothing to split
                order = np.argsort(bval[s, :k])
                n_groups = 0
                inserted = zero_w <= 0.0
                i = 0
                while i < k:
                    v = bval[s, order[i]]
                    if not inserted and v > 0.0:
                        gv[n_groups] = 0.0
                        gw[n_groups] = zero_w
                        gwy[n_groups] = zero_wy
                        n_groups += 1
                        inserted = True
                    acc_w = 0.0
                    acc_wy = 0.0
                    j = i
                    while j < k and bval[s, order[j]] == v:
                        acc_w += bw[s, order[j]]
                        acc_wy += bwy[s, order[j]]
                        j += 1
                    gv[n_groups] = v
                    gw[n_groups] = acc_w
                    gwy[n_groups] = acc_wy
                    n_groups += 1
                    i = j
                if not inserted:
                    gv[n_groups] = 0.0
                    gw[n_groups] = zero_w
                    gwy[n_groups] = zero_wy
                    n_groups += 1

                w_left = 0.0
                y_left = 0.0
                for g in range(n_groups - 1):
                    w_left += gw[g]
                    y_left += gwy[g]
                    w_right = wt - w_left
                    y_right = yt - y_left
                    if w_left < min_leaf or w_right < min_leaf:
                        continue
                    pl = y_left / w_left
                    pr = y_right / w_right
                    dec = g_parent - (w_left / wt) * 2.0 * pl * (1.0 - pl) \
                        - (w_right / wt) * 2.0 * pr * (1.0 - pr)
                    if dec > best_dec:
                        best_dec = dec
                        best_slot = s
                        best_thr = gv[g] / 2.0 + gv[g + 1] / 2.0

            for s in range(mtry):
                cand_slot[cand[s]] = -1

            if best_slot < 0:
                is_leaf = True

        if is_leaf:
            continue

        feat_out[node_id] = np.int32(cand[best_slot])
        thr_out[node_id] = best_thr

        zero_left = np.uint8(1) if 0.0 <= best_thr else np.uint8(0)
        for idx in range(start, end):
            side[rows[idx]] = zero_left
        for j in range(cnt[best_slot]):
            r = brow[best_slot, j]
            side[r] = np.uint8(1) if bval[best_slot, j] <= best_thr else np.uint8(0)

        nl = 0
        nr = 0
        for idx in range(start, end):
            r = rows[idx]
            if side[r]:
                tmp_l[nl] = r
                nl += 1
            else:
                tmp_r[nr] = r
                nr += 1
        for i in range(nl):
            rows[start + i] = tmp_l[i]
        for i in range(nr):
            rows[start + nl + i] = tmp_r[i]

        mid = start + nl
        # push right first so the left child pops next (preorder ids)
        stack_start[top] = mid
        stack_end[top] = end
        stack_depth[top] = depth + 1
        stack_parent[top] = (node_id << 1) | 1
        top += 1
        stack_start[top] = start
        stack_end[top] = mid
        stack_depth[top] = depth + 1
        stack_parent[top] = node_id << 1
        top += 1

    return (feat_out[:n_nodes].copy(), thr_out[:n_nodes].copy(),
            left_out[:n_nodes].copy(), right_out[:n_nodes].copy(),
            val_out[:n_nodes].copy(), nsamp_out[:n_nodes].copy())


@njit(cache=True, nogil=True)
def predict_forest(X, feat, thr, left, right, value, offsets, out):
    """Mean leaf fraction over the concatenated trees, per input row."""
    n = X.shape[0]
    n_trees = len(offsets) - 1
    for i in range(n):
        acc = 0.0
        for t in range(n_trees):
            base = offsets[t]
            node = np.int64(0)
            while feat[base + node] >= 0:
                f = feat[base + node]
                if X[i, f] <= thr[base + node]:
                    node = np.int64(left[base + node])
                else:
                    node = np.int64(right[base + node])
            acc += value[base + node]
        out[i] = acc / n_trees
