"""Independent brute-force reference implementations.

Everything here is written as plain loops over labels and pairs, kept
deliberately separate from the library's vectorized code paths so the
two can disagree.
"""

from __future__ import annotations

import numpy as np


# --- formula oracles (loops over matrix entries) ---------------------------

def rca_loops(E: np.ndarray) -> np.ndarray:
    n, m = E.shape
    out = np.zeros((n, m))
    total = E.sum()
    for f in range(n):
        row = E[f].sum()
        for p in range(m):
            col = E[:, p].sum()
            if row > 0 and col > 0:
                out[f, p] = (E[f, p] / row) * (total / col)
    return out


def product_space_loops(M: np.ndarray) -> np.ndarray:
    n, m = M.shape
    u = [int(M[:, p].sum()) for p in range(m)]
    B = np.zeros((m, m))
    for p in range(m):
        for q in range(m):
            denom = max(u[p], u[q])
            if denom == 0:
                continue
            co = sum(M[c, p] * M[c, q] for c in range(n))
            B[p, q] = co / denom
    return B


def taxonomy_loops(M: np.ndarray) -> np.ndarray:
    n, m = M.shape
    u = [int(M[:, p].sum()) for p in range(m)]
    d = [int(M[c].sum()) for c in range(n)]
    B = np.zeros((m, m))
    for p in range(m):
        for q in range(m):
            denom = max(u[p], u[q])
            if denom == 0:
                continue
            co = sum(M[c, p] * M[c, q] / d[c] for c in range(n) if d[c] > 0)
            B[p, q] = co / denom
    return B


def density_loops(M: np.ndarray, B: np.ndarray, include_diagonal: bool = False) -> np.ndarray:
    n, m = M.shape
    S = np.zeros((n, m))
    for c in range(n):
        for p in range(m):
            num = 0.0
            den = 0.0
            for q in range(m):
                if not include_diagonal and q == p:
                    continue
                num += M[c, q] * B[p, q]
                den += B[p, q]
            S[c, p] = num / den if den > 0 else 0.0
    return S


def ubiquity_loops(M: np.ndarray) -> np.ndarray:
    return np.array([sum(M[c, p] for c in range(M.shape[0]))
                     for p in range(M.shape[1])], dtype=float)


def diversification_loops(M: np.ndarray) -> np.ndarray:
    return np.array([sum(M[c, p] for p in range(M.shape[1]))
                     for c in range(M.shape[0])], dtype=float)


def nestedness_loops(M: np.ndarray) -> float:
    n = M.shape[0]
    baskets = [set(np.nonzero(M[c])[0]) for c in range(n)]
    total = 0.0
    count = 0
    for a in range(n):
        for b in range(n):
            if a == b or not baskets[a]:
                continue
            if len(baskets[a]) <= len(baskets[b]):
                total += len(baskets[a] & baskets[b]) / len(baskets[a])
                count += 1
    return total / count if count else 0.0


def modularity_loops(M: np.ndarray, ga, gp) -> float:
    n, m_prod = M.shape
    total = M.sum()
    q = 0.0
    for c in range(n):
        d_c = M[c].sum()
        for p in range(m_prod):
            if ga[c] == gp[p]:
                u_p = M[:, p].sum()
                q += M[c, p] - d_c * u_p / total
    return q / total


# --- metric oracles (loops over pairs and thresholds) ----------------------

def confusion_at(scores, labels, threshold):
    tp = fp = fn = tn = 0
    for s, y in zip(scores, labels):
        if s >= threshold:
            if y == 1:
                tp += 1
            else:
                fp += 1
        else:
            if y == 1:
                fn += 1
            else:
                tn += 1
    return tp, fp, fn, tn


def f1_at(scores, labels, threshold):
    tp, fp, fn, _ = confusion_at(scores, labels, threshold)
    return 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn > 0 else 0.0


def best_f1_loops(scores, labels):
    best_thr, best = None, -1.0
    for t in sorted(set(scores), reverse=True):
        f1 = f1_at(scores, labels, t)
        if f1 > best:
            best, best_thr = f1, t
    return best_thr, best


def precision_at_k_loops(scores, labels, k, actor_idx=None, product_idx=None):
    n = len(scores)
    if actor_idx is None:
        keys = [(-scores[i], i) for i in range(n)]
    else:
        keys = [(-scores[i], actor_idx[i], product_idx[i]) for i in range(n)]
    order = sorted(range(n), key=lambda i: keys[i])
    top = order[:min(k, n)]
    return sum(labels[i] for i in top) / len(top)


def mean_precision_at_k_loops(scores, labels, k, groups, product_idx=None):
    vals = []
    for g in sorted(set(groups)):
        members = [i for i in range(len(scores)) if groups[i] == g]
        if product_idx is None:
            members.sort(key=lambda i: (-scores[i], i))
        else:
            members.sort(key=lambda i: (-scores[i], product_idx[i]))
        top = members[:min(k, len(members))]
        if top:
            vals.append(sum(labels[i] for i in top) / len(top))
    return sum(vals) / len(vals)


def roc_auc_loops(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                wins += 1.0
            elif sp == sn:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def pr_auc_loops(scores, labels):
    n_pos = sum(labels)
    auc = 0.0
    prev_tp = 0
    for t in sorted(set(scores), reverse=True):
        tp, fp, _, _ = confusion_at(scores, labels, t)
        precision = tp / (tp + fp)
        auc += precision * (tp - prev_tp)
        prev_tp = tp
    return auc / n_pos


def mcc_loops(tp, fp, fn, tn):
    import math

    for m in ((tp + fp), (tp + fn), (tn + fp), (tn + fn)):
        if m == 0:
            return 0.0
    num = tp * tn - fp * fn
    return num / math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
