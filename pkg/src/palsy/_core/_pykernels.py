"""Numpy fallback for the hot kernels: tree split search and SMO.

Kept in exact arithmetic lockstep with the compiled extension
(``_ckernels``): identical operation order, identical comparisons, shared
log2 lookup table, identical xorshift RNG.  test_core_parity asserts
bit-equality of results between the two backends.
"""

from __future__ import annotations

import numpy as np

NAME = "fallback"

_MASK64 = (1 << 64) - 1


def _xorshift_next(state: int) -> tuple[int, int]:
    state ^= state >> 12
    state ^= (state << 25) & _MASK64
    state ^= state >> 27
    return state, (state * 0x2545F4914F6CDD1D) & _MASK64


def best_split(X, y, feature_indices, n_classes, log2_table):
    """Best entropy (information-gain) split over candidate features.

    X: (n, f) float64, y: (n,) int64 class codes, feature_indices: int64
    candidates scanned in order, log2_table: log2(k) for k = 0..n (entry 0
    unused).  Thresholds are midpoints between consecutive distinct sorted
    values.  Returns (feature, threshold, gain); feature is -1 when no
    split has positive gain.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    n_f = float(n)
    total = np.bincount(y, minlength=n_classes).astype(np.int64)
    parent = _entropy(total, n, log2_table)

    best_feat = -1
    best_thr = 0.0
    best_gain = 0.0
    ks = np.arange(n_classes)
    for feat in feature_indices:
        col = X[:, feat]
        order = np.argsort(col)
        sv = col[order]
        sy = y[order]
        boundary = np.nonzero(sv[:-1] < sv[1:])[0]
        if boundary.size == 0:
            continue
        onehot = (sy[:, None] == ks[None, :]).astype(np.int64)
        cum = np.cumsum(onehot, axis=0)
        left = cum[boundary]
        right = total[None, :] - left
        nl = (boundary + 1).astype(np.int64)
        nr = n - nl
        h_left = _entropy_rows(left, nl, log2_table)
        h_right = _entropy_rows(right, nr, log2_table)
        nl_f = nl.astype(np.float64)
        nr_f = nr.astype(np.float64)
        child = (nl_f / n_f) * h_left + (nr_f / n_f) * h_right
        gains = parent - child
        j = int(np.argmax(gains))
        gain = float(gains[j])
        if gain > best_gain:
            i = int(boundary[j])
            thr = (sv[i] + sv[i + 1]) / 2.0
            if thr >= sv[i + 1]:
                thr = sv[i]
            best_feat = int(feat)
            best_thr = float(thr)
            best_gain = gain
    return best_feat, best_thr, best_gain


def _entropy(counts, side_n, table):
    s = 0.0
    for k in range(counts.shape[0]):
        c = int(counts[k])
        s = s + c * table[c]
    return table[side_n] - s / float(side_n)


def _entropy_rows(counts, side_n, table):
    m = counts.shape[0]
    s = np.zeros(m)
    for k in range(counts.shape[1]):
        c = counts[:, k]
        s = s + c * table[c]
    return table[side_n] - s / side_n.astype(np.float64)


def smo_train(K, y, c_pos, c_neg, tol, max_passes, seed):
    """Platt-style SMO on a precomputed kernel matrix.

    K: (n, n) float64, y: (n,) float64 in {-1, +1}.  Per-sample box bound is
    c_pos for y > 0 and c_neg otherwise.  Working pair chosen by max |E_i -
    E_j| over non-bound points, with seeded random-start sweeps as fallback.
    Returns (alpha, b, sweeps, converged).
    """
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    alpha = np.zeros(n)
    E = -y.copy()
    carr = np.where(y > 0.0, float(c_pos), float(c_neg))
    state = int(seed) & _MASK64
    if state == 0:
        state = 0x9E3779B97F4A7C15
    b = 0.0

    def take_step(i1: int, i2: int) -> bool:
        nonlocal b
        if i1 == i2:
            return False
        a1 = alpha[i1]
        a2 = alpha[i2]
        y1 = y[i1]
        y2 = y[i2]
        e1 = E[i1]
        e2 = E[i2]
        c1 = carr[i1]
        c2 = carr[i2]
        s = y1 * y2
        if y1 != y2:
            L = max(0.0, a2 - a1)
            H = min(c2, c1 + a2 - a1)
        else:
            L = max(0.0, a1 + a2 - c1)
            H = min(c2, a1 + a2)
        if L == H:
            return False
        k11 = K[i1, i1]
        k22 = K[i2, i2]
        k12 = K[i1, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta <= 0.0:
            return False
        a2new = a2 + y2 * (e1 - e2) / eta
        if a2new < L:
            a2new = L
        elif a2new > H:
            a2new = H
        if abs(a2new - a2) < 1e-10 * (a2new + a2 + 1e-10):
            return False
        a1new = a1 + s * (a2 - a2new)
        da1 = a1new - a1
        da2 = a2new - a2
        b1 = b - e1 - y1 * da1 * k11 - y2 * da2 * k12
        b2 = b - e2 - y1 * da1 * k12 - y2 * da2 * k22
        if a1new > 0.0 and a1new < c1:
            bnew = b1
        elif a2new > 0.0 and a2new < c2:
            bnew = b2
        else:
            bnew = (b1 + b2) / 2.0
        db = bnew - b
        t1 = y1 * da1
        t2 = y2 * da2
        E[:] = E + t1 * K[i1] + t2 * K[i2] + db
        alpha[i1] = a1new
        alpha[i2] = a2new
        b = bnew
        return True

    def examine(i2: int) -> int:
        nonlocal state
        y2 = y[i2]
        a2 = alpha[i2]
        e2 = E[i2]
        r2 = e2 * y2
        if not ((r2 < -tol and a2 < carr[i2]) or (r2 > tol and a2 > 0.0)):
            return 0
        best = -1
        best_gap = -1.0
        nb_count = 0
        for i in range(n):
            if alpha[i] > 0.0 and alpha[i] < carr[i]:
                nb_count += 1
                gap = abs(e2 - E[i])
                if gap > best_gap:
                    best_gap = gap
                    best = i
        if nb_count > 1 and best >= 0:
            if take_step(best, i2):
                return 1
        state, r = _xorshift_next(state)
        start = r % n
        for k in range(n):
            i1 = (start + k) % n
            if alpha[i1] > 0.0 and alpha[i1] < carr[i1]:
                if take_step(i1, i2):
                    return 1
        state, r = _xorshift_next(state)
        start = r % n
        for k in range(n):
            i1 = (start + k) % n
            if take_step(i1, i2):
                return 1
        return 0

    examine_all = True
    sweeps = 0
    converged = False
    while sweeps < int(max_passes):
        num_changed = 0
        if examine_all:
            for i in range(n):
                num_changed += examine(i)
        else:
            for i in range(n):
                if alpha[i] > 0.0 and alpha[i] < carr[i]:
                    num_changed += examine(i)
        sweeps += 1
        if examine_all:
            if num_changed == 0:
                converged = True
                break
            examine_all = False
        elif num_changed == 0:
            examine_all = True
    return alpha, b, sweeps, converged
