# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twin of _pykernels: tree split search and SMO.

Every floating-point expression mirrors the fallback's operation order; the
extension is built with -ffp-contract=off so results stay bit-identical.
"""

import numpy as np

from libc.math cimport fabs
from libc.stdint cimport int64_t, uint64_t

NAME = "compiled"


cdef inline uint64_t _xorshift_next(uint64_t* state) nogil:
    cdef uint64_t s = state[0]
    s ^= s >> 12
    s ^= s << 25
    s ^= s >> 27
    state[0] = s
    return s * <uint64_t>0x2545F4914F6CDD1D


def best_split(X, y, feature_indices, Py_ssize_t n_classes, log2_table):
    cdef const double[:, ::1] xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const int64_t[::1] yv = np.ascontiguousarray(y, dtype=np.int64)
    cdef const int64_t[::1] feats = np.ascontiguousarray(feature_indices, dtype=np.int64)
    cdef const double[::1] table = np.ascontiguousarray(log2_table, dtype=np.float64)

    cdef Py_ssize_t n = xv.shape[0]
    cdef double n_f = <double>n

    total_arr = np.zeros(n_classes, dtype=np.int64)
    cnt_arr = np.zeros(n_classes, dtype=np.int64)
    col_arr = np.empty(n, dtype=np.float64)
    cdef int64_t[::1] total = total_arr
    cdef int64_t[::1] cnt = cnt_arr
    cdef double[::1] col = col_arr
    cdef const int64_t[::1] order

    cdef Py_ssize_t i, k, fi
    cdef int64_t feat, c, oi
    cdef double parent, s, h_left, h_right, child, gain, thr, v_lo, v_hi
    cdef Py_ssize_t nl, nr
    cdef int64_t best_feat = -1
    cdef double best_thr = 0.0
    cdef double best_gain = 0.0

    for i in range(n):
        total[yv[i]] += 1
    s = 0.0
    for k in range(n_classes):
        c = total[k]
        s = s + c * table[c]
    parent = table[n] - s / n_f

    for fi in range(feats.shape[0]):
        feat = feats[fi]
        for i in range(n):
            col[i] = xv[i, feat]
        order = np.argsort(col_arr).astype(np.int64, copy=False)
        for k in range(n_classes):
            cnt[k] = 0
        for i in range(n - 1):
            oi = order[i]
            cnt[yv[oi]] += 1
            v_lo = col[oi]
            v_hi = col[order[i + 1]]
            if v_lo < v_hi:
                nl = i + 1
                nr = n - nl
                s = 0.0
                for k in range(n_classes):
                    c = cnt[k]
                    s = s + c * table[c]
                h_left = table[nl] - s / <double>nl
                s = 0.0
                for k in range(n_classes):
                    c = total[k] - cnt[k]
                    s = s + c * table[c]
                h_right = table[nr] - s / <double>nr
                child = (<double>nl / n_f) * h_left + (<double>nr / n_f) * h_right
                gain = parent - child
                if gain > best_gain:
                    thr = (v_lo + v_hi) / 2.0
                    if thr >= v_hi:
                        thr = v_lo
                    best_feat = feat
                    best_thr = thr
                    best_gain = gain
    return int(best_feat), float(best_thr), float(best_gain)


cdef bint _take_step(const double[:, ::1] K, const double[::1] y, double[::1] alpha,
                     double[::1] E, double[::1] carr, double* b,
                     Py_ssize_t i1, Py_ssize_t i2) nogil:
    cdef double a1, a2, y1, y2, e1, e2, c1, c2, s, L, H, t
    cdef double k11, k22, k12, eta, a1new, a2new, da1, da2
    cdef double b1, b2, bnew, db, t1, t2
    cdef Py_ssize_t k
    cdef Py_ssize_t n = y.shape[0]
    if i1 == i2:
        return 0
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
        t = a2 - a1
        L = t if t > 0.0 else 0.0
        t = c1 + a2 - a1
        H = t if t < c2 else c2
    else:
        t = a1 + a2 - c1
        L = t if t > 0.0 else 0.0
        t = a1 + a2
        H = t if t < c2 else c2
    if L == H:
        return 0
    k11 = K[i1, i1]
    k22 = K[i2, i2]
    k12 = K[i1, i2]
    eta = k11 + k22 - 2.0 * k12
    if eta <= 0.0:
        return 0
    a2new = a2 + y2 * (e1 - e2) / eta
    if a2new < L:
        a2new = L
    elif a2new > H:
        a2new = H
    if fabs(a2new - a2) < 1e-10 * (a2new + a2 + 1e-10):
        return 0
    a1new = a1 + s * (a2 - a2new)
    da1 = a1new - a1
    da2 = a2new - a2
    b1 = b[0] - e1 - y1 * da1 * k11 - y2 * da2 * k12
    b2 = b[0] - e2 - y1 * da1 * k12 - y2 * da2 * k22
    if a1new > 0.0 and a1new < c1:
        bnew = b1
    elif a2new > 0.0 and a2new < c2:
        bnew = b2
    else:
        bnew = (b1 + b2) / 2.0
    db = bnew - b[0]
    t1 = y1 * da1
    t2 = y2 * da2
    for k in range(n):
        E[k] = E[k] + t1 * K[i1, k] + t2 * K[i2, k] + db
    alpha[i1] = a1new
    alpha[i2] = a2new
    b[0] = bnew
    return 1


cdef int _examine(const double[:, ::1] K, const double[::1] y, double[::1] alpha,
                  double[::1] E, double[::1] carr, double* b,
                  Py_ssize_t i2, double tol, uint64_t* state) nogil:
    cdef Py_ssize_t n = y.shape[0]
    cdef double y2 = y[i2]
    cdef double a2 = alpha[i2]
    cdef double e2 = E[i2]
    cdef double r2 = e2 * y2
    cdef Py_ssize_t i, k, i1, best, start
    cdef Py_ssize_t nb_count = 0
    cdef double gap, best_gap
    if not ((r2 < -tol and a2 < carr[i2]) or (r2 > tol and a2 > 0.0)):
        return 0
    best = -1
    best_gap = -1.0
    for i in range(n):
        if alpha[i] > 0.0 and alpha[i] < carr[i]:
            nb_count += 1
            gap = fabs(e2 - E[i])
            if gap > best_gap:
                best_gap = gap
                best = i
    if nb_count > 1 and best >= 0:
        if _take_step(K, y, alpha, E, carr, b, best, i2):
            return 1
    start = <Py_ssize_t>(_xorshift_next(state) % <uint64_t>n)
    for k in range(n):
        i1 = (start + k) % n
        if alpha[i1] > 0.0 and alpha[i1] < carr[i1]:
            if _take_step(K, y, alpha, E, carr, b, i1, i2):
                return 1
    start = <Py_ssize_t>(_xorshift_next(state) % <uint64_t>n)
    for k in range(n):
        i1 = (start + k) % n
        if _take_step(K, y, alpha, E, carr, b, i1, i2):
            return 1
    return 0


def smo_train(K, y, double c_pos, double c_neg, double tol,
              int64_t max_passes, seed):
    cdef const double[:, ::1] kv = np.ascontiguousarray(K, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0]

    alpha_arr = np.zeros(n, dtype=np.float64)
    e_arr = np.empty(n, dtype=np.float64)
    c_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] E = e_arr
    cdef double[::1] carr = c_arr

    cdef Py_ssize_t i
    for i in range(n):
        E[i] = -yv[i]
        carr[i] = c_pos if yv[i] > 0.0 else c_neg

    cdef uint64_t state = <uint64_t>(int(seed) & ((1 << 64) - 1))
    if state == 0:
        state = <uint64_t>0x9E3779B97F4A7C15

    cdef double b = 0.0
    cdef bint examine_all = 1
    cdef bint converged = 0
    cdef int64_t sweeps = 0
    cdef int num_changed

    with nogil:
        while sweeps < max_passes:
            num_changed = 0
            if examine_all:
                for i in range(n):
                    num_changed += _examine(kv, yv, alpha, E, carr, &b, i, tol, &state)
            else:
                for i in range(n):
                    if alpha[i] > 0.0 and alpha[i] < carr[i]:
                        num_changed += _examine(kv, yv, alpha, E, carr, &b, i, tol, &state)
            sweeps += 1
            if examine_all:
                if num_changed == 0:
                    converged = 1
                    break
                examine_all = 0
            elif num_changed == 0:
                examine_all = 1
    return alpha_arr, float(b), int(sweeps), bool(converged)
