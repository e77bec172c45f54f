# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled CART kernels. Must stay bit-identical to ``_kernels_py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.float64_t f8
ctypedef cnp.intp_t intp


def best_split(const f8[:, ::1] X, const intp[::1] y, const intp[::1] idx,
               const intp[::1] features, int n_classes, int min_leaf):
    """Best Gini split of the samples ``idx`` over ``features``.

    Returns ``(feature, threshold, score)`` with feature -1 when no split
    improves on the parent. ``score`` is sum(left_counts**2)/n_left +
    sum(right_counts**2)/n_right, evaluated as one exact division.
    """
    cdef Py_ssize_t n = idx.shape[0]
    cdef Py_ssize_t i, k, c, f
    cdef long long a_left, a_right, parent_sq, nl, nr
    cdef double score, parent_score, best_score, thr, best_thr
    cdef intp best_feature = -1
    cdef cnp.ndarray[cnp.int64_t, ndim=1] total = np.zeros(n_classes, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] left = np.zeros(n_classes, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] right = np.zeros(n_classes, dtype=np.int64)
    cdef cnp.ndarray[f8, ndim=1] values = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[intp, ndim=1] labels = np.empty(n, dtype=np.intp)
    cdef cnp.ndarray[intp, ndim=1] order

    if n < 2 * min_leaf or n < 2:
        return -1, 0.0, 0.0
    for i in range(n):
        total[y[idx[i]]] += 1
    parent_sq = 0
    for c in range(n_classes):
        parent_sq += total[c] * total[c]
    parent_score = <double>parent_sq / <double>n
    best_score = parent_score
    best_thr = 0.0

    for k in range(features.shape[0]):
        f = features[k]
        for i in range(n):
            values[i] = X[idx[i], f]
        order = np.argsort(values, kind="stable")
        for i in range(n):
            labels[i] = y[idx[order[i]]]
        for c in range(n_classes):
            left[c] = 0
            right[c] = total[c]
        a_left = 0
        a_right = parent_sq
        for i in range(n - 1):
            c = labels[i]
            a_left += 2 * left[c] + 1
            a_right -= 2 * right[c] - 1
            left[c] += 1
            right[c] -= 1
            nl = i + 1
            nr = n - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            if values[order[i]] >= values[order[i + 1]]:
                continue
            score = <double>(a_left * nr + a_right * nl) / <double>(nl * nr)
            if score > best_score:
                best_score = score
                best_feature = f
                thr = (values[order[i]] + values[order[i + 1]]) / 2.0
                if thr >= values[order[i + 1]]:
                    thr = values[order[i]]
                best_thr = thr
    if best_feature < 0:
        return -1, 0.0, parent_score
    return int(best_feature), float(best_thr), float(best_score)


def apply_tree(const cnp.int32_t[::1] feature, const f8[::1] threshold,
               const cnp.int32_t[::1] left, const cnp.int32_t[::1] right,
               const f8[:, ::1] X):
    """Leaf index reached by every row of ``X``."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t i
    cdef int node
    out = np.empty(n, dtype=np.intp)
    cdef intp[::1] leaves = out
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        leaves[i] = node
    return out
