# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled traversal kernels: batch margin prediction and the per-pair
interventional Shapley recursion.

Semantics are identical to ``_kernels_py``; see that module for the
derivation of the leaf weights. Inputs are the packed ensemble arrays
(child indices absolute into the concatenated node arrays).
"""

import numpy as np


cdef void _walk(
    const int[::1] feature, const double[::1] threshold,
    const int[::1] left, const int[::1] right, const double[::1] value,
    const double[::1] x, const double[::1] z,
    double[::1] fact, signed char[::1] owner, long[::1] path,
    double[::1] phi, int node, int nx, int nz, int plen,
) noexcept nogil:
    cdef int f = feature[node]
    cdef double v, wp, wm
    cdef int i
    cdef long g
    cdef bint x_left, z_left
    if f < 0:
        if nx + nz == 0:
            return
        v = value[node]
        wp = 0.0
        wm = 0.0
        if nx > 0:
            wp = v * fact[nx - 1] * fact[nz] / fact[nx + nz]
        if nz > 0:
            wm = v * fact[nx] * fact[nz - 1] / fact[nx + nz]
        for i in range(plen):
            g = path[i]
            if owner[g] == 1:
                phi[g] += wp
            else:
                phi[g] -= wm
        return
    x_left = x[f] < threshold[node]
    z_left = z[f] < threshold[node]
    cdef signed char own = owner[f]
    if own == 1:
        _walk(feature, threshold, left, right, value, x, z, fact, owner, path,
              phi, left[node] if x_left else right[node], nx, nz, plen)
    elif own == 2:
        _walk(feature, threshold, left, right, value, x, z, fact, owner, path,
              phi, left[node] if z_left else right[node], nx, nz, plen)
    elif x_left == z_left:
        _walk(feature, threshold, left, right, value, x, z, fact, owner, path,
              phi, left[node] if x_left else right[node], nx, nz, plen)
    else:
        path[plen] = f
        owner[f] = 1
        _walk(feature, threshold, left, right, value, x, z, fact, owner, path,
              phi, left[node] if x_left else right[node], nx + 1, nz, plen + 1)
        owner[f] = 2
        _walk(feature, threshold, left, right, value, x, z, fact, owner, path,
              phi, left[node] if z_left else right[node], nx, nz + 1, plen + 1)
        owner[f] = 0


def shap_pairwise(feature, threshold, left, right, value, roots, x, bg, max_depth):
    """Shapley contributions summed over (tree, background point) pairs."""
    cdef const int[::1] feat_v = feature
    cdef const double[::1] thr_v = threshold
    cdef const int[::1] left_v = left
    cdef const int[::1] right_v = right
    cdef const double[::1] val_v = value
    cdef const int[::1] roots_v = roots
    cdef const double[::1] x_v = x
    cdef const double[:, ::1] bg_v = bg
    cdef int m = x.shape[0]
    fact_arr = np.cumprod(
        np.concatenate(([1.0], np.arange(1, max_depth + 2, dtype=np.float64)))
    )
    phi_arr = np.zeros(m, dtype=np.float64)
    owner_arr = np.zeros(m, dtype=np.int8)
    path_arr = np.empty(max_depth + 1, dtype=np.int64)
    cdef double[::1] fact = fact_arr
    cdef double[::1] phi = phi_arr
    cdef signed char[::1] owner = owner_arr
    cdef long[::1] path = path_arr
    cdef Py_ssize_t j, t
    cdef Py_ssize_t nbg = bg.shape[0]
    cdef Py_ssize_t ntrees = roots.shape[0]
    with nogil:
        for j in range(nbg):
            for t in range(ntrees):
                _walk(feat_v, thr_v, left_v, right_v, val_v,
                      x_v, bg_v[j], fact, owner, path, phi, roots_v[t], 0, 0, 0)
    return phi_arr


def predict_matrix(feature, threshold, left, right, value, roots, base, X):
    """Margin of every row of X: base plus the summed leaf values."""
    cdef const int[::1] feat_v = feature
    cdef const double[::1] thr_v = threshold
    cdef const int[::1] left_v = left
    cdef const int[::1] right_v = right
    cdef const double[::1] val_v = value
    cdef const int[::1] roots_v = roots
    cdef const double[:, ::1] X_v = X
    cdef Py_ssize_t n = X.shape[0]
    out_arr = np.full(n, base, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, t
    cdef int node, f
    cdef double acc
    cdef Py_ssize_t ntrees = roots.shape[0]
    with nogil:
        for i in range(n):
            acc = 0.0
            for t in range(ntrees):
                node = roots_v[t]
                f = feat_v[node]
                while f >= 0:
                    if X_v[i, f] < thr_v[node]:
                        node = left_v[node]
                    else:
                        node = right_v[node]
                    f = feat_v[node]
                acc += val_v[node]
            out[i] += acc
    return out_arr
