"""Pure-NumPy fallback for the traversal kernels.

Same entry points and semantics as the compiled extension in ``_kernels.pyx``;
selected automatically when the extension is unavailable (see ``kernels``).
``predict_matrix`` is vectorised across rows, level by level; the Shapley
kernel keeps the per-pair recursion in Python and is therefore much slower
than the compiled version on large ensembles.
"""

from __future__ import annotations

import numpy as np


def predict_matrix(feature, threshold, left, right, value, roots, base, X):
    """Margin of every row of X: base plus the summed leaf values."""
    n = X.shape[0]
    out = np.full(n, base, dtype=np.float64)
    if n == 0:
        return out
    for root in roots:
        idx = np.full(n, root, dtype=np.int64)
        while True:
            f = feature[idx]
            live = np.nonzero(f >= 0)[0]
            if live.size == 0:
                break
            node = idx[live]
            go_left = X[live, f[live]] < threshold[node]
            idx[live] = np.where(go_left, left[node], right[node])
        out += value[idx]
    return out


def shap_pairwise(feature, threshold, left, right, value, roots, x, bg, max_depth):
    """Interventional Shapley contributions, summed over (tree, background) pairs.

    For one tree and one background point z, the game value of a feature
    subset S is the leaf reached by the hybrid vector taking x on S and z
    elsewhere. Each reachable leaf is characterised by the features whose
    divergent splits the path resolved toward x (count a) or toward z
    (count b); the leaf value v then contributes

        +v * (a-1)! b! / (a+b)!   to every x-owned feature,
        -v * a! (b-1)! / (a+b)!   to every z-owned feature,

    which follows from applying the Shapley formula to the indicator game
    1[U subset of S, V disjoint from S]. Leaves reached identically by x and
    z carry no contribution. The caller divides by len(bg).
    """
    m = x.shape[0]
    phi = np.zeros(m, dtype=np.float64)
    if bg.shape[0] == 0 or roots.shape[0] == 0:
        return phi
    fact = np.cumprod(np.concatenate(([1.0], np.arange(1, max_depth + 2, dtype=np.float64))))
    owner = np.zeros(m, dtype=np.int8)  # 0 free, 1 x-owned, 2 z-owned
    path = np.empty(max_depth + 1, dtype=np.int64)

    def walk(node, z, nx, nz, plen):
        f = feature[node]
        if f < 0:
            if nx + nz == 0:
                return
            v = value[node]
            if nx > 0:
                wp = v * fact[nx - 1] * fact[nz] / fact[nx + nz]
            if nz > 0:
                wm = v * fact[nx] * fact[nz - 1] / fact[nx + nz]
            for g in path[:plen]:
                if owner[g] == 1:
                    phi[g] += wp
                else:
                    phi[g] -= wm
            return
        x_left = x[f] < threshold[node]
        z_left = z[f] < threshold[node]
        own = owner[f]
        if own == 1:
            walk(left[node] if x_left else right[node], z, nx, nz, plen)
        elif own == 2:
            walk(left[node] if z_left else right[node], z, nx, nz, plen)
        elif x_left == z_left:
            walk(left[node] if x_left else right[node], z, nx, nz, plen)
        else:
            path[plen] = f
            owner[f] = 1
            walk(left[node] if x_left else right[node], z, nx + 1, nz, plen + 1)
            owner[f] = 2
            walk(left[node] if z_left else right[node], z, nx, nz + 1, plen + 1)
            owner[f] = 0

    for j in range(bg.shape[0]):
        z = bg[j]
        for root in roots:
            walk(root, z, 0, 0, 0)
    return phi
