"""Kernel backend selection.

The compiled extension is used when importable; otherwise the pure-NumPy
fallback takes over. Setting the environment variable ``CFSHAP_PURE_PYTHON``
to a non-empty value forces the fallback (useful for benchmarking the two
backends against each other).
"""

import os

from . import _kernels_py

if os.environ.get("CFSHAP_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def predict_matrix(feature, threshold, left, right, value, roots, base, X):
    return _impl.predict_matrix(feature, threshold, left, right, value, roots, base, X)


def shap_pairwise(feature, threshold, left, right, value, roots, x, bg, max_depth):
    return _impl.shap_pairwise(
        feature, threshold, left, right, value, roots, x, bg, max_depth
    )
