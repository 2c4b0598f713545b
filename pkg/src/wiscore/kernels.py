"""Kernel dispatch: compiled Cython core when importable, NumPy otherwise.

``BACKEND`` names the implementation chosen at import time. Setting the
environment variable ``WISCORE_PURE_PYTHON=1`` forces the NumPy fallback.
"""

import os

import numpy as np

from . import _kernels_py

if os.environ.get("WISCORE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"
    else:
        BACKEND = "cython"

__all__ = ["BACKEND", "wis_components", "crps_step_sum", "crps_step_sum_many", "get_impl"]


def get_impl(name=None):
    """Return a kernel module by name (``"cython"`` or ``"python"``)."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def wis_components(lower, upper, median, y, alphas, weights, w0, impl=None):
    """Weighted interval-score components for ``n`` forecasts.

    ``lower``/``upper`` have shape ``(n, K)``; ``median`` is ``(n,)`` or None.
    Returns ``(dispersion, overprediction, underprediction)``, each ``(n,)``,
    as unnormalized weighted sums.
    """
    y = _f64(y).reshape(-1)
    n = y.shape[0]
    alphas = _f64(alphas).reshape(-1)
    weights = _f64(weights).reshape(-1)
    K = alphas.shape[0]
    lower = _f64(lower).reshape(n, K)
    upper = _f64(upper).reshape(n, K)
    if median is not None:
        median = _f64(median).reshape(n)
    return (impl or _impl).wis_components(lower, upper, median, y, alphas, weights, float(w0))


def crps_step_sum(probs, offset, y, impl=None):
    """Sum of squared CDF-minus-step values over unit steps."""
    return float((impl or _impl).crps_step_sum(_f64(probs), int(offset), int(y)))


def crps_step_sum_many(probs, offset, ys, impl=None):
    ys = np.ascontiguousarray(ys, dtype=np.int_)
    return (impl or _impl).crps_step_sum_many(_f64(probs), int(offset), ys)
