"""NumPy implementation of the scoring kernels.

Used when the compiled ``wiscore._kernels`` extension is unavailable, or when
``WISCORE_PURE_PYTHON=1`` is set. Results agree with the compiled kernels up
to floating-point summation order.
"""

import numpy as np


def wis_components(lower, upper, median, y, alphas, weights, w0):
    y_col = y[:, None]
    scale = 2.0 / alphas
    disp = (weights * (upper - lower)).sum(axis=1)
    over = (weights * (scale * np.where(y_col < lower, lower - y_col, 0.0))).sum(axis=1)
    under = (weights * (scale * np.where(y_col > upper, y_col - upper, 0.0))).sum(axis=1)
    if median is not None:
        over = over + w0 * (2.0 * np.where(median > y, median - y, 0.0))
        under = under + w0 * (2.0 * np.where(median < y, y - median, 0.0))
    return disp, over, under


def crps_step_sum(probs, offset, y):
    n = len(probs)
    lo = min(offset, y)
    hi = max(offset + n - 1, y)
    x = np.arange(lo, hi + 1)
    padded = np.zeros(len(x))
    padded[offset - lo: offset - lo + n] = probs
    cdf = np.cumsum(padded)
    diff = np.where(x >= y, cdf - 1.0, cdf)
    return float(np.sum(diff * diff))


def crps_step_sum_many(probs, offset, ys):
    return np.array([crps_step_sum(probs, offset, int(y)) for y in ys], dtype=float)
