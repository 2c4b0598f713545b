"""Quantile, interval and weighted interval scores.

All scores in this module are negatively oriented and carry the units of the
observations. Interval-based scores come with an additive decomposition into
dispersion (interval widths), overprediction (forecast above the outcome) and
underprediction (forecast below the outcome).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import kernels
from .forecast_data import QuantileForecast, level_key

__all__ = [
    "ScoreBreakdown",
    "IntervalLevelSet",
    "WisWeights",
    "MissingQuantileError",
    "HUB_LEVELS",
    "HUB_QUANTILE_LEVELS",
    "DIVIDE_BY_K_PLUS_1",
    "NO_NORMALIZER",
    "quantile_score",
    "interval_score",
    "weighted_interval_score",
    "wis_batch",
    "interval_arrays",
    "wis_via_quantile_scores",
    "crps_levels",
    "crps_approximation",
    "absolute_error",
    "mape",
]

DIVIDE_BY_K_PLUS_1 = "divide_by_K_plus_1"
NO_NORMALIZER = "none"
_NORMALIZERS = (DIVIDE_BY_K_PLUS_1, NO_NORMALIZER)

class MissingQuantileError(ValueError):
    def __init__(self, level: float):
        super().__init__(f"forecast lacks the {level:g} quantile")
        self.level = level


@dataclass(frozen=True)
class ScoreBreakdown:
    total: float
    dispersion: float = 0.0
    overprediction: float = 0.0
    underprediction: float = 0.0

    @classmethod
    def from_components(cls, dispersion: float, overprediction: float, underprediction: float) -> "ScoreBreakdown":
        d, o, u = float(dispersion), float(overprediction), float(underprediction)
        return cls(d + o + u, d, o, u)

    @classmethod
    def plain(cls, total: float) -> "ScoreBreakdown":
        """A score without decomposition; everything sits in ``total``."""
        return cls(float(total))

    @property
    def penalty(self) -> float:
        return self.overprediction + self.underprediction

    def scaled(self, factor: float) -> "ScoreBreakdown":
        return ScoreBreakdown(
            self.total * factor,
            self.dispersion * factor,
            self.overprediction * factor,
            self.underprediction * factor,
        )


@dataclass(frozen=True)
class IntervalLevelSet:
    """Central interval levels ``alphas`` (coverage ``1 - alpha``) plus the median."""

    alphas: tuple[float, ...]
    include_median: bool = True

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        if any(not (0 < a <= 1) for a in alphas):
            raise ValueError(f"interval alphas must lie in (0, 1], got {alphas}")
        if any(b <= a for a, b in zip(alphas, alphas[1:])):
            raise ValueError(f"interval alphas must be strictly increasing, got {alphas}")
        object.__setattr__(self, "alphas", alphas)

    @property
    def K(self) -> int:
        return len(self.alphas)

    @property
    def n_components(self) -> int:
        return self.K + int(self.include_median)

    def lower_levels(self) -> list[float]:
        return [level_key(a / 2) for a in self.alphas]

    def upper_levels(self) -> list[float]:
        return [level_key(1 - a / 2) for a in self.alphas]

    def quantile_levels(self) -> list[float]:
        """Every quantile level needed, ascending."""
        levels = set(self.lower_levels()) | set(self.upper_levels())
        if self.include_median:
            levels.add(0.5)
        return sorted(levels)

    def nominal_coverages(self) -> list[float]:
        return [level_key(1 - a) for a in self.alphas]


HUB_LEVELS = IntervalLevelSet((0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9))
HUB_QUANTILE_LEVELS = tuple(HUB_LEVELS.quantile_levels())


@dataclass(frozen=True)
class WisWeights:
    """Weights for the median term (``w0``) and each interval (``w``).

    ``w=None`` means ``w_k = alpha_k / 2``. Weights need not be normalized.
    With :data:`DIVIDE_BY_K_PLUS_1` the weighted sum is divided by the number
    of scored components (``K + 1`` when the median is included).
    """

    w0: float = 0.5
    w: tuple[float, ...] | None = None
    normalizer: str = DIVIDE_BY_K_PLUS_1

    def __post_init__(self):
        if self.normalizer not in _NORMALIZERS:
            raise ValueError(f"normalizer must be one of {_NORMALIZERS}, got {self.normalizer!r}")
        if not (math.isfinite(self.w0) and self.w0 >= 0):
            raise ValueError("w0 must be non-negative")
        if self.w is not None:
            w = tuple(float(v) for v in self.w)
            if any(not (math.isfinite(v) and v >= 0) for v in w):
                raise ValueError("interval weights must be non-negative")
            object.__setattr__(self, "w", w)

    def resolve(self, levels: IntervalLevelSet) -> tuple[float, np.ndarray, float]:
        """Return ``(w0, w, divisor)`` for ``levels``."""
        if self.w is None:
            w = np.asarray(levels.alphas, dtype=float) / 2
        else:
            if len(self.w) != levels.K:
                raise ValueError(f"got {len(self.w)} interval weights for {levels.K} intervals")
            w = np.asarray(self.w, dtype=float)
        w0 = self.w0 if levels.include_median else 0.0
        if w0 <= 0 and not np.any(w > 0):
            raise ValueError("at least one weight must be positive")
        divisor = float(levels.n_components) if self.normalizer == DIVIDE_BY_K_PLUS_1 else 1.0
        return w0, w, divisor


DEFAULT_WEIGHTS = WisWeights()


def quantile_score(tau, q, y):
    """Piecewise linear quantile score ``2 * (1{y <= q} - tau) * (q - y)``.

    Twice the pinball loss; equals ``|q - y|`` at ``tau = 0.5``.
    """
    tau_arr = np.asarray(tau, dtype=float)
    if np.any((tau_arr <= 0) | (tau_arr >= 1)):
        raise ValueError(f"tau must lie in (0, 1), got {tau!r}")
    q = np.asarray(q, dtype=float)
    y = np.asarray(y, dtype=float)
    out = 2.0 * ((y <= q).astype(float) - tau_arr) * (q - y)
    return float(out) if out.ndim == 0 else out


def interval_score(alpha: float, lower: float, upper: float, y: float) -> ScoreBreakdown:
    """Interval score of the central ``(1 - alpha)`` interval ``[lower, upper]``.

    Outcomes on an endpoint are not penalized.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    if lower > upper:
        raise ValueError(f"lower endpoint {lower!r} exceeds upper endpoint {upper!r}")
    over = (2.0 / alpha) * (lower - y) if y < lower else 0.0
    under = (2.0 / alpha) * (y - upper) if y > upper else 0.0
    return ScoreBreakdown.from_components(upper - lower, over, under)


def _lookup(quantiles) -> Mapping[float, float]:
    if isinstance(quantiles, QuantileForecast):
        return quantiles.as_dict()
    table = {level_key(k): float(v) for k, v in dict(quantiles).items()}
    ordered = [table[k] for k in sorted(table)]
    if any(b < a for a, b in zip(ordered, ordered[1:])):
        raise ValueError("quantile values must be non-decreasing in the level")
    return table


def _get(table: Mapping[float, float], level: float) -> float:
    try:
        return table[level_key(level)]
    except KeyError:
        raise MissingQuantileError(level) from None


def interval_arrays(quantiles, levels: IntervalLevelSet):
    """Lower endpoints, upper endpoints and median (or None) for ``levels``."""
    table = _lookup(quantiles)
    lower = np.array([_get(table, lv) for lv in levels.lower_levels()], dtype=float)
    upper = np.array([_get(table, lv) for lv in levels.upper_levels()], dtype=float)
    median = _get(table, 0.5) if levels.include_median else None
    return lower, upper, median


def wis_batch(lower, upper, median, y, levels: IntervalLevelSet, weights: WisWeights = DEFAULT_WEIGHTS):
    """Vectorized WIS for ``n`` forecasts sharing one level set.

    ``lower``/``upper`` are ``(n, K)`` endpoint matrices and ``median`` an
    ``(n,)`` vector (ignored unless the level set includes the median).
    Returns ``(total, dispersion, overprediction, underprediction)`` arrays.
    """
    w0, w, divisor = weights.resolve(levels)
    y = np.asarray(y, dtype=float).reshape(-1)
    lower = np.asarray(lower, dtype=float).reshape(len(y), levels.K)
    upper = np.asarray(upper, dtype=float).reshape(len(y), levels.K)
    if np.any(lower > upper):
        raise ValueError("lower interval endpoint exceeds upper endpoint")
    med = np.asarray(median, dtype=float).reshape(-1) if levels.include_median else None
    disp, over, under = kernels.wis_components(lower, upper, med, y, levels.alphas, w, w0)
    disp, over, under = disp / divisor, over / divisor, under / divisor
    return disp + over + under, disp, over, under


def weighted_interval_score(
    quantiles,
    y: float,
    levels: IntervalLevelSet = HUB_LEVELS,
    weights: WisWeights = DEFAULT_WEIGHTS,
) -> ScoreBreakdown:
    """Weighted interval score with its decomposition.

    ``quantiles`` is a :class:`QuantileForecast` or a ``{level: value}``
    mapping. The median term ``w0 * 2 * |y - m|`` is booked as over- or
    underprediction, never as dispersion. With no intervals and default
    weights the score is the absolute error of the median.
    """
    lower, upper, median = interval_arrays(quantiles, levels)
    total, d, o, u = wis_batch(lower[None, :], upper[None, :], [median], [y], levels, weights)
    return ScoreBreakdown(float(total[0]), float(d[0]), float(o[0]), float(u[0]))


def wis_via_quantile_scores(quantiles, y: float, levels: IntervalLevelSet = HUB_LEVELS) -> float:
    """WIS (default weights, divided by ``K + 1``) as an average of quantile scores.

    Uses ``alpha * IS_alpha = QS_{alpha/2} + QS_{1-alpha/2}``, which gives
    ``WIS = (QS_0.5 + sum of QS over all 2K+1 levels) / (2 (K + 1))``.
    Evaluated independently of the interval form as a cross-check.
    """
    if not levels.include_median:
        raise ValueError("the quantile-score form requires the median")
    table = _lookup(quantiles)
    alphas = np.asarray(levels.alphas, dtype=float)
    taus = np.concatenate([alphas / 2, [0.5], 1 - alphas / 2])
    q = np.array([_get(table, t) for t in taus])
    qs = np.asarray(quantile_score(taus, q, np.full(len(taus), float(y))))
    median_qs = quantile_score(0.5, _get(table, 0.5), y)
    return (median_qs + math.fsum(qs)) / (2.0 * (levels.K + 1))


def crps_levels(K: int) -> IntervalLevelSet:
    """``K + 1`` equally spaced alphas ``(i + 1/2) / (K + 1)``, ``i = 0..K``.

    Midpoints of a uniform partition of the unit interval; no separate median
    term (the narrowest interval already sits next to it).
    """
    if int(K) != K or K < 1:
        raise ValueError("K must be a positive integer")
    n = int(K) + 1
    return IntervalLevelSet(tuple((i + 0.5) / n for i in range(n)), include_median=False)


def crps_approximation(dist_quantiles, y: float, K: int) -> float:
    """Approximate the CRPS by the WIS over :func:`crps_levels` with ``w = alpha/2``.

    ``dist_quantiles`` is a quantile forecast/mapping covering every level of
    ``crps_levels(K)``, or a callable ``tau -> quantile``.
    """
    levels = crps_levels(K)
    if callable(dist_quantiles):
        dist_quantiles = {tau: dist_quantiles(tau) for tau in levels.quantile_levels()}
    return weighted_interval_score(dist_quantiles, y, levels, DEFAULT_WEIGHTS).total


def absolute_error(point: float, y: float) -> float:
    return abs(float(point) - float(y))


def mape(point: float, y: float) -> float:
    """Absolute percentage error ``|point - y| / |y|``.

    Scale-free, so it scores 200 against 400 the same as 2 against 4, and it
    does not reward reporting the median. Kept for comparison studies only.
    """
    if y == 0:
        raise ValueError("percentage error is undefined for y = 0")
    return abs(float(point) - float(y)) / abs(float(y))

