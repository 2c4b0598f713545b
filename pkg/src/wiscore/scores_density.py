"""Scores that need the full predictive distribution.

Log scores here are positively oriented (larger is better); the CRPS is
negatively oriented.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .distributions import DiscreteDistribution

__all__ = [
    "LogScoreConfig",
    "log_score",
    "multibin_log_score",
    "crps_discrete",
    "binned_crps_via_point_mass",
    "binned_to_discrete",
    "bin_index",
]


@dataclass(frozen=True)
class LogScoreConfig:
    truncation_floor: float = -10.0
    tolerance_radius_d: int = 0

    def __post_init__(self):
        if not self.truncation_floor < 0:
            raise ValueError("truncation_floor must be negative")
        if int(self.tolerance_radius_d) != self.tolerance_radius_d or self.tolerance_radius_d < 0:
            raise ValueError("tolerance_radius_d must be a non-negative integer")


DEFAULT_LOG_CONFIG = LogScoreConfig()


def _truncated_log(mass: float, floor: float) -> float:
    if mass <= 0.0:
        return floor
    return max(math.log(mass), floor)


def log_score(dist: DiscreteDistribution, y: int, cfg: LogScoreConfig = DEFAULT_LOG_CONFIG) -> float:
    """``max(log p_y, floor)``; the floor also covers ``y`` off the support."""
    return _truncated_log(dist.pmf(y), cfg.truncation_floor)


def multibin_log_score(dist: DiscreteDistribution, y: int, cfg: LogScoreConfig = DEFAULT_LOG_CONFIG) -> float:
    """Log of the mass within ``±d`` support points of ``y``, floored after summing."""
    d = int(cfg.tolerance_radius_d)
    lo = max(int(y) - d - dist.support_offset, 0)
    hi = min(int(y) + d - dist.support_offset, len(dist.probs) - 1)
    mass = math.fsum(dist.probs[lo: hi + 1]) if hi >= lo else 0.0
    return _truncated_log(mass, cfg.truncation_floor)


def crps_discrete(dist: DiscreteDistribution, y: int) -> float:
    """CRPS of an integer-valued forecast (the ranked probability score).

    Sums ``(F(x) - 1{x >= y})**2`` over unit steps from the lower end of the
    support (or ``y``, if smaller) up to the upper end (or ``y``, if larger).
    Past the last tabulated point the CDF is held at its tail value.
    """
    if int(y) != y:
        raise ValueError(f"crps_discrete needs an integer outcome, got {y!r}")
    return kernels.crps_step_sum(dist.probs, dist.support_offset, int(y))


def crps_discrete_many(dist: DiscreteDistribution, ys) -> np.ndarray:
    ys = np.asarray(ys)
    if np.any(ys != np.round(ys)):
        raise ValueError("crps_discrete needs integer outcomes")
    return kernels.crps_step_sum_many(dist.probs, dist.support_offset, ys.astype(np.int_))


def bin_index(edges_start: float, width: float, y: float) -> int:
    """Index of the half-open bin ``[start + i*w, start + (i+1)*w)`` holding ``y``."""
    # guard against 0.1-style edges that are not exact in binary
    return int(math.floor((y - edges_start) / width + 1e-9))


def binned_to_discrete(bins) -> tuple[DiscreteDistribution, float, float]:
    """Map a binned forecast onto bin indices.

    Returns the distribution over indices ``0..n-1`` together with the first
    edge and the common width, which convert outcomes to indices.
    """
    start = bins.bins[0][0]
    width = bins.width
    probs = np.array([b[2] for b in bins.bins])
    return DiscreteDistribution(0, probs), start, width


def binned_crps_via_point_mass(bins, y: float) -> float:
    """CRPS with each bin's mass placed at its center.

    ``y`` is snapped to the center of its containing bin (outcomes beyond the
    bins are snapped to the center the grid would have there), and the step
    sum is scaled by the bin width.
    """
    dist, start, width = binned_to_discrete(bins)
    return width * crps_discrete(dist, bin_index(start, width, y))
