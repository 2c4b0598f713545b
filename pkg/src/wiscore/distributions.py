"""Discrete distributions on the non-negative integers.

Negative binomial forecasts are parameterized by their mean ``mu`` and size
``psi`` (so that ``Var = mu + mu**2 / psi``); the success probability used
internally is ``p = psi / (psi + mu)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "NegBinParams",
    "DiscreteDistribution",
    "negbin_pmf",
    "negbin_logpmf",
    "negbin_cdf",
    "negbin_sf",
    "negbin_quantile",
    "tabulate",
    "point_mass",
]

DEFAULT_MASS_TOL = 1e-10

_RENORMALIZE_TOL = 1e-6
_SUM_TOL = 1e-9


@dataclass(frozen=True)
class NegBinParams:
    """Negative binomial distribution in mean/size form."""

    mu: float
    psi: float

    def __post_init__(self):
        for name in ("mu", "psi"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")

    @property
    def prob(self) -> float:
        return self.psi / (self.psi + self.mu)

    @property
    def mean(self) -> float:
        return self.mu

    @property
    def variance(self) -> float:
        return self.mu + self.mu**2 / self.psi

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)


def negbin_logpmf(params: NegBinParams, k):
    """Log probability mass, evaluated through log-gamma terms."""
    k = np.asarray(k, dtype=float)
    mu, psi = params.mu, params.psi
    # log p and log(1 - p) without cancellation
    log_p = math.log(psi) - math.log(psi + mu)
    log_q = math.log(mu) - math.log(psi + mu)
    kk = np.where(k >= 0, k, 0.0)
    out = (
        special.gammaln(kk + psi)
        - special.gammaln(psi)
        - special.gammaln(kk + 1.0)
        + psi * log_p
        + kk * log_q
    )
    out = np.where((k >= 0) & (k == np.floor(k)), out, -np.inf)
    return out[()] if out.ndim == 0 else out


def negbin_pmf(params: NegBinParams, k):
    """P(X = k). Zero for negative or non-integer ``k``."""
    return np.exp(negbin_logpmf(params, k))


def negbin_cdf(params: NegBinParams, k):
    """P(X <= k) via the regularized incomplete beta function."""
    k = np.floor(np.asarray(k, dtype=float))
    out = np.where(k >= 0, special.betainc(params.psi, np.maximum(k, 0) + 1.0, params.prob), 0.0)
    return out[()] if out.ndim == 0 else out


def negbin_sf(params: NegBinParams, k):
    """P(X > k), accurate far into the upper tail."""
    k = np.floor(np.asarray(k, dtype=float))
    out = np.where(k >= 0, special.betaincc(params.psi, np.maximum(k, 0) + 1.0, params.prob), 1.0)
    return out[()] if out.ndim == 0 else out


def negbin_quantile(params: NegBinParams, tau: float) -> int:
    """Smallest integer ``k`` with ``cdf(k) >= tau``.

    The search starts from a Cornish-Fisher guess and walks the CDF one
    integer at a time, so the result is the exact lower generalized inverse
    of the tabulated CDF rather than a rounded continuous solution.
    """
    if not 0 < tau < 1:
        raise ValueError(f"tau must lie in (0, 1), got {tau!r}")
    from scipy.stats import norm

    z = norm.ppf(tau)
    skew = (2.0 * params.mu / params.psi + 1.0) / params.sd
    guess = params.mu + params.sd * (z + (z * z - 1.0) * skew / 6.0)
    k = max(0, int(math.floor(guess)))
    if negbin_cdf(params, k) >= tau:
        while k > 0 and negbin_cdf(params, k - 1) >= tau:
            k -= 1
    else:
        k += 1
        while negbin_cdf(params, k) < tau:
            k += 1
    return k


@dataclass(frozen=True)
class DiscreteDistribution:
    """Probabilities on consecutive integers starting at ``support_offset``.

    Probabilities summing to 1 within 1e-6 are renormalized; anything
    further off is rejected. Use :meth:`truncated` for tail-truncated tables
    whose missing mass should be kept implicit.
    """

    support_offset: int
    probs: np.ndarray

    def __post_init__(self):
        probs = _as_probs(self.probs)
        total = math.fsum(probs)
        if abs(total - 1.0) > _RENORMALIZE_TOL:
            raise ValueError(f"probabilities sum to {total!r}, expected 1")
        if abs(total - 1.0) > _SUM_TOL:
            probs = probs / total
        probs.setflags(write=False)
        object.__setattr__(self, "support_offset", int(self.support_offset))
        object.__setattr__(self, "probs", probs)

    @classmethod
    def truncated(cls, support_offset: int, probs) -> "DiscreteDistribution":
        """Build without renormalization; total mass may fall short of 1."""
        probs = _as_probs(probs)
        if math.fsum(probs) > 1.0 + _SUM_TOL:
            raise ValueError("truncated table carries more than unit mass")
        probs.setflags(write=False)
        self = object.__new__(cls)
        object.__setattr__(self, "support_offset", int(support_offset))
        object.__setattr__(self, "probs", probs)
        return self

    def __eq__(self, other):
        if not isinstance(other, DiscreteDistribution):
            return NotImplemented
        return self.support_offset == other.support_offset and np.array_equal(self.probs, other.probs)

    __hash__ = None

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.support_offset, self.support_offset + len(self.probs))

    @property
    def upper(self) -> int:
        """Last tabulated support point."""
        return self.support_offset + len(self.probs) - 1

    @property
    def total_mass(self) -> float:
        return math.fsum(self.probs)

    def pmf(self, k: int) -> float:
        i = int(k) - self.support_offset
        if 0 <= i < len(self.probs):
            return float(self.probs[i])
        return 0.0

    def cdf_table(self) -> np.ndarray:
        return np.cumsum(self.probs)

    def cdf(self, k) -> float:
        i = int(math.floor(k)) - self.support_offset
        if i < 0:
            return 0.0
        return math.fsum(self.probs[: i + 1])

    def quantile(self, tau: float) -> int:
        """Lower generalized inverse of the tabulated CDF."""
        if not 0 < tau < 1:
            raise ValueError(f"tau must lie in (0, 1), got {tau!r}")
        cdf = self.cdf_table()
        i = int(np.searchsorted(cdf, tau, side="left"))
        return self.support_offset + min(i, len(cdf) - 1)

    def mean(self) -> float:
        return math.fsum(self.support * self.probs) / self.total_mass

    def variance(self) -> float:
        m = self.mean()
        return math.fsum((self.support - m) ** 2 * self.probs) / self.total_mass


def _as_probs(probs) -> np.ndarray:
    probs = np.array(probs, dtype=float).ravel()
    if probs.size == 0:
        raise ValueError("distribution needs at least one support point")
    if not np.all(np.isfinite(probs)) or np.any(probs < 0):
        raise ValueError("probabilities must be finite and non-negative")
    return probs


def point_mass(at: int) -> DiscreteDistribution:
    return DiscreteDistribution(int(at), np.array([1.0]))


def tabulate(params: NegBinParams, mass_tol: float = DEFAULT_MASS_TOL) -> DiscreteDistribution:
    """Tabulate the pmf on ``0..k_max`` where ``P(X > k_max) <= mass_tol``.

    The table is not renormalized; the omitted tail mass stays implicit.
    """
    if not 0 < mass_tol < 1:
        raise ValueError(f"mass_tol must lie in (0, 1), got {mass_tol!r}")
    k_max = negbin_quantile(params, min(1.0 - mass_tol, 1.0 - 1e-15))
    # the CDF saturates near 1; confirm coverage on the survival function
    while negbin_sf(params, k_max) > mass_tol:
        k_max += 1
    probs = negbin_pmf(params, np.arange(k_max + 1))
    return DiscreteDistribution.truncated(0, probs)
