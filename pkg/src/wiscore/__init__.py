"""Scoring rules for probabilistic forecasts in quantile and binned form.

The weighted interval score (WIS) with its dispersion/penalty decomposition,
the interval and quantile scores it is built from, CRPS and log scores for
binned forecasts, and batch tooling around them.
"""

from .distributions import (
    DiscreteDistribution,
    NegBinParams,
    negbin_cdf,
    negbin_pmf,
    negbin_quantile,
    point_mass,
    tabulate,
)
from .forecast_data import (
    BinnedForecast,
    ForecastUnitKey,
    ForecastValidationError,
    Observation,
    QuantileForecast,
    pair_with_truth,
    parse_binned_file,
    parse_hub_quantile_file,
    parse_truth_file,
    quantiles_from_binned,
    write_binned_file,
    write_hub_quantile_file,
    write_truth_file,
)
from .kernels import BACKEND
from .scores_density import (
    LogScoreConfig,
    binned_crps_via_point_mass,
    crps_discrete,
    log_score,
    multibin_log_score,
)
from .scores_quantile import (
    HUB_LEVELS,
    HUB_QUANTILE_LEVELS,
    IntervalLevelSet,
    ScoreBreakdown,
    WisWeights,
    absolute_error,
    crps_approximation,
    interval_score,
    mape,
    quantile_score,
    weighted_interval_score,
    wis_via_quantile_scores,
)

__version__ = "0.1.0"
