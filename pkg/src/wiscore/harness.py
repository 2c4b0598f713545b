"""Batch scoring, aggregation, coverage and figure-ready tables.

Score names understood by :func:`parse_score` (the registry):

``logs``, ``mblogs``
    (multibin) log score; need a binned forecast; positively oriented.
``crps``
    CRPS with bin mass placed on bin centers; needs a binned forecast.
``is@<alpha>``
    interval score of the central ``1 - alpha`` interval.
``wis``
    weighted interval score on the configured level set (hub levels by default).
``wis@<a1>/<a2>/...``
    weighted interval score on an explicit level set, median included.
``ae``, ``mape``
    absolute / absolute percentage error of the point forecast (median if
    no point forecast was given).
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .distributions import NegBinParams, negbin_quantile, tabulate
from .forecast_data import (
    BinnedForecast,
    ForecastPair,
    ForecastUnitKey,
    QuantileForecast,
    quantiles_from_binned,
)
from .scores_density import (
    LogScoreConfig,
    bin_index,
    binned_crps_via_point_mass,
    binned_to_discrete,
    crps_discrete_many,
    log_score,
    multibin_log_score,
)
from .scores_quantile import (
    DEFAULT_WEIGHTS,
    HUB_LEVELS,
    NO_NORMALIZER,
    IntervalLevelSet,
    MissingQuantileError,
    ScoreBreakdown,
    WisWeights,
    absolute_error,
    interval_arrays,
    mape,
    wis_batch,
)

__all__ = [
    "NEGATIVE",
    "POSITIVE",
    "REGISTRY",
    "UnknownScoreError",
    "ScoreSpec",
    "ScoreConfig",
    "ScoreRecord",
    "AggregateReport",
    "parse_score",
    "score_all",
    "aggregate",
    "empirical_coverage",
    "score_curve",
    "scatter_data",
    "score_correlations",
]

NEGATIVE = "negatively_oriented"
POSITIVE = "positively_oriented"

REGISTRY = ("logs", "mblogs", "crps", "is@<alpha>", "wis", "wis@<a1>/<a2>/...", "ae", "mape")

GROUP_FIELDS = {
    "model": "model_id",
    "location": "location",
    "target": "target",
    "horizon": "target",
    "target_end_date": "target_end_date",
    "forecast_date": "forecast_date",
}


class UnknownScoreError(ValueError):
    def __init__(self, name: str):
        super().__init__(f"unknown score {name!r}; known scores: {', '.join(REGISTRY)}")
        self.name = name


@dataclass(frozen=True)
class ScoreSpec:
    name: str
    kind: str
    levels: IntervalLevelSet | None = None
    weights: WisWeights | None = None

    @property
    def orientation(self) -> str:
        return POSITIVE if self.kind in ("logs", "mblogs") else NEGATIVE

    @property
    def decomposed(self) -> bool:
        return self.kind in ("wis", "is", "ae")

    @property
    def needs_bins(self) -> bool:
        return self.kind in ("logs", "mblogs", "crps")


def _alpha(text: str, name: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise UnknownScoreError(name) from None


def parse_score(
    name: str,
    levels: IntervalLevelSet = HUB_LEVELS,
    weights: WisWeights = DEFAULT_WEIGHTS,
) -> ScoreSpec:
    """Resolve a registry name; ``levels``/``weights`` configure plain ``wis``."""
    name = name.strip()
    if name in ("logs", "mblogs", "crps", "ae", "mape"):
        return ScoreSpec(name, name)
    if name == "wis":
        return ScoreSpec(name, "wis", levels, weights)
    head, sep, tail = name.partition("@")
    if sep and head == "is":
        alpha = _alpha(tail, name)
        if not 0 < alpha < 1:
            raise ValueError(f"{name}: alpha must lie in (0, 1)")
        return ScoreSpec(name, "is", IntervalLevelSet((alpha,), include_median=False), WisWeights(0.0, (1.0,), NO_NORMALIZER))
    if sep and head == "wis":
        alphas = tuple(_alpha(a, name) for a in tail.split("/"))
        return ScoreSpec(name, "wis", IntervalLevelSet(alphas), WisWeights(weights.w0, None, weights.normalizer))
    raise UnknownScoreError(name)


@dataclass(frozen=True)
class ScoreConfig:
    scores: tuple[str, ...]
    levels: IntervalLevelSet = HUB_LEVELS
    weights: WisWeights = DEFAULT_WEIGHTS
    log: LogScoreConfig = LogScoreConfig(tolerance_radius_d=5)

    def specs(self) -> list[ScoreSpec]:
        if not self.scores:
            raise ValueError("empty score set")
        return [parse_score(s, self.levels, self.weights) for s in self.scores]


@dataclass(frozen=True)
class ScoreRecord:
    """One score for one forecast unit; ``breakdown`` is None for error records."""

    unit_key: ForecastUnitKey
    score_name: str
    breakdown: ScoreBreakdown | None
    orientation: str
    decomposed: bool = False
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def value(self) -> float:
        return math.nan if self.breakdown is None else self.breakdown.total


def _quantile_view(fc, levels: Sequence[float]):
    if isinstance(fc, BinnedForecast):
        return quantiles_from_binned(fc, levels)
    return fc


def _point(fc) -> float:
    if isinstance(fc, BinnedForecast):
        return quantiles_from_binned(fc, [0.5]).median
    return fc.point_or_median()


def _scalar_score(spec: ScoreSpec, fc, y: float, log_cfg: LogScoreConfig) -> ScoreBreakdown:
    if spec.needs_bins:
        if not isinstance(fc, BinnedForecast):
            raise ValueError(f"{spec.name} needs a binned forecast")
        if spec.kind == "crps":
            return ScoreBreakdown.plain(binned_crps_via_point_mass(fc, y))
        dist, start, width = binned_to_discrete(fc)
        idx = bin_index(start, width, y)
        if spec.kind == "logs":
            return ScoreBreakdown.plain(log_score(dist, idx, log_cfg))
        return ScoreBreakdown.plain(multibin_log_score(dist, idx, log_cfg))
    point = _point(fc)
    if spec.kind == "ae":
        err = absolute_error(point, y)
        return ScoreBreakdown.from_components(0.0, err if point > y else 0.0, err if point < y else 0.0)
    if spec.kind == "mape":
        return ScoreBreakdown.plain(mape(point, y))
    raise AssertionError(spec.kind)


def score_all(pairs: Sequence[ForecastPair], config: ScoreConfig) -> list[ScoreRecord]:
    """Score every pair under every configured score.

    Records come out pair by pair, scores in configured order. A pair that
    cannot be scored (missing levels, wrong forecast type, ...) yields an
    error record for that score instead of aborting the batch. Interval
    scores are evaluated in one vectorized kernel call per score.
    """
    specs = config.specs()
    pairs = list(pairs)
    results: dict[tuple[int, int], ScoreRecord] = {}

    for j, spec in enumerate(specs):
        if spec.kind in ("wis", "is"):
            needed = spec.levels.quantile_levels()
            rows, lowers, uppers, medians, ys = [], [], [], [], []
            for i, (fc, y) in enumerate(pairs):
                try:
                    lo, hi, m = interval_arrays(_quantile_view(fc, needed), spec.levels)
                except (MissingQuantileError, ValueError) as exc:
                    results[i, j] = ScoreRecord(fc.unit_key, spec.name, None, spec.orientation, True, str(exc))
                    continue
                rows.append(i)
                lowers.append(lo)
                uppers.append(hi)
                medians.append(0.0 if m is None else m)
                ys.append(y)
            if rows:
                K = spec.levels.K
                total, d, o, u = wis_batch(
                    np.reshape(lowers, (len(rows), K)),
                    np.reshape(uppers, (len(rows), K)),
                    medians,
                    ys,
                    spec.levels,
                    spec.weights,
                )
                for r, i in enumerate(rows):
                    bd = ScoreBreakdown(float(total[r]), float(d[r]), float(o[r]), float(u[r]))
                    results[i, j] = ScoreRecord(pairs[i].forecast.unit_key, spec.name, bd, spec.orientation, True)
        else:
            for i, (fc, y) in enumerate(pairs):
                try:
                    bd = _scalar_score(spec, fc, y, config.log)
                    results[i, j] = ScoreRecord(fc.unit_key, spec.name, bd, spec.orientation, spec.decomposed)
                except (ValueError, TypeError) as exc:
                    results[i, j] = ScoreRecord(fc.unit_key, spec.name, None, spec.orientation, spec.decomposed, str(exc))

    return [results[i, j] for i in range(len(pairs)) for j in range(len(specs))]


@dataclass(frozen=True)
class AggregateReport:
    group: tuple[tuple[str, str], ...]
    count: int
    means: Mapping[str, ScoreBreakdown]
    counts: Mapping[str, int]
    orientation: Mapping[str, str]
    coverage: Mapping[float, float] = field(default_factory=dict)
    n_errors: int = 0

    def group_value(self, name: str) -> str | None:
        return dict(self.group).get(name)


def _group_of(key: ForecastUnitKey, group_by: Sequence[str]) -> tuple[tuple[str, str], ...]:
    out = []
    for g in group_by:
        try:
            attr = GROUP_FIELDS[g]
        except KeyError:
            raise ValueError(f"cannot group by {g!r}; choose from {sorted(GROUP_FIELDS)}") from None
        out.append((g, str(getattr(key, attr))))
    return tuple(out)


def _mean_breakdown(bds: list[ScoreBreakdown], decomposed: bool) -> ScoreBreakdown:
    n = len(bds)
    if decomposed:
        return ScoreBreakdown.from_components(
            math.fsum(b.dispersion for b in bds) / n,
            math.fsum(b.overprediction for b in bds) / n,
            math.fsum(b.underprediction for b in bds) / n,
        )
    return ScoreBreakdown.plain(math.fsum(b.total for b in bds) / n)


def aggregate(
    records: Iterable[ScoreRecord],
    group_by: Sequence[str] = (),
    pairs: Sequence[ForecastPair] | None = None,
    levels: IntervalLevelSet | None = None,
) -> list[AggregateReport]:
    """Mean scores per group (``group_by=()`` gives one overall group).

    Means use exactly rounded summation, so results do not depend on record
    order. For decomposed scores the mean total is the sum of the mean
    components. Passing ``pairs`` and ``levels`` adds empirical coverage.
    Groups are returned sorted by their key.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to aggregate")
    buckets: dict[tuple, dict[str, list[ScoreRecord]]] = defaultdict(lambda: defaultdict(list))
    units: dict[tuple, set] = defaultdict(set)
    errors: dict[tuple, int] = defaultdict(int)
    for rec in records:
        g = _group_of(rec.unit_key, group_by)
        units[g].add(rec.unit_key)
        if rec.ok:
            buckets[g][rec.score_name].append(rec)
        else:
            errors[g] += 1

    pair_groups: dict[tuple, list] = defaultdict(list)
    if pairs is not None and levels is not None:
        for p in pairs:
            pair_groups[_group_of(p.forecast.unit_key, group_by)].append(p)

    reports = []
    for g in sorted(units):
        means, counts, orient = {}, {}, {}
        for name, recs in buckets[g].items():
            means[name] = _mean_breakdown([r.breakdown for r in recs], recs[0].decomposed)
            counts[name] = len(recs)
            orient[name] = recs[0].orientation
        coverage = {}
        if pair_groups.get(g):
            try:
                coverage = empirical_coverage(pair_groups[g], levels)
            except ValueError:
                coverage = {}
        reports.append(AggregateReport(g, len(units[g]), means, counts, orient, coverage, errors[g]))
    return reports


def empirical_coverage(pairs: Sequence[ForecastPair], levels: IntervalLevelSet) -> dict[float, float]:
    """Share of outcomes inside each closed central interval, keyed by ``1 - alpha``.

    Pairs lacking an interval's endpoints are left out of that level's count.
    """
    alphas = levels.alphas
    hits = np.zeros(len(alphas))
    seen = np.zeros(len(alphas))
    needed = IntervalLevelSet(alphas, include_median=False)
    for fc, y in pairs:
        q = _quantile_view(fc, needed.quantile_levels())
        table = q.as_dict()
        for k, (lo_lv, hi_lv) in enumerate(zip(needed.lower_levels(), needed.upper_levels())):
            lo, hi = table.get(lo_lv), table.get(hi_lv)
            if lo is None or hi is None:
                continue
            seen[k] += 1
            hits[k] += lo <= y <= hi
    if not np.any(seen):
        raise ValueError("no pair supplies the interval endpoints")
    return {
        cov: float(h / s)
        for cov, h, s in zip(levels.nominal_coverages(), hits, seen)
        if s > 0
    }


# --- curves and scatter tables --------------------------------------------


def _column_name(spec: ScoreSpec) -> str:
    return f"neg_{spec.name}" if spec.orientation == POSITIVE else spec.name


def score_curve(
    dist: NegBinParams,
    score_set: Sequence[str] = ("logs", "ae", "is@0.2", "crps", "wis@0.1/0.4/0.7", "wis"),
    y_range: Iterable[int] | None = None,
    levels: IntervalLevelSet = HUB_LEVELS,
    weights: WisWeights = DEFAULT_WEIGHTS,
    log_cfg: LogScoreConfig = LogScoreConfig(tolerance_radius_d=5),
) -> list[dict]:
    """Scores of a negative binomial forecast as a function of the outcome.

    One row per integer ``y``. Log scores appear negated (``neg_logs``) so
    every column is negatively oriented. Density scores use the tabulated
    distribution; interval scores use its exact quantiles.
    """
    if y_range is None:
        y_range = range(0, negbin_quantile(dist, 0.9999) + 51)
    ys = np.array(list(y_range), dtype=np.int_)
    table = tabulate(dist)
    specs = [parse_score(s, levels, weights) for s in score_set]
    columns: dict[str, np.ndarray] = {}
    for spec in specs:
        if spec.kind == "logs":
            col = [log_score(table, int(y), log_cfg) for y in ys]
        elif spec.kind == "mblogs":
            col = [multibin_log_score(table, int(y), log_cfg) for y in ys]
        elif spec.kind == "crps":
            col = crps_discrete_many(table, ys)
        elif spec.kind in ("ae", "mape"):
            m = negbin_quantile(dist, 0.5)
            if spec.kind == "ae":
                col = np.abs(m - ys.astype(float))
            else:
                col = [mape(m, y) if y != 0 else math.nan for y in ys]
        else:
            q = {lv: float(negbin_quantile(dist, lv)) for lv in spec.levels.quantile_levels()}
            lo, hi, m = interval_arrays(q, spec.levels)
            n = len(ys)
            col = wis_batch(np.tile(lo, (n, 1)), np.tile(hi, (n, 1)), np.full(n, m or 0.0), ys, spec.levels, spec.weights)[0]
        col = np.asarray(col, dtype=float)
        columns[_column_name(spec)] = -col if spec.orientation == POSITIVE else col
    return [
        {"y": int(y), **{name: float(col[i]) for name, col in columns.items()}}
        for i, y in enumerate(ys)
    ]


def _oriented(report: AggregateReport, name: str) -> float:
    v = report.means[name].total
    return -v if report.orientation[name] == POSITIVE else v


def scatter_data(reports: Sequence[AggregateReport], scores: Sequence[str] | None = None) -> list[dict]:
    """Long table of per-model mean scores for every pair of scores.

    ``reports`` must be grouped by model. Values are negatively oriented
    (log scores negated); ranks are 1 for the best model, ties averaged.
    """
    models = [r.group_value("model") for r in reports]
    if any(m is None for m in models):
        raise ValueError("scatter data needs reports grouped by model")
    if scores is None:
        scores = sorted(set.intersection(*(set(r.means) for r in reports)))
    if len(scores) < 2:
        raise ValueError("scatter data needs at least two scores")
    values = {s: np.array([_oriented(r, s) for r in reports]) for s in scores}
    ranks = {s: stats.rankdata(v) for s, v in values.items()}
    rows = []
    for sx, sy in itertools.combinations(scores, 2):
        for i, model in enumerate(models):
            rows.append(
                {
                    "model": model,
                    "score_x": sx,
                    "score_y": sy,
                    "value_x": float(values[sx][i]),
                    "value_y": float(values[sy][i]),
                    "rank_x": float(ranks[sx][i]),
                    "rank_y": float(ranks[sy][i]),
                }
            )
    return rows


def score_correlations(rows: Sequence[dict]) -> list[dict]:
    """Pearson and Spearman correlation for each score pair in a scatter table."""
    grouped: dict[tuple[str, str], list[dict]] = defaultdict(list)
    for r in rows:
        grouped[r["score_x"], r["score_y"]].append(r)
    out = []
    for (sx, sy), rs in grouped.items():
        x = np.array([r["value_x"] for r in rs])
        y = np.array([r["value_y"] for r in rs])
        if len(rs) < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
            pearson = spearman = math.nan
        else:
            pearson = float(stats.pearsonr(x, y)[0])
            spearman = float(stats.spearmanr(x, y)[0])
        out.append({"score_x": sx, "score_y": sy, "n": len(rs), "pearson": pearson, "spearman": spearman})
    return out
