"""Forecast and observation records, validation, and CSV I/O.

Three comma-delimited, UTF-8 file layouts are supported, each with a
mandatory header row:

hub quantile
    ``model,forecast_date,target,target_end_date,location,type,quantile,value``
    with ``type`` either ``point`` or ``quantile`` (``quantile`` is left empty
    on point rows).
binned
    ``model,forecast_date,target,target_end_date,location,bin_start,bin_end,prob``
truth
    ``location,target,target_end_date,value``

Dates are ISO-8601; numbers are written with ``repr`` so that a write/parse
round trip is exact.
"""

from __future__ import annotations

import csv
import io
import math
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import date
from typing import IO, Iterable, Iterator, NamedTuple, Sequence, Union

import numpy as np

__all__ = [
    "ForecastValidationError",
    "ForecastUnitKey",
    "Observation",
    "QuantileForecast",
    "BinnedForecast",
    "ForecastPair",
    "PairingResult",
    "level_key",
    "parse_hub_quantile_file",
    "write_hub_quantile_file",
    "parse_binned_file",
    "write_binned_file",
    "parse_truth_file",
    "write_truth_file",
    "quantiles_from_binned",
    "pair_with_truth",
]

HUB_COLUMNS = ("model", "forecast_date", "target", "target_end_date", "location", "type", "quantile", "value")
BINNED_COLUMNS = ("model", "forecast_date", "target", "target_end_date", "location", "bin_start", "bin_end", "prob")
TRUTH_COLUMNS = ("location", "target", "target_end_date", "value")

PathOrStream = Union[str, os.PathLike, IO[str]]

_LEVEL_DIGITS = 10
_WIDTH_TOL = 1e-9
_RENORMALIZE_TOL = 1e-6
_EXACT_SUM_TOL = 1e-12


class ForecastValidationError(ValueError):
    """A forecast, observation or input file violates the data contract."""


def level_key(level: float) -> float:
    """Canonical float for a quantile level (absorbs ``1 - 0.15 != 0.85``)."""
    return round(float(level), _LEVEL_DIGITS)


@dataclass(frozen=True, order=True)
class ForecastUnitKey:
    model_id: str
    location: str
    target: str
    target_end_date: date
    forecast_date: date

    def __post_init__(self):
        for name in ("model_id", "location", "target"):
            if not str(getattr(self, name)).strip():
                raise ForecastValidationError(f"{name} must be non-empty")
        if "ahead" in self.target.lower() and self.target_end_date < self.forecast_date:
            raise ForecastValidationError(
                f"target_end_date {self.target_end_date} precedes forecast_date {self.forecast_date} for {self.target!r}"
            )

    @property
    def truth_key(self) -> tuple[str, str, date]:
        return (self.location, self.target, self.target_end_date)

    def as_row(self) -> dict[str, str]:
        return {
            "model": self.model_id,
            "forecast_date": self.forecast_date.isoformat(),
            "target": self.target,
            "target_end_date": self.target_end_date.isoformat(),
            "location": self.location,
        }

    def __str__(self):
        return f"{self.model_id}/{self.location}/{self.target}/{self.target_end_date}@{self.forecast_date}"


@dataclass(frozen=True)
class Observation:
    location: str
    target: str
    target_end_date: date
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ForecastValidationError(f"observation value must be finite, got {self.value!r}")

    @property
    def key(self) -> tuple[str, str, date]:
        return (self.location, self.target, self.target_end_date)


@dataclass(frozen=True)
class QuantileForecast:
    """Predictive quantiles ``(level, value)`` for one forecast unit.

    Entries are kept sorted by level; values must not decrease with the
    level. Violations are rejected rather than re-sorted.
    """

    unit_key: ForecastUnitKey
    entries: tuple[tuple[float, float], ...]
    point: float | None = None
    _table: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        entries = tuple(sorted((float(lv), float(v)) for lv, v in self.entries))
        for lv, v in entries:
            if not 0 < lv < 1:
                raise ForecastValidationError(f"{self.unit_key}: quantile level {lv!r} outside (0, 1)")
            if not math.isfinite(v):
                raise ForecastValidationError(f"{self.unit_key}: non-finite value at level {lv!r}")
        keys = [level_key(lv) for lv, _ in entries]
        dupes = sorted({k for k in keys if keys.count(k) > 1})
        if dupes:
            raise ForecastValidationError(f"{self.unit_key}: duplicate quantile levels {dupes}")
        bad = [
            (a[0], b[0]) for a, b in zip(entries, entries[1:]) if b[1] < a[1]
        ]
        if bad:
            pairs = ", ".join(f"q({lo:g}) > q({hi:g})" for lo, hi in bad)
            raise ForecastValidationError(f"{self.unit_key}: quantiles not monotone: {pairs}")
        if self.point is not None and not math.isfinite(self.point):
            raise ForecastValidationError(f"{self.unit_key}: non-finite point forecast")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "point", None if self.point is None else float(self.point))
        object.__setattr__(self, "_table", dict(zip(keys, (v for _, v in entries))))

    @property
    def levels(self) -> np.ndarray:
        return np.array([lv for lv, _ in self.entries])

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.entries])

    def as_dict(self) -> dict[float, float]:
        return self._table

    def value_at(self, level: float) -> float | None:
        return self._table.get(level_key(level))

    def missing_levels(self, levels: Iterable[float]) -> list[float]:
        return [lv for lv in levels if level_key(lv) not in self._table]

    @property
    def median(self) -> float | None:
        return self.value_at(0.5)

    def point_or_median(self) -> float:
        """The point forecast, falling back to the 0.5 quantile."""
        if self.point is not None:
            return self.point
        m = self.median
        if m is None:
            raise ForecastValidationError(f"{self.unit_key}: no point forecast and no median")
        return m


@dataclass(frozen=True)
class BinnedForecast:
    """Probabilities over contiguous, equal-width bins ``[start, end)``."""

    unit_key: ForecastUnitKey
    bins: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        bins = tuple((float(a), float(b), float(p)) for a, b, p in self.bins)
        if not bins:
            raise ForecastValidationError(f"{self.unit_key}: no bins")
        width = bins[0][1] - bins[0][0]
        for i, (lo, hi, p) in enumerate(bins):
            if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
                raise ForecastValidationError(f"{self.unit_key}: bin {i} has invalid edges [{lo!r}, {hi!r})")
            if abs((hi - lo) - width) > _WIDTH_TOL:
                raise ForecastValidationError(f"{self.unit_key}: bin {i} width {hi - lo!r} differs from {width!r}")
            if i and abs(lo - bins[i - 1][1]) > _WIDTH_TOL:
                raise ForecastValidationError(f"{self.unit_key}: bins {i - 1} and {i} are not contiguous")
            if not (math.isfinite(p) and p >= 0):
                raise ForecastValidationError(f"{self.unit_key}: bin {i} has invalid probability {p!r}")
        total = math.fsum(p for _, _, p in bins)
        if abs(total - 1.0) > _RENORMALIZE_TOL:
            raise ForecastValidationError(f"{self.unit_key}: bin probabilities sum to {total!r}")
        if abs(total - 1.0) > _EXACT_SUM_TOL:
            bins = tuple((lo, hi, p / total) for lo, hi, p in bins)
        object.__setattr__(self, "bins", bins)

    @property
    def width(self) -> float:
        lo, hi, _ = self.bins[0]
        return hi - lo

    @property
    def start(self) -> float:
        return self.bins[0][0]

    @property
    def centers(self) -> np.ndarray:
        return np.array([(lo + hi) / 2 for lo, hi, _ in self.bins])

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for _, _, p in self.bins])


class ForecastPair(NamedTuple):
    forecast: Union[QuantileForecast, BinnedForecast]
    y: float


@dataclass
class PairingResult:
    pairs: list[ForecastPair]
    unmatched: list[Union[QuantileForecast, BinnedForecast]]


# --- file handling --------------------------------------------------------


@contextmanager
def _open(source: PathOrStream, mode: str) -> Iterator[IO[str]]:
    if hasattr(source, "read") or hasattr(source, "write"):
        yield source
    else:
        with open(source, mode, encoding="utf-8", newline="") as fh:
            yield fh


def _rows(stream: IO[str], columns: Sequence[str]) -> Iterator[tuple[int, dict[str, str]]]:
    reader = csv.DictReader(stream)
    try:
        fieldnames = reader.fieldnames
    except csv.Error as exc:
        raise ForecastValidationError(f"unreadable header: {exc}") from None
    if fieldnames is None:
        raise ForecastValidationError("missing header row")
    header = [c.strip() for c in reader.fieldnames]
    missing = [c for c in columns if c not in header]
    if missing:
        raise ForecastValidationError(f"header lacks columns {missing}; expected {','.join(columns)}")
    reader.fieldnames = header
    while True:
        try:
            row = next(reader)
        except StopIteration:
            return
        except csv.Error as exc:
            raise ForecastValidationError(f"line {reader.line_num}: {exc}") from None
        if None in row or any(row.get(c) is None for c in columns):
            raise ForecastValidationError(f"line {reader.line_num}: wrong number of fields")
        yield reader.line_num, {k: (v or "").strip() for k, v in row.items()}


def _number(text: str, line: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ForecastValidationError(f"line {line}: malformed number {text!r} in column {column!r}") from None
    if not math.isfinite(value):
        raise ForecastValidationError(f"line {line}: non-finite number {text!r} in column {column!r}")
    return value


def _date(text: str, line: int, column: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise ForecastValidationError(f"line {line}: malformed date {text!r} in column {column!r}") from None


def _unit_key(row: dict[str, str], line: int) -> ForecastUnitKey:
    try:
        return ForecastUnitKey(
            model_id=row["model"],
            location=row["location"],
            target=row["target"],
            target_end_date=_date(row["target_end_date"], line, "target_end_date"),
            forecast_date=_date(row["forecast_date"], line, "forecast_date"),
        )
    except ForecastValidationError as exc:
        if str(exc).startswith("line "):
            raise
        raise ForecastValidationError(f"line {line}: {exc}") from None


def _fmt(x: float) -> str:
    return repr(float(x))


def parse_hub_quantile_file(source: PathOrStream) -> list[QuantileForecast]:
    """Read hub quantile rows, one :class:`QuantileForecast` per unit key.

    Units appear in order of first occurrence.
    """
    groups: dict[ForecastUnitKey, dict] = {}
    with _open(source, "r") as fh:
        for line, row in _rows(fh, HUB_COLUMNS):
            key = _unit_key(row, line)
            group = groups.setdefault(key, {"entries": {}, "point": None})
            kind = row["type"].lower()
            value = _number(row["value"], line, "value")
            if kind == "quantile":
                level = _number(row["quantile"], line, "quantile")
                lk = level_key(level)
                if lk in group["entries"]:
                    raise ForecastValidationError(f"line {line}: duplicate quantile {level:g} for {key}")
                group["entries"][lk] = (level, value)
            elif kind == "point":
                if row["quantile"] not in ("", "NA"):
                    raise ForecastValidationError(f"line {line}: point rows must leave 'quantile' empty")
                if group["point"] is not None:
                    raise ForecastValidationError(f"line {line}: duplicate point forecast for {key}")
                group["point"] = value
            else:
                raise ForecastValidationError(f"line {line}: type must be 'point' or 'quantile', got {row['type']!r}")
    return [
        QuantileForecast(key, tuple(g["entries"].values()), g["point"]) for key, g in groups.items()
    ]


def write_hub_quantile_file(forecasts: Iterable[QuantileForecast], dest: PathOrStream) -> None:
    with _open(dest, "w") as fh:
        writer = csv.DictWriter(fh, fieldnames=HUB_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for fc in forecasts:
            base = fc.unit_key.as_row()
            if fc.point is not None:
                writer.writerow({**base, "type": "point", "quantile": "", "value": _fmt(fc.point)})
            for level, value in fc.entries:
                writer.writerow({**base, "type": "quantile", "quantile": _fmt(level), "value": _fmt(value)})


def parse_binned_file(source: PathOrStream) -> list[BinnedForecast]:
    """Read binned rows, one :class:`BinnedForecast` per unit key.

    Bins must be listed in ascending order within each unit.
    """
    groups: dict[ForecastUnitKey, list] = {}
    first_line: dict[ForecastUnitKey, int] = {}
    with _open(source, "r") as fh:
        for line, row in _rows(fh, BINNED_COLUMNS):
            key = _unit_key(row, line)
            first_line.setdefault(key, line)
            groups.setdefault(key, []).append(
                (
                    _number(row["bin_start"], line, "bin_start"),
                    _number(row["bin_end"], line, "bin_end"),
                    _number(row["prob"], line, "prob"),
                )
            )
    out = []
    for key, bins in groups.items():
        try:
            out.append(BinnedForecast(key, tuple(bins)))
        except ForecastValidationError as exc:
            raise ForecastValidationError(f"unit starting at line {first_line[key]}: {exc}") from None
    return out


def write_binned_file(forecasts: Iterable[BinnedForecast], dest: PathOrStream) -> None:
    with _open(dest, "w") as fh:
        writer = csv.DictWriter(fh, fieldnames=BINNED_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for fc in forecasts:
            base = fc.unit_key.as_row()
            for lo, hi, p in fc.bins:
                writer.writerow({**base, "bin_start": _fmt(lo), "bin_end": _fmt(hi), "prob": _fmt(p)})


def parse_truth_file(source: PathOrStream) -> list[Observation]:
    out = []
    with _open(source, "r") as fh:
        for line, row in _rows(fh, TRUTH_COLUMNS):
            try:
                out.append(
                    Observation(
                        location=row["location"],
                        target=row["target"],
                        target_end_date=_date(row["target_end_date"], line, "target_end_date"),
                        value=_number(row["value"], line, "value"),
                    )
                )
            except ForecastValidationError as exc:
                if str(exc).startswith("line "):
                    raise
                raise ForecastValidationError(f"line {line}: {exc}") from None
    return out


def write_truth_file(observations: Iterable[Observation], dest: PathOrStream) -> None:
    with _open(dest, "w") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRUTH_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for ob in observations:
            writer.writerow(
                {
                    "location": ob.location,
                    "target": ob.target,
                    "target_end_date": ob.target_end_date.isoformat(),
                    "value": _fmt(ob.value),
                }
            )


def dumps(writer, items) -> str:
    """Serialize with one of the ``write_*`` functions into a string."""
    buf = io.StringIO()
    writer(items, buf)
    return buf.getvalue()


# --- derived forecasts and joins ------------------------------------------

# absorbs rounding in cumulative bin sums such as 0.1 + 0.2 + ...
_CDF_TOL = 1e-12


def quantiles_from_binned(bins: BinnedForecast, levels: Sequence[float]) -> QuantileForecast:
    """Quantiles of the point-mass-at-bin-center distribution.

    Uses the lower generalized inverse: the first center whose cumulative
    probability reaches the level.
    """
    centers = bins.centers
    cdf = np.cumsum(bins.probs)
    entries = []
    for level in sorted(set(level_key(lv) for lv in levels)):
        if not 0 < level < 1:
            raise ForecastValidationError(f"quantile level {level!r} outside (0, 1)")
        i = int(np.searchsorted(cdf, level - _CDF_TOL, side="left"))
        entries.append((level, float(centers[min(i, len(centers) - 1)])))
    return QuantileForecast(bins.unit_key, tuple(entries))


def pair_with_truth(forecasts: Iterable, observations: Iterable[Observation]) -> PairingResult:
    """Join forecasts to observations on ``(location, target, target_end_date)``.

    Forecasts without an observation are returned in ``unmatched``.
    """
    truth: dict[tuple, float] = {}
    for ob in observations:
        if ob.key in truth:
            raise ForecastValidationError(f"duplicate observation for {ob.key}")
        truth[ob.key] = ob.value
    pairs, unmatched = [], []
    for fc in forecasts:
        y = truth.get(fc.unit_key.truth_key)
        if y is None:
            unmatched.append(fc)
        else:
            pairs.append(ForecastPair(fc, y))
    return PairingResult(pairs, unmatched)
