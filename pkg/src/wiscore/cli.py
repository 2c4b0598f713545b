"""Command-line interface.

Subcommands: ``score``, ``aggregate``, ``decompose``, ``scatter`` (all read a
forecast file and a truth file) and ``curves`` (scores of a negative binomial
forecast over a range of outcomes).

Exit status: 0 on success, 1 on validation failures (bad data, unknown
scores, bad options), 2 on I/O failures.

Options may also come from ``--config FILE`` (a JSON object keyed by the
long option names, e.g. ``{"scores": "wis,ae", "normalizer": "none"}``);
command-line flags take precedence. The effective configuration is echoed
into JSON output, or into ``<output>.meta.json`` next to CSV output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from typing import Sequence

from .distributions import NegBinParams
from .forecast_data import (
    ForecastValidationError,
    pair_with_truth,
    parse_binned_file,
    parse_hub_quantile_file,
    parse_truth_file,
)
from .harness import (
    ScoreConfig,
    UnknownScoreError,
    aggregate,
    scatter_data,
    score_all,
    score_correlations,
    score_curve,
)
from .scores_density import LogScoreConfig
from .scores_quantile import (
    DIVIDE_BY_K_PLUS_1,
    HUB_LEVELS,
    NO_NORMALIZER,
    IntervalLevelSet,
    WisWeights,
)

log = logging.getLogger("wiscore")

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2

DEFAULTS = {
    "input_format": "hub_quantile",
    "levels": "hub",
    "alphas": None,
    "normalizer": "k+1",
    "w0": 0.5,
    "weights": None,
    "floor": -10.0,
    "d": 5,
    "group_by": "",
    "output": None,
    "format": "csv",
}

COMMAND_DEFAULTS = {
    "score": {"scores": "wis,ae"},
    "aggregate": {"scores": "wis,ae", "group_by": "model"},
    "decompose": {"scores": "wis,is@0.2", "group_by": "model"},
    "scatter": {"scores": "logs,mblogs,crps,ae,is@0.2,wis"},
    "curves": {
        "scores": "logs,ae,is@0.2,crps,wis@0.1/0.4/0.7,wis",
        "mu": None,
        "psi": None,
        "y_min": 0,
        "y_max": None,
    },
}

UNIT_COLUMNS = ["model", "forecast_date", "target", "target_end_date", "location"]
BREAKDOWN_COLUMNS = ["total", "dispersion", "overprediction", "underprediction"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wiscore", description="Score quantile and binned forecasts.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, with_inputs=True):
        p.add_argument("--config", help="JSON file with default options")
        p.add_argument("--scores", help="comma-separated score names")
        p.add_argument("--levels", choices=["hub"], help="named interval level preset")
        p.add_argument("--alphas", help="comma-separated interval alphas (overrides --levels)")
        p.add_argument("--normalizer", choices=["k+1", "none"])
        p.add_argument("--w0", type=float, help="weight of the median term")
        p.add_argument("--weights", help="comma-separated interval weights (default alpha/2)")
        p.add_argument("--floor", type=float, help="log score truncation floor")
        p.add_argument("--d", type=int, help="multibin log score tolerance in bins")
        p.add_argument("--output", "-o", help="output file (default: stdout)")
        p.add_argument("--format", choices=["csv", "json"])
        if with_inputs:
            p.add_argument("--forecasts", help="forecast CSV file")
            p.add_argument("--truth", help="truth CSV file")
            p.add_argument("--input-format", dest="input_format", choices=["hub_quantile", "binned"])
            p.add_argument("--group-by", dest="group_by", help="comma-separated grouping keys")

    common(sub.add_parser("score", help="score every forecast unit"))
    common(sub.add_parser("aggregate", help="mean scores and coverage per group"))
    common(sub.add_parser("decompose", help="dispersion/penalty decomposition per unit and group"))
    common(sub.add_parser("scatter", help="per-model mean scores for each score pair"))
    p = sub.add_parser("curves", help="scores of a negative binomial forecast against y")
    common(p, with_inputs=False)
    p.add_argument("--mu", type=float, help="negative binomial mean")
    p.add_argument("--psi", type=float, help="negative binomial size")
    p.add_argument("--y-min", dest="y_min", type=int)
    p.add_argument("--y-max", dest="y_max", type=int)
    return parser


def effective_config(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    cfg = {**DEFAULTS, **COMMAND_DEFAULTS[args.command]}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            try:
                from_file = json.load(fh)
            except json.JSONDecodeError as exc:
                raise UsageError(f"config file {args.config}: {exc}") from None
        if not isinstance(from_file, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = sorted(set(from_file) - set(cfg) - {"forecasts", "truth"})
        if unknown:
            raise UsageError(f"config file has unknown keys {unknown}")
        cfg.update(from_file)
    for key, value in vars(args).items():
        if key not in ("command", "config") and value is not None:
            cfg[key] = value
    cfg["command"] = args.command
    return cfg


def _split(text) -> list[str]:
    if isinstance(text, (list, tuple)):
        return [str(t).strip() for t in text if str(t).strip()]
    return [t.strip() for t in str(text or "").split(",") if t.strip()]


def _floats(text, what: str) -> list[float]:
    try:
        return [float(t) for t in _split(text)]
    except ValueError:
        raise UsageError(f"--{what} expects comma-separated numbers") from None


def score_config(cfg: dict) -> ScoreConfig:
    if cfg.get("alphas"):
        levels = IntervalLevelSet(tuple(_floats(cfg["alphas"], "alphas")))
    elif cfg["levels"] == "hub":
        levels = HUB_LEVELS
    else:
        raise UsageError(f"unknown level preset {cfg['levels']!r}")
    if cfg["normalizer"] not in ("k+1", "none"):
        raise UsageError("--normalizer must be 'k+1' or 'none'")
    normalizer = DIVIDE_BY_K_PLUS_1 if cfg["normalizer"] == "k+1" else NO_NORMALIZER
    w = tuple(_floats(cfg["weights"], "weights")) if cfg.get("weights") else None
    weights = WisWeights(float(cfg["w0"]), w, normalizer)
    log_cfg = LogScoreConfig(float(cfg["floor"]), int(cfg["d"]))
    scores = tuple(_split(cfg["scores"]))
    sc = ScoreConfig(scores, levels, weights, log_cfg)
    sc.specs()  # validate names and weights up front
    if "wis" in scores:
        weights.resolve(levels)
    return sc


def _load_pairs(cfg: dict):
    for key in ("forecasts", "truth"):
        if not cfg.get(key):
            raise UsageError(f"--{key} is required")
    if cfg["input_format"] == "hub_quantile":
        forecasts = parse_hub_quantile_file(cfg["forecasts"])
    elif cfg["input_format"] == "binned":
        forecasts = parse_binned_file(cfg["forecasts"])
    else:
        raise UsageError(f"unknown input format {cfg['input_format']!r}")
    truth = parse_truth_file(cfg["truth"])
    result = pair_with_truth(forecasts, truth)
    if result.unmatched:
        log.warning("%d forecast unit(s) have no matching observation", len(result.unmatched))
    return result


def _unit_row(key) -> dict:
    return key.as_row()


def _breakdown_row(bd) -> dict:
    if bd is None:
        return {c: math.nan for c in BREAKDOWN_COLUMNS}
    return {c: getattr(bd, c) for c in BREAKDOWN_COLUMNS}


def cmd_score(cfg: dict) -> tuple[list[dict], dict]:
    sc = score_config(cfg)
    paired = _load_pairs(cfg)
    rows = []
    for rec in score_all(paired.pairs, sc):
        rows.append(
            {
                **_unit_row(rec.unit_key),
                "score": rec.score_name,
                "orientation": rec.orientation,
                **_breakdown_row(rec.breakdown),
                "error": rec.error or "",
            }
        )
    return rows, {"unmatched": [str(f.unit_key) for f in paired.unmatched]}


def _group_keys(cfg: dict) -> list[str]:
    return _split(cfg.get("group_by", ""))


def _report_rows(reports, group_by, sc: ScoreConfig) -> list[dict]:
    coverages = sorted({c for r in reports for c in r.coverage})
    rows = []
    for rep in reports:
        cov = {f"coverage_{c:g}": rep.coverage.get(c, math.nan) for c in coverages}
        group = {g: rep.group_value(g) for g in group_by}
        for name in sc.scores:
            if name not in rep.means:
                continue
            bd = rep.means[name]
            rows.append(
                {
                    **group,
                    "score": name,
                    "orientation": rep.orientation[name],
                    "count": rep.counts[name],
                    **_breakdown_row(bd),
                    **cov,
                }
            )
    return rows


def cmd_aggregate(cfg: dict) -> tuple[list[dict], dict]:
    sc = score_config(cfg)
    paired = _load_pairs(cfg)
    group_by = _group_keys(cfg)
    records = score_all(paired.pairs, sc)
    if not records:
        raise UsageError("no forecast could be paired with an observation")
    reports = aggregate(records, group_by, paired.pairs, sc.levels)
    n_err = sum(r.n_errors for r in reports)
    return _report_rows(reports, group_by, sc), {"error_records": n_err}


def cmd_decompose(cfg: dict) -> tuple[list[dict], dict]:
    sc = score_config(cfg)
    for spec in sc.specs():
        if spec.kind not in ("wis", "is"):
            raise UsageError(f"decompose only handles interval scores, got {spec.name!r}")
    paired = _load_pairs(cfg)
    group_by = _group_keys(cfg)
    records = score_all(paired.pairs, sc)
    if not records:
        raise UsageError("no forecast could be paired with an observation")

    def shares(bd) -> dict:
        if bd is None or bd.total == 0:
            return {"dispersion_share": math.nan, "penalty_share": math.nan}
        return {"dispersion_share": bd.dispersion / bd.total, "penalty_share": bd.penalty / bd.total}

    rows = []
    for rec in records:
        rows.append(
            {
                "row_type": "unit",
                "group": "",
                **_unit_row(rec.unit_key),
                "score": rec.score_name,
                **_breakdown_row(rec.breakdown),
                **shares(rec.breakdown),
                "error": rec.error or "",
            }
        )
    for rep in aggregate(records, group_by):
        label = ";".join(f"{k}={v}" for k, v in rep.group) or "overall"
        for name in sc.scores:
            if name in rep.means:
                bd = rep.means[name]
                rows.append(
                    {
                        "row_type": "mean",
                        "group": label,
                        **{c: "" for c in UNIT_COLUMNS},
                        "score": name,
                        **_breakdown_row(bd),
                        **shares(bd),
                        "error": "",
                    }
                )
    return rows, {}


def cmd_scatter(cfg: dict) -> tuple[list[dict], dict]:
    sc = score_config(cfg)
    paired = _load_pairs(cfg)
    records = score_all(paired.pairs, sc)
    if not records:
        raise UsageError("no forecast could be paired with an observation")
    reports = aggregate(records, ["model"])
    available = [s for s in sc.scores if all(s in r.means for r in reports)]
    rows = scatter_data(reports, available)
    return rows, {"correlations": score_correlations(rows)}


def cmd_curves(cfg: dict) -> tuple[list[dict], dict]:
    if cfg.get("mu") is None or cfg.get("psi") is None:
        raise UsageError("curves needs --mu and --psi")
    sc = score_config(cfg)
    dist = NegBinParams(float(cfg["mu"]), float(cfg["psi"]))
    y_range = None
    if cfg.get("y_max") is not None:
        y_range = range(int(cfg.get("y_min") or 0), int(cfg["y_max"]) + 1)
    rows = score_curve(dist, sc.scores, y_range, sc.levels, sc.weights, sc.log)
    return rows, {}


COMMANDS = {
    "score": cmd_score,
    "aggregate": cmd_aggregate,
    "decompose": cmd_decompose,
    "scatter": cmd_scatter,
    "curves": cmd_curves,
}


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _cell(value) -> str:
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return "" if value is None else str(value)


def render(rows: list[dict], meta: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_deep_clean({**meta, "rows": rows}), indent=2) + "\n"
    buf = io.StringIO()
    columns = list(rows[0]) if rows else []
    for r in rows:
        for k in r:
            if k not in columns:
                columns.append(k)
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: _cell(r.get(k)) for k in columns})
    return buf.getvalue()


def _deep_clean(obj):
    if isinstance(obj, dict):
        return {k: _deep_clean(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_deep_clean(v) for v in obj]
    return _clean(obj)


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="wiscore: %(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = effective_config(args)
        rows, extra = COMMANDS[args.command](cfg)
        if cfg["format"] not in ("csv", "json"):
            raise UsageError("--format must be csv or json")
        meta = {"command": args.command, "config": {k: v for k, v in sorted(cfg.items()) if k != "command"}, **extra}
        text = render(rows, meta, cfg["format"])
        if cfg.get("output"):
            with open(cfg["output"], "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            if cfg["format"] == "csv":
                with open(f"{cfg['output']}.meta.json", "w", encoding="utf-8") as fh:
                    fh.write(json.dumps(_deep_clean(meta), indent=2) + "\n")
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"wiscore: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, UnknownScoreError, ForecastValidationError, ValueError) as exc:
        print(f"wiscore: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
