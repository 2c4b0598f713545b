import csv
import io
import json
import subprocess
import sys
from datetime import date

import numpy as np
import pytest

from wiscore.cli import EXIT_IO, EXIT_OK, EXIT_VALIDATION, main
from wiscore.distributions import NegBinParams, negbin_quantile, tabulate
from wiscore.forecast_data import (
    BinnedForecast,
    ForecastUnitKey,
    Observation,
    QuantileForecast,
    write_binned_file,
    write_hub_quantile_file,
    write_truth_file,
)
from wiscore.scores_quantile import HUB_QUANTILE_LEVELS

from conftest import F, G, nb_quantiles

END = date(2020, 5, 9)
FC = date(2020, 5, 4)


def key(model, location, end=END):
    return ForecastUnitKey(model, location, "1 wk ahead inc death", end, FC)


def hub_fc(model, location, params, end=END):
    return QuantileForecast(key(model, location, end), tuple(nb_quantiles(params).items()))


def write_dataset(tmp_path, forecasts, truth):
    fpath, tpath = tmp_path / "forecasts.csv", tmp_path / "truth.csv"
    write_hub_quantile_file(forecasts, fpath)
    write_truth_file(truth, tpath)
    return str(fpath), str(tpath)


def obs(location, value, end=END):
    return Observation(location, "1 wk ahead inc death", end, float(value))


@pytest.fixture
def one_unit(tmp_path):
    return write_dataset(tmp_path, [hub_fc("m1", "US", F)], [obs("US", 190)])


@pytest.fixture
def two_models(tmp_path):
    forecasts, truth = [], []
    rng = np.random.default_rng(0)
    for i in range(6):
        loc = f"L{i}"
        y = int(rng.negative_binomial(F.psi, F.prob))
        truth.append(obs(loc, y))
        forecasts.append(hub_fc("F", loc, F))
        forecasts.append(hub_fc("G", loc, G))
    return write_dataset(tmp_path, forecasts, truth)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def table(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestScore:
    def test_two_rows(self, capsys, one_unit):
        f, t = one_unit
        code, out, _ = run(capsys, "score", "--forecasts", f, "--truth", t, "--scores", "wis,ae")
        assert code == EXIT_OK
        rows = table(out)
        assert [r["score"] for r in rows] == ["wis", "ae"]
        assert float(rows[0]["total"]) == pytest.approx(106.49625)
        assert float(rows[1]["total"]) == 135.0

    def test_unknown_score_lists_registry(self, capsys, one_unit):
        f, t = one_unit
        code, _, err = run(capsys, "score", "--forecasts", f, "--truth", t, "--scores", "wis,brier")
        assert code == EXIT_VALIDATION
        for name in ("logs", "mblogs", "crps", "is@", "wis", "ae", "mape"):
            assert name in err

    def test_byte_identical(self, capsys, two_models, tmp_path):
        f, t = two_models
        outs = []
        for i in range(2):
            path = tmp_path / f"out{i}.csv"
            assert run(capsys, "score", "--forecasts", f, "--truth", t, "-o", str(path))[0] == EXIT_OK
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]

    def test_missing_file_is_io_error(self, capsys, tmp_path, one_unit):
        _, t = one_unit
        code, _, err = run(capsys, "score", "--forecasts", str(tmp_path / "nope.csv"), "--truth", t)
        assert code == EXIT_IO and "I/O" in err

    def test_missing_input_flag(self, capsys):
        assert run(capsys, "score")[0] == EXIT_VALIDATION

    def test_schema_violation(self, capsys, tmp_path, one_unit):
        _, t = one_unit
        bad = tmp_path / "bad.csv"
        bad.write_text("model,forecast_date\nm,2020-01-01\n")
        code, _, err = run(capsys, "score", "--forecasts", str(bad), "--truth", t)
        assert code == EXIT_VALIDATION and "column" in err

    def test_non_monotone_diagnostic(self, capsys, tmp_path, one_unit):
        _, t = one_unit
        bad = tmp_path / "bad.csv"
        bad.write_text(
            "model,forecast_date,target,target_end_date,location,type,quantile,value\n"
            "m,2020-05-04,1 wk ahead inc death,2020-05-09,US,quantile,0.25,10\n"
            "m,2020-05-04,1 wk ahead inc death,2020-05-09,US,quantile,0.75,5\n"
        )
        code, _, err = run(capsys, "score", "--forecasts", str(bad), "--truth", t)
        assert code == EXIT_VALIDATION and "q(0.25) > q(0.75)" in err

    def test_error_record_does_not_abort(self, capsys, tmp_path):
        q = nb_quantiles(F)
        del q[0.01]
        forecasts = [QuantileForecast(key("m", "A"), tuple(q.items())), hub_fc("m", "B", F)]
        f, t = write_dataset(tmp_path, forecasts, [obs("A", 3), obs("B", 4)])
        code, out, _ = run(capsys, "score", "--forecasts", f, "--truth", t, "--scores", "wis")
        rows = table(out)
        assert code == EXIT_OK and len(rows) == 2
        assert rows[0]["total"] == "" and "0.01" in rows[0]["error"]
        assert rows[1]["error"] == ""

    def test_json_metadata(self, capsys, one_unit):
        f, t = one_unit
        code, out, _ = run(capsys, "score", "--forecasts", f, "--truth", t, "--format", "json", "--normalizer", "none")
        doc = json.loads(out)
        assert code == EXIT_OK
        assert doc["config"]["normalizer"] == "none" and doc["config"]["scores"] == "wis,ae"
        assert doc["rows"][0]["total"] == pytest.approx(1277.955)

    def test_csv_sidecar(self, capsys, one_unit, tmp_path):
        f, t = one_unit
        out = tmp_path / "s.csv"
        run(capsys, "score", "--forecasts", f, "--truth", t, "-o", str(out))
        meta = json.loads((tmp_path / "s.csv.meta.json").read_text())
        assert meta["command"] == "score" and meta["config"]["d"] == 5

    def test_config_precedence(self, capsys, one_unit, tmp_path):
        f, t = one_unit
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"forecasts": f, "truth": t, "scores": "ae", "normalizer": "none"}))
        _, out, _ = run(capsys, "score", "--config", str(cfg))
        assert [r["score"] for r in table(out)] == ["ae"]
        _, out, _ = run(capsys, "score", "--config", str(cfg), "--scores", "wis", "--normalizer", "k+1")
        (row,) = table(out)
        assert float(row["total"]) == pytest.approx(106.49625)

    def test_config_unknown_key(self, capsys, one_unit, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"colour": "red"}))
        code, _, err = run(capsys, "score", "--config", str(cfg))
        assert code == EXIT_VALIDATION and "colour" in err

    def test_custom_alphas_and_weights(self, capsys, one_unit):
        f, t = one_unit
        code, out, _ = run(
            capsys, "score", "--forecasts", f, "--truth", t, "--scores", "wis",
            "--alphas", "0.02,0.05,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9",
            "--w0", "0", "--weights", ",".join(["0.0909090909090909"] * 11), "--normalizer", "none",
        )
        assert code == EXIT_OK
        assert float(table(out)[0]["total"]) == pytest.approx(1075.034, abs=0.01)

    def test_bad_alphas(self, capsys, one_unit):
        f, t = one_unit
        assert run(capsys, "score", "--forecasts", f, "--truth", t, "--alphas", "0.5,0.2")[0] == EXIT_VALIDATION

    def test_binned_input(self, capsys, tmp_path):
        t = tabulate(F)
        fc = BinnedForecast(key("m", "US"), tuple((k - 0.5, k + 0.5, p) for k, p in enumerate(t.probs)))
        fpath = tmp_path / "b.csv"
        write_binned_file([fc], fpath)
        write_truth_file([obs("US", 190)], tmp_path / "t.csv")
        code, out, _ = run(
            capsys, "score", "--forecasts", str(fpath), "--truth", str(tmp_path / "t.csv"),
            "--input-format", "binned", "--scores", "logs,mblogs,crps,wis", "--d", "0",
        )
        rows = {r["score"]: r for r in table(out)}
        assert code == EXIT_OK
        assert float(rows["logs"]["total"]) == pytest.approx(-9.37, abs=0.01)
        assert rows["logs"]["orientation"] == "positively_oriented"
        assert float(rows["wis"]["total"]) == pytest.approx(106.49625)

    def test_console_script_module(self, one_unit):
        f, t = one_unit
        proc = subprocess.run(
            [sys.executable, "-m", "wiscore.cli", "score", "--forecasts", f, "--truth", t, "--scores", "ae"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0 and "135.0" in proc.stdout


class TestAggregate:
    def test_one_unit(self, capsys, one_unit):
        f, t = one_unit
        code, out, _ = run(capsys, "aggregate", "--forecasts", f, "--truth", t)
        rows = table(out)
        assert code == EXIT_OK and [r["score"] for r in rows] == ["wis", "ae"]
        assert float(rows[0]["total"]) == pytest.approx(106.49625)
        assert rows[0]["count"] == "1"
        assert rows[0]["coverage_0.98"] == "0.0"

    def test_mean_of_two(self, capsys, tmp_path):
        forecasts = [QuantileForecast(key("m", loc), ((0.5, 0.0),)) for loc in "AB"]
        f, t = write_dataset(tmp_path, forecasts, [obs("A", 2), obs("B", 4)])
        _, out, _ = run(capsys, "aggregate", "--forecasts", f, "--truth", t, "--scores", "ae")
        (row,) = table(out)
        assert float(row["total"]) == 3.0 and float(row["overprediction"]) + float(row["underprediction"]) == 3.0

    def test_groups_and_closure(self, capsys, two_models):
        f, t = two_models
        _, out, _ = run(capsys, "aggregate", "--forecasts", f, "--truth", t, "--group-by", "model,location", "--format", "json")
        rows = json.loads(out)["rows"]
        assert len(rows) == 2 * 6 * 2
        for r in rows:
            assert r["total"] == r["dispersion"] + r["overprediction"] + r["underprediction"]
            assert 0 <= r["coverage_0.5"] <= 1

    def test_unpaired_is_error(self, capsys, tmp_path):
        f, t = write_dataset(tmp_path, [hub_fc("m", "US", F)], [obs("XX", 1)])
        assert run(capsys, "aggregate", "--forecasts", f, "--truth", t)[0] == EXIT_VALIDATION


class TestDecompose:
    def test_inside_all_intervals(self, capsys, tmp_path):
        f, t = write_dataset(tmp_path, [hub_fc("m", "US", F)], [obs("US", negbin_quantile(F, 0.5))])
        _, out, _ = run(capsys, "decompose", "--forecasts", f, "--truth", t)
        for r in table(out):
            assert float(r["overprediction"]) == 0 and float(r["underprediction"]) == 0
            assert float(r["dispersion"]) == float(r["total"])

    def test_columns_sum(self, capsys, two_models):
        f, t = two_models
        _, out, _ = run(capsys, "decompose", "--forecasts", f, "--truth", t, "--format", "json")
        rows = json.loads(out)["rows"]
        assert {r["row_type"] for r in rows} == {"unit", "mean"}
        for r in rows:
            assert r["total"] == pytest.approx(r["dispersion"] + r["overprediction"] + r["underprediction"], rel=1e-12)

    def test_sharp_biased_has_larger_penalty_share(self, capsys, tmp_path):
        rng = np.random.default_rng(5)
        truth_params = NegBinParams(60, 8)
        sharp, wide = NegBinParams(100, 200), NegBinParams(60, 2)
        forecasts, truth = [], []
        for i in range(40):
            end = date.fromordinal(END.toordinal() + 7 * i)
            truth.append(obs("US", rng.negative_binomial(truth_params.psi, truth_params.prob), end))
            forecasts += [hub_fc("sharp", "US", sharp, end), hub_fc("wide", "US", wide, end)]
        f, t = write_dataset(tmp_path, forecasts, truth)
        _, out, _ = run(capsys, "decompose", "--forecasts", f, "--truth", t, "--scores", "wis", "--format", "json")
        means = {r["group"]: r for r in json.loads(out)["rows"] if r["row_type"] == "mean"}
        assert means["model=sharp"]["penalty_share"] > means["model=wide"]["penalty_share"]
        assert means["model=sharp"]["dispersion"] < means["model=wide"]["dispersion"]

    def test_rejects_non_interval_scores(self, capsys, one_unit):
        f, t = one_unit
        assert run(capsys, "decompose", "--forecasts", f, "--truth", t, "--scores", "crps")[0] == EXIT_VALIDATION


class TestScatter:
    def test_two_models(self, capsys, two_models):
        f, t = two_models
        code, out, _ = run(capsys, "scatter", "--forecasts", f, "--truth", t, "--scores", "wis,ae", "--format", "json")
        doc = json.loads(out)
        assert code == EXIT_OK and len(doc["rows"]) == 2
        assert {r["model"] for r in doc["rows"]} == {"F", "G"}
        assert doc["correlations"][0]["score_x"] == "wis"


class TestCurves:
    def test_shape_properties(self, capsys):
        code, out, _ = run(capsys, "curves", "--mu", "60", "--psi", "4", "--format", "json")
        rows = json.loads(out)["rows"]
        assert code == EXIT_OK
        assert rows[-1]["y"] == negbin_quantile(F, 0.9999) + 50
        m = negbin_quantile(F, 0.5)
        assert min(rows, key=lambda r: r["ae"])["y"] == m
        lo, hi = negbin_quantile(F, 0.1), negbin_quantile(F, 0.9)
        assert len({r["is@0.2"] for r in rows if lo <= r["y"] <= hi}) == 1
        assert all(r["wis"] >= r["ae"] for r in rows if abs(r["y"] - m) <= 5)
        assert all(r["wis"] <= r["ae"] for r in rows if r["y"] > negbin_quantile(F, 0.995))

    def test_range_and_floor(self, capsys):
        _, out, _ = run(capsys, "curves", "--mu", "80", "--psi", "10", "--y-min", "185", "--y-max", "195", "--scores", "logs", "--floor", "-5")
        rows = table(out)
        assert [int(r["y"]) for r in rows] == list(range(185, 196))
        assert {float(r["neg_logs"]) for r in rows} == {5.0}

    def test_needs_params(self, capsys):
        assert run(capsys, "curves", "--mu", "60")[0] == EXIT_VALIDATION

    def test_invalid_params(self, capsys):
        assert run(capsys, "curves", "--mu", "-1", "--psi", "2")[0] == EXIT_VALIDATION
