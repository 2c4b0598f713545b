import math
from datetime import date

import pytest

from wiscore import HUB_QUANTILE_LEVELS, NegBinParams, negbin_quantile
from wiscore.forecast_data import ForecastUnitKey, QuantileForecast

F = NegBinParams(60, 4)
G = NegBinParams(80, 10)


def brute_pmf(mu, psi, k):
    """NegBin pmf from log-gamma terms, independent of the package."""
    p = psi / (psi + mu)
    return math.exp(
        math.lgamma(k + psi) - math.lgamma(psi) - math.lgamma(k + 1) + psi * math.log(p) + k * math.log1p(-p)
    )


def nb_quantiles(params, levels=HUB_QUANTILE_LEVELS):
    return {lv: float(negbin_quantile(params, lv)) for lv in levels}


def unit_key(model="m1", location="US", target="1 wk ahead inc death", end=date(2020, 5, 9), fc=date(2020, 5, 4)):
    return ForecastUnitKey(model, location, target, end, fc)


def quantile_forecast(values: dict, point=None, **key):
    return QuantileForecast(unit_key(**key), tuple(values.items()), point)


@pytest.fixture
def F_params():
    return F


@pytest.fixture
def G_params():
    return G


@pytest.fixture
def hub_F():
    return nb_quantiles(F)


@pytest.fixture
def hub_G():
    return nb_quantiles(G)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
