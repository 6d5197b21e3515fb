import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from core.exceptions import DataError, InsufficientHistoryError, NumericalError
from core.models import ArmaGarchSpec, Convergence
from services import desc_stats, simulate, ts_filter

ARMA11 = ArmaGarchSpec(l=1, m=1, p=0, q=0)
ARMA11_GARCH = ArmaGarchSpec(l=1, m=1, p=1, q=1)
WHITE_NOISE = ArmaGarchSpec(l=0, m=0, p=0, q=0)


@pytest.fixture(scope="module")
def arma_series():
    return simulate.simulate_arma_garch(800, mu=0.2, ar=[0.6], ma=[-0.3], omega=1.0, seed=11)


@pytest.fixture(scope="module")
def arma_fit(arma_series):
    return ts_filter.fit(arma_series, ARMA11)


@pytest.fixture(scope="module")
def garch_fit():
    y = simulate.simulate_arma_garch(
        1500, mu=0.0, ar=[0.5], ma=[-0.2], omega=0.05, arch_coef=0.1, garch_coef=0.8, seed=5
    )
    return ts_filter.fit(y, ARMA11_GARCH)


def test_sqrt_transform():
    np.testing.assert_allclose(ts_filter.sqrt_transform(np.array([0.0, 0.04, 0.09])), [0.0, 0.2, 0.3])
    np.testing.assert_array_equal(ts_filter.sqrt_transform(np.zeros(3)), np.zeros(3))
    with pytest.raises(DataError):
        ts_filter.sqrt_transform(np.array([0.1, -0.01]))


def test_default_grid():
    grid = ts_filter.default_grid()
    assert len(grid) == 8
    assert {spec.key for spec in grid} == {
        (l, m, p, p) for l in (1, 2) for m in (1, 2) for p in (0, 1)
    }


class TestRecursions:
    def test_mean_residuals_match_loop(self, rng):
        y = rng.normal(size=40)
        mu, ar, ma = 0.1, [0.4, -0.2], [0.3, 0.1]
        ybar = y.mean()
        expected = np.zeros(len(y))
        for t in range(len(y)):
            value = y[t] - mu
            for i, phi in enumerate(ar, start=1):
                value -= phi * (y[t - i] if t - i >= 0 else ybar)
            for j, theta in enumerate(ma, start=1):
                value -= theta * (expected[t - j] if t - j >= 0 else 0.0)
            expected[t] = value
        np.testing.assert_allclose(ts_filter.mean_residuals(y, mu, ar, ma, ybar), expected, atol=1e-12)

    def test_garch_variance_matches_loop(self, rng):
        e = rng.normal(size=30)
        omega, arch_coef, garch_coef, presample = 0.1, 0.08, 0.85, 1.3
        expected = np.zeros(len(e))
        previous = presample
        for t in range(len(e)):
            shock = e[t - 1] ** 2 if t > 0 else 0.0
            previous = omega + arch_coef * shock + garch_coef * previous
            expected[t] = previous
        np.testing.assert_allclose(
            ts_filter.garch_variance(e, omega, arch_coef, garch_coef, presample), expected, atol=1e-12
        )


class TestFit:
    def test_white_noise_model(self, rng):
        y = rng.normal(0.5, 2.0, size=1000)
        fitted = ts_filter.fit(y, WHITE_NOISE)
        assert fitted.mu == pytest.approx(y.mean(), abs=1e-4)
        assert fitted.omega == pytest.approx(np.var(y), rel=1e-4)
        assert fitted.convergence is not Convergence.MAX_ITER
        assert (fitted.arch_coef, fitted.garch_coef) == (0.0, 0.0)

    def test_white_noise_filter_is_standardization(self, rng):
        y = pd.Series(rng.normal(size=300), index=pd.period_range("1990-01", periods=300, freq="M"))
        filtered = ts_filter.filtered(ts_filter.fit(y, WHITE_NOISE))
        pd.testing.assert_series_equal(filtered, desc_stats.standardize(y).rename(filtered.name), atol=1e-8)

    def test_likelihood_never_below_start(self, arma_fit, garch_fit):
        for fitted in (arma_fit, garch_fit):
            assert fitted.log_likelihood >= fitted.start_log_likelihood - 1e-9

    def test_estimates_are_local_maximum(self, arma_fit, arma_series):
        assert ts_filter.perturbation_check(arma_fit, arma_series) <= 1e-3

    def test_admissible_estimates(self, arma_fit, garch_fit):
        assert abs(arma_fit.ar[0]) < 1 and abs(arma_fit.ma[0]) < 1
        assert arma_fit.ar[0] == pytest.approx(0.6, abs=0.3)
        assert garch_fit.omega > 0
        assert garch_fit.arch_coef >= 0 and garch_fit.garch_coef >= 0
        assert garch_fit.persistence < 1

    def test_information_criteria(self, arma_fit, arma_series):
        assert arma_fit.aic == pytest.approx(-2 * arma_fit.log_likelihood + 2 * ARMA11.n_params)
        centred = arma_series - arma_series.mean()
        expected = 1 - np.sum(arma_fit.residuals.to_numpy() ** 2) / np.sum(centred**2)
        assert arma_fit.r_squared == pytest.approx(expected)

    def test_std_errors_cover_parameters(self, garch_fit):
        assert set(garch_fit.std_errors) == {"mu", "ar1", "ma1", "omega", "arch1", "garch1"}
        assert np.isfinite(garch_fit.std_errors["ar1"]) and garch_fit.std_errors["ar1"] > 0

    def test_index_preserved(self, arma_series):
        index = pd.period_range("1950-02", periods=len(arma_series), freq="M")
        fitted = ts_filter.fit(pd.Series(arma_series, index=index), ARMA11, std_errors=False)
        assert fitted.standardized_residuals.index.equals(index)
        assert fitted.std_errors == {}

    def test_short_series(self):
        with pytest.raises(InsufficientHistoryError):
            ts_filter.fit(np.arange(20, dtype=float), ARMA11)

    def test_constant_series(self):
        with pytest.raises(NumericalError):
            ts_filter.fit(np.ones(100), ARMA11)


class TestSelect:
    def test_singleton_grid(self, arma_series, arma_fit):
        chosen = ts_filter.select(arma_series, [ARMA11])
        assert chosen.spec == ARMA11
        assert chosen.log_likelihood == pytest.approx(arma_fit.log_likelihood)

    def test_minimum_aic(self, arma_series):
        grid = [ARMA11, ArmaGarchSpec(l=2, m=2, p=0, q=0)]
        chosen = ts_filter.select(arma_series, grid)
        fits = [ts_filter.fit(arma_series, spec) for spec in grid]
        eligible = [f.aic for f in fits if f.convergence is not Convergence.MAX_ITER]
        assert chosen.aic == pytest.approx(min(eligible))

    def test_threaded_grid_agrees(self, arma_series):
        grid = [ARMA11, ArmaGarchSpec(l=2, m=1, p=0, q=0)]
        serial = ts_filter.select(arma_series, grid, workers=1)
        threaded = ts_filter.select(arma_series, grid, workers=2)
        assert threaded.spec == serial.spec
        assert threaded.aic == pytest.approx(serial.aic)

    def test_empty_grid(self, arma_series):
        with pytest.raises(DataError):
            ts_filter.select(arma_series, [])


def test_filtered_is_standardized(garch_fit):
    z = ts_filter.filtered(garch_fit)
    assert z.mean() == pytest.approx(0.0, abs=1e-10)
    assert z.std(ddof=1) == pytest.approx(1.0, abs=1e-10)


class TestFitReport:
    def test_garch_labels(self, garch_fit):
        report = ts_filter.fit_report(garch_fit)
        assert report.index.tolist() == [
            "C", "AR(1)", "MA(1)", "Constant (variance)", "ARCH(1)", "GARCH(1)", "LogL", "AIC", "R²",
        ]
        assert report.loc["GARCH(1)", "symbol"] == "α1"
        assert report.loc["ARCH(1)", "symbol"] == "β1"
        assert report.loc["GARCH(1)", "estimate"] == garch_fit.garch_coef
        assert report.attrs["model"] == "ARMA(1,1)-GARCH(1,1)"

    def test_t_statistics(self, arma_fit):
        report = ts_filter.fit_report(arma_fit)
        row = report.loc["AR(1)"]
        assert row["t_stat"] == pytest.approx(row["estimate"] / row["std_error"])
        assert "Variance" in report.index
        assert np.isnan(report.loc["AIC", "std_error"])


def test_spec_orders_validated():
    with pytest.raises(ValidationError):
        ArmaGarchSpec(l=1, m=1, p=0, q=1)


@pytest.mark.slow
def test_garch_parameters_recovered():
    frame = simulate.garch_recovery(sims=50, n=5000, seed=0)
    truth = frame.attrs["truth"]
    for name in ("ar1", "ma1", "arch1", "garch1"):
        close = (frame[name] - truth[name]).abs() <= 0.05
        assert close.mean() >= 0.9, name
    # omega judged against the unconditional variance it scales
    scale = truth["omega"] / (1 - truth["arch1"] - truth["garch1"])
    assert ((frame["omega"] - truth["omega"]).abs() <= 0.1 * scale).mean() >= 0.9
    assert (frame["perturbation_gain"] <= 0).all()
    assert (frame["convergence"] != Convergence.MAX_ITER.value).all()


@pytest.mark.slow
def test_true_spec_selected_in_majority():
    grid = [ARMA11_GARCH, ArmaGarchSpec(l=2, m=2, p=1, q=1)]
    hits = 0
    for seed in range(10):
        y = simulate.simulate_arma_garch(
            3000, ar=[0.9], ma=[-0.5], omega=1e-4, arch_coef=0.08, garch_coef=0.85, seed=seed
        )
        hits += ts_filter.select(y, grid).spec == ARMA11_GARCH
    assert hits > 5


@pytest.mark.slow
def test_correct_filter_whitens_ar_data():
    spec = ArmaGarchSpec(l=1, m=0, p=0, q=0)
    whitened = 0
    for seed in range(20):
        y = simulate.simulate_arma_garch(600, ar=[0.7], omega=1.0, seed=seed)
        z = ts_filter.filtered(ts_filter.fit(y, spec, std_errors=False))
        rho = desc_stats.summarize(z, acf_lags=[1], q_lag=1).acf[1]
        whitened += abs(rho) < 2 / np.sqrt(len(z))
    assert whitened >= 18


@pytest.mark.slow
def test_correct_filter_passes_ljung_box():
    spec = ArmaGarchSpec(l=1, m=0, p=0, q=0)
    passed = 0
    for seed in range(100):
        y = simulate.simulate_arma_garch(600, ar=[0.7], omega=1.0, seed=seed)
        z = ts_filter.filtered(ts_filter.fit(y, spec, std_errors=False))
        passed += desc_stats.summarize(z, acf_lags=[1], q_lag=12).ljung_box_pvalue > 0.05
    assert passed >= 90
