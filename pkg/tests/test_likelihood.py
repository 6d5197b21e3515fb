import numpy as np
import pytest
from scipy import optimize

from core.exceptions import NumericalError
from core.models import ArmaGarchSpec, Convergence
from services import ts_filter
from services.likelihood import minimize_negloglik

ROSENBROCK_START = [-1.2, 1.0]


class TestMinimizeNegloglik:
    def test_restarts_until_the_point_stops_moving(self):
        outcome = minimize_negloglik(optimize.rosen, ROSENBROCK_START, max_iter=50, max_restarts=200)
        assert outcome.status is Convergence.CONVERGED
        np.testing.assert_allclose(outcome.x, [1.0, 1.0], atol=1e-3)
        assert outcome.fun <= outcome.start_fun

    def test_budget_stop_is_reported(self):
        outcome = minimize_negloglik(optimize.rosen, ROSENBROCK_START, max_iter=2, max_restarts=1)
        assert outcome.status is Convergence.MAX_ITER
        assert outcome.fun < outcome.start_fun

    def test_start_at_minimum(self):
        outcome = minimize_negloglik(lambda x: float(np.sum((x - 1.0) ** 2)), np.ones(3))
        assert outcome.status is Convergence.CONVERGED
        assert outcome.fun == 0.0
        np.testing.assert_array_equal(outcome.x, np.ones(3))

    def test_non_finite_start(self):
        with pytest.raises(NumericalError):
            minimize_negloglik(lambda x: float("nan"), [0.0, 0.0])


def test_selection_keeps_slow_converging_fits(decomposed):
    y = ts_filter.sqrt_transform(decomposed.pmg)
    grid = [ArmaGarchSpec(l=1, m=1, p=0, q=0), ArmaGarchSpec(l=2, m=2, p=0, q=0)]
    fits = [ts_filter.fit(y, spec, std_errors=False) for spec in grid]
    assert all(f.convergence is Convergence.CONVERGED for f in fits)
    assert all(ts_filter.perturbation_check(f, y) <= 1e-4 for f in fits)
    chosen = ts_filter.select(y, grid)
    assert chosen.aic == pytest.approx(min(f.aic for f in fits))
