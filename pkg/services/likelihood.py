"""Minimizing negative quasi-log-likelihoods on unconstrained parameters."""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Sequence

import numpy as np
from scipy import optimize
from statsmodels.tools.numdiff import approx_hess

from core.exceptions import NumericalError
from core.models import Convergence

logger = logging.getLogger(__name__)

# returned by objectives for parameter vectors outside the admissible region
PENALTY = 1e10

Objective = Callable[[np.ndarray], float]

@dataclass(frozen=True)
class OptimizationOutcome:
    x: np.ndarray
    fun: float
    start_fun: float
    n_iter: int
    status: Convergence

def _guarded(objective: Objective) -> Objective:
    def wrapped(x: np.ndarray) -> float:
        with np.errstate(all="ignore"):
            value = objective(np.asarray(x, dtype=float))
        return float(value) if np.isfinite(value) else PENALTY

    return wrapped

def _round(f: Objective, x: np.ndarray, max_iter: int, rel_tol: float, scale: float):
    simplex = optimize.minimize(
        f,
        x,
        method="Nelder-Mead",
        options={
            "maxiter": max_iter,
            "maxfev": 4 * max_iter,
            "xatol": 1e-7,
            "fatol": rel_tol * scale,
            "adaptive": len(x) > 4,
        },
    )
    polish = optimize.minimize(f, simplex.x, method="BFGS", options={"maxiter": max_iter, "gtol": 1e-6})
    candidates = [(float(simplex.fun), simplex.x)]
    if np.isfinite(polish.fun):
        candidates.append((float(polish.fun), polish.x))
    fun, x_new = min(candidates, key=lambda c: c[0])
    return fun, np.asarray(x_new, dtype=float), int(simplex.nit + polish.nit)


def minimize_negloglik(
    objective: Objective,
    x0: Sequence[float],
    max_iter: int = 500,
    rel_tol: float = 1e-8,
    max_restarts: int = 20,
) -> OptimizationOutcome:
    """Nelder-Mead search followed by a BFGS polish, restarted from its own endpoint.

    Each round starts from the best point so far. Convergence is declared
    once a full round improves the objective by less than ``rel_tol`` in
    relative terms, so the flag describes the returned point. ``MAX_ITER``
    means ``max_restarts`` rounds ran out while the objective was still
    moving. The returned point never scores worse than ``x0``.
    """
    x0 = np.asarray(x0, dtype=float)
    f = _guarded(objective)
    start = f(x0)
    if start >= PENALTY:
        raise NumericalError("objective is not finite at the starting values")

    best_fun, best_x = start, x0
    n_iter = 0
    status = Convergence.MAX_ITER
    change = float("inf")
    for _ in range(max(max_restarts, 1)):
        fun, x, nit = _round(f, best_x, max_iter, rel_tol, max(abs(best_fun), 1.0))
        n_iter += nit
        change = max(best_fun - fun, 0.0) / max(abs(fun), 1.0)
        if fun < best_fun:
            best_fun, best_x = fun, x
        if change < rel_tol:
            status = Convergence.CONVERGED
            break
    else:
        logger.warning(
            "⚠️ Optimizer still improving after %d restarts (last relative change %.2e)", max_restarts, change
        )

    return OptimizationOutcome(
        x=best_x,
        fun=float(best_fun),
        start_fun=float(start),
        n_iter=n_iter,
        status=status,
    )


def hessian_std_errors(objective: Objective, x: Sequence[float], names: Sequence[str]) -> Dict[str, float]:
    """Plain inverse-Hessian standard errors of a negative log-likelihood.

    Entries whose variance is not positive come back as NaN.
    """
    x = np.asarray(x, dtype=float)
    f = _guarded(objective)
    try:
        hess = approx_hess(x, f)
        cov = np.linalg.inv(hess)
    except (np.linalg.LinAlgError, ValueError):
        logger.warning("⚠️ Hessian is singular; standard errors unavailable")
        return {name: float("nan") for name in names}
    diag = np.diag(cov)
    with np.errstate(invalid="ignore"):
        se = np.where(np.isfinite(diag) & (diag > 0), np.sqrt(np.abs(diag)), np.nan)
    return {name: float(v) for name, v in zip(names, se)}
