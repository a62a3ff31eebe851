"""Restricted maximum-likelihood fits by damped Newton iteration.

The iteration maximizes the concave log-likelihood with a Cholesky-solved
Newton direction and a backtracking (halving) line search under the Armijo
condition.  A diverging coefficient norm is reported as separation rather
than ground along until overflow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import (
    DimensionMismatch,
    NotConverged,
    NumericalError,
    SeparationDetected,
    SingularHessian,
)
from .families import Dataset, SupportSet, cumulant, cumulant_derivs, hessian

__all__ = ["FitOptions", "FittedModel", "fit_mle", "refit_candidates"]

_ARMIJO = 1e-4
_MIN_STEP = 2.0 ** -40
# Near the optimum the predicted gain drops below the float resolution of
# the log likelihood; without this slack rounding noise stalls the line
# search above grad_tol.
_LL_SLACK = 1e-12
# Relative ridge added once when a Hessian Cholesky fails.
_RIDGE_SCALE = 1e-10


@dataclass(frozen=True)
class FitOptions:
    """Newton iteration controls."""

    grad_tol: float = 1e-8
    max_iter: int = 100
    max_coeff_norm: float = 30.0
    with_intercept: bool = False


@dataclass(frozen=True)
class FittedModel:
    """Restricted MLE and the quantities model scores need.

    ``hessian_at_mle`` covers the support coordinates only; the intercept,
    when fitted, is reported separately and never counts toward model size.
    Failed candidate fits are represented with ``converged=False`` and the
    failure message in ``error``.
    """

    support: SupportSet
    coeffs: np.ndarray
    intercept: float | None
    log_lik: float
    hessian_at_mle: np.ndarray
    converged: bool
    iterations: int
    error: str | None = None

    @property
    def size(self) -> int:
        return len(self.support)


def _solve_newton_direction(h: np.ndarray, s: np.ndarray) -> np.ndarray:
    try:
        return cho_solve(cho_factor(h, lower=True), s)
    except (LinAlgError, ValueError):
        tr = float(np.trace(h))
        ridge = _RIDGE_SCALE * (tr if tr > 0 else 1.0)
        try:
            return cho_solve(cho_factor(h + ridge * np.eye(h.shape[0]), lower=True), s)
        except (LinAlgError, ValueError) as exc:
            raise SingularHessian(
                f"Hessian not positive definite (dim {h.shape[0]})"
            ) from exc


def _newton(m: np.ndarray, y: np.ndarray, family, opts: FitOptions):
    """Maximize sum_i [y_i theta_i - b(theta_i)], theta = m @ beta."""
    n, k = m.shape
    beta = np.zeros(k)
    theta = np.zeros(n)
    ll = float(y @ theta - np.sum(cumulant(family, theta)))
    for it in range(opts.max_iter):
        mu, _, _ = cumulant_derivs(family, theta)
        s = m.T @ (y - mu)
        if np.max(np.abs(s), initial=0.0) <= opts.grad_tol:
            return beta, ll, it
        _, var, _ = cumulant_derivs(family, theta)
        h = (m * var[:, None]).T @ m
        direction = _solve_newton_direction(h, s)
        slope = float(s @ direction)
        slack = _LL_SLACK * (1.0 + abs(ll))
        step = 1.0
        while step >= _MIN_STEP:
            cand = beta + step * direction
            theta_cand = m @ cand
            ll_cand = float(y @ theta_cand - np.sum(cumulant(family, theta_cand)))
            if ll_cand >= ll + _ARMIJO * step * slope - slack:
                break
            step *= 0.5
        else:
            raise NotConverged("line search failed to find an ascent step")
        beta, theta, ll = cand, theta_cand, ll_cand
        if float(np.linalg.norm(beta)) > opts.max_coeff_norm:
            raise SeparationDetected(
                f"coefficient norm exceeded {opts.max_coeff_norm} during iteration"
            )
    raise NotConverged(f"no convergence within {opts.max_iter} Newton iterations")


def fit_mle(data: Dataset, support: SupportSet, opts: FitOptions = FitOptions()) -> FittedModel:
    """Fit the restricted MLE on the given support.

    Raises SeparationDetected, SingularHessian, or NotConverged on failure;
    use refit_candidates to get flagged results instead of exceptions.
    """
    y = data.require_response()
    if len(support) and support.indices[-1] >= data.p:
        raise DimensionMismatch(
            f"support index {support.indices[-1]} out of range for p={data.p}"
        )
    xj = data.x[:, support.as_array()]
    if opts.with_intercept:
        m = np.hstack([np.ones((data.n, 1)), xj])
    else:
        m = xj
    if m.shape[1] == 0:
        ll = float(-np.sum(cumulant(data.family, np.zeros(data.n))) + y @ np.zeros(data.n))
        return FittedModel(
            support=support,
            coeffs=np.zeros(0),
            intercept=None,
            log_lik=ll,
            hessian_at_mle=np.zeros((0, 0)),
            converged=True,
            iterations=0,
        )
    beta, ll, iterations = _newton(m, y, data.family, opts)
    if opts.with_intercept:
        intercept, coeffs = float(beta[0]), beta[1:]
    else:
        intercept, coeffs = None, beta
    h = hessian(data, support, coeffs, intercept or 0.0)
    return FittedModel(
        support=support,
        coeffs=coeffs,
        intercept=intercept,
        log_lik=ll,
        hessian_at_mle=h,
        converged=True,
        iterations=iterations,
    )


def refit_candidates(
    data: Dataset, candidates: Sequence[SupportSet], opts: FitOptions = FitOptions()
) -> list[FittedModel]:
    """Fit every candidate support, flagging failures instead of raising.

    Order follows the candidate list; a failed fit keeps its slot with
    ``converged=False`` and the error message recorded.
    """
    fits: list[FittedModel] = []
    for support in candidates:
        try:
            fits.append(fit_mle(data, support, opts))
        except NumericalError as exc:
            fits.append(
                FittedModel(
                    support=support,
                    coeffs=np.full(len(support), np.nan),
                    intercept=None,
                    log_lik=float("nan"),
                    hessian_at_mle=np.zeros((len(support), len(support))),
                    converged=False,
                    iterations=0,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
    return fits
