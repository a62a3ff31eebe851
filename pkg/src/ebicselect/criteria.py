"""Extended-BIC scoring, combinatorial model priors, and baseline selectors.

The criterion scored here is

    ebic = -2 * log_lik + |J| * log(n) + 2 * gamma * |J| * log(p)

with natural logarithms; gamma = 0 recovers the classical BIC.  The matching
model-space prior weights a size-k model by C(p, k)^(-gamma) truncated at a
size cap.  Baselines: K-fold cross-validation under predictive deviance and
a subsampled stability selector over lasso paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .errors import EmptyCandidates, NumericalError, UnconvergedFit, ValidationError
from .families import Dataset, SupportSet, cumulant
from .fitting import FitOptions, FittedModel, fit_mle
from .lasso import PathOptions, lasso_path

__all__ = [
    "ModelScore",
    "PriorSpec",
    "ebic_score",
    "log_model_prior",
    "select_best",
    "cross_validate",
    "stability_selection",
]


@dataclass(frozen=True)
class ModelScore:
    """EBIC value split into its likelihood and penalty parts."""

    support: SupportSet
    gamma: float
    log_lik: float
    penalty_n: float
    penalty_p: float

    @property
    def ebic(self) -> float:
        return -2.0 * self.log_lik + self.penalty_n + self.penalty_p


@dataclass(frozen=True)
class PriorSpec:
    """Combinatorial model prior: weight C(p,|J|)^(-gamma), sizes capped."""

    gamma: float
    q_cap: int

    def __post_init__(self) -> None:
        if self.gamma < 0:
            raise ValidationError("gamma must be nonnegative")
        if self.q_cap < 0:
            raise ValidationError("q_cap must be nonnegative")


def ebic_score(fit: FittedModel, n: int, p: int, gamma: float) -> ModelScore:
    """Score a converged fit; |J| excludes any intercept."""
    if not fit.converged:
        raise UnconvergedFit(f"cannot score failed fit on {fit.support.indices}: {fit.error}")
    if n < 1 or p < 1:
        raise ValidationError("n and p must be positive")
    if gamma < 0:
        raise ValidationError("gamma must be nonnegative")
    k = len(fit.support)
    return ModelScore(
        support=fit.support,
        gamma=gamma,
        log_lik=fit.log_lik,
        penalty_n=k * math.log(n),
        penalty_p=2.0 * gamma * k * math.log(p),
    )


def log_model_prior(p: int, j_size: int, spec: PriorSpec) -> float:
    """log of C(p, j_size)^(-gamma), or -inf past the size cap."""
    if j_size < 0 or j_size > p:
        raise ValidationError(f"j_size {j_size} out of range for p={p}")
    if j_size > spec.q_cap:
        return float("-inf")
    log_binom = gammaln(p + 1) - gammaln(j_size + 1) - gammaln(p - j_size + 1)
    return float(-spec.gamma * log_binom)


def _rank_key(score: ModelScore) -> tuple[float, int, tuple[int, ...]]:
    return (score.ebic, len(score.support), score.support.indices)


def select_best(scores: Sequence[ModelScore]) -> SupportSet:
    """Minimum-EBIC support; ties fall to the smaller then lexicographically
    earlier support, so the result is independent of input order."""
    if not scores:
        raise EmptyCandidates("no scored models to select from")
    return min(scores, key=_rank_key).support


def _predictive_deviance(
    train: Dataset, test_x: np.ndarray, test_y: np.ndarray, support: SupportSet, opts: FitOptions
) -> float:
    fit = fit_mle(train, support, opts)
    theta = test_x[:, support.as_array()] @ fit.coeffs
    if fit.intercept is not None:
        theta = theta + fit.intercept
    ll = float(test_y @ theta - np.sum(cumulant(train.family, theta)))
    return -ll / test_y.shape[0]


def cross_validate(
    data: Dataset,
    candidates: Sequence[SupportSet],
    k: int = 10,
    seed: int | Sequence[int] = 0,
    fit_opts: FitOptions = FitOptions(),
) -> SupportSet:
    """K-fold CV under mean predictive deviance.

    Folds are a seeded shuffle split into k nearly equal parts.  A failed
    fold fit contributes +inf to that candidate's average.  Ties use the
    select_best ordering.
    """
    if not candidates:
        raise EmptyCandidates("no candidate supports for cross-validation")
    if k < 2 or k > data.n:
        raise ValidationError(f"fold count {k} must lie in [2, n]")
    y = data.require_response()
    rng = np.random.default_rng(seed)
    order = rng.permutation(data.n)
    folds = np.array_split(order, k)
    losses = np.zeros(len(candidates))
    for fold in folds:
        mask = np.ones(data.n, dtype=bool)
        mask[fold] = False
        train = Dataset(data.x[mask], y[mask], data.family)
        test_x, test_y = data.x[fold], y[fold]
        for ci, support in enumerate(candidates):
            try:
                losses[ci] += _predictive_deviance(train, test_x, test_y, support, fit_opts)
            except NumericalError:
                losses[ci] = float("inf")
    ranked = sorted(
        range(len(candidates)),
        key=lambda ci: (losses[ci], len(candidates[ci]), candidates[ci].indices),
    )
    return candidates[ranked[0]]


def stability_selection(
    data: Dataset,
    expected_q: int,
    n_subsamples: int = 100,
    subsample_frac: float = 0.5,
    threshold: float = 0.6,
    seed: int | Sequence[int] = 0,
    path_opts: PathOptions = PathOptions(),
) -> SupportSet:
    """Subsampled selection frequencies of the first-q-entrants lasso rule.

    Each subsample solves a path on floor(frac * n) rows and records the
    support at the first penalty whose size reaches expected_q (or the last
    point when it never does).  Covariates selected in at least ``threshold``
    of the successful subsamples form the result; a threshold above 1 yields
    the empty support.
    """
    if expected_q < 0:
        raise ValidationError("expected_q must be nonnegative")
    if not 0.0 < subsample_frac <= 1.0:
        raise ValidationError("subsample_frac must lie in (0, 1]")
    if n_subsamples < 1:
        raise ValidationError("n_subsamples must be positive")
    y = data.require_response()
    m = max(1, int(math.floor(subsample_frac * data.n)))
    counts = np.zeros(data.p)
    successes = 0
    seed_base = list(seed) if isinstance(seed, (list, tuple)) else [seed]
    for i in range(n_subsamples):
        rng = np.random.default_rng(seed_base + [i])
        rows = rng.choice(data.n, size=m, replace=False)
        try:
            sub = Dataset(data.x[rows], y[rows], data.family)
            path = lasso_path(sub, path_opts)
        except NumericalError:
            continue
        if not path:
            continue
        chosen = path[-1].support
        for point in path:
            if len(point.support) >= expected_q:
                chosen = point.support
                break
        successes += 1
        for j in chosen:
            counts[j] += 1.0
    if successes == 0:
        return SupportSet.empty()
    freq = counts / successes
    return SupportSet.from_iterable(np.flatnonzero(freq >= threshold))
