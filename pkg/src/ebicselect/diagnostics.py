"""Empirical checks of the regularity quantities that selection relies on.

These estimate, on a concrete dataset, the constants a consistency argument
treats as assumptions: curvature bounds (smallest and largest eigenvalues
of H/n over supports and a coefficient ball, plus a Hessian Lipschitz
constant), the whitened-score norm against its high-probability bound, the
radius of restricted MLEs, and a likelihood-drop lower bound away from the
truth.  A Nadaraya-Watson smoother for selection-frequency curves rounds
out the reporting helpers.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigvalsh, LinAlgError
from scipy.special import ndtri
from scipy.stats import qmc

from .errors import (
    LengthMismatch,
    NumericalError,
    SingularHessian,
    ValidationError,
)
from .families import Dataset, SupportSet, hessian, log_likelihood, score
from .fitting import FitOptions, fit_mle

__all__ = [
    "WhpReport",
    "score_bound_check",
    "hessian_spectrum_scan",
    "quadratic_bound_check",
    "mle_radius_check",
    "smoothed_selection_curve",
]

_POWER_TOL = 1e-8
_POWER_MAX_ITER = 10_000
_UNDERFLOW = 1e-300


@dataclass(frozen=True)
class WhpReport:
    """Summary of the empirical regularity checks on one dataset."""

    score_norm_max: float
    score_bound: float
    mle_radius_max: float
    lambda1_hat: float
    lambda2_hat: float
    lambda3_hat: float
    quad_bound_violations: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _log_rate(n: int, p: int, alpha: float, beta: float) -> float:
    """log(n^alpha * p^(1+beta))."""
    return alpha * math.log(n) + (1.0 + beta) * math.log(p)


def score_bound_check(
    data: Dataset,
    true_support: SupportSet,
    true_coeffs: np.ndarray,
    supersets: Sequence[SupportSet],
    alpha: float = 1.0,
    beta: float = 1.0,
) -> list[tuple[float, float]]:
    """Whitened score norms at the truth against their tail bound.

    For each superset J of the true support, the left side is
    ||H_J(phi*)^{-1/2} s_J(phi*)||_2 (the square root of the classical score
    statistic) and the right side is
    sqrt(2 |J \\ J*| log(n^alpha p^(1+beta))).
    """
    phi = np.asarray(true_coeffs, dtype=float)
    if phi.shape != (data.p,):
        raise LengthMismatch(f"true_coeffs must have length p={data.p}")
    if np.any(phi[[j for j in range(data.p) if j not in true_support]] != 0.0):
        raise ValidationError("true_coeffs must vanish off the true support")
    out: list[tuple[float, float]] = []
    for superset in supersets:
        if not true_support.issubset(superset) or len(superset) == len(true_support):
            raise ValidationError(
                f"superset {superset.indices} must strictly contain the true support"
            )
        coeffs = phi[superset.as_array()]
        s = score(data, superset, coeffs)
        h = hessian(data, superset, coeffs)
        try:
            lhs_sq = float(s @ cho_solve(cho_factor(h, lower=True), s))
        except (LinAlgError, ValueError) as exc:
            raise SingularHessian(
                f"Hessian singular on superset {superset.indices}"
            ) from exc
        extra = len(superset) - len(true_support)
        rhs = math.sqrt(2.0 * extra * _log_rate(data.n, data.p, alpha, beta))
        out.append((math.sqrt(max(lhs_sq, 0.0)), rhs))
    return out


def _spectral_norm(a: np.ndarray, seed: int = 0) -> float:
    """Power iteration for the spectral norm of a symmetric matrix."""
    d = a.shape[0]
    if d == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    prev = 0.0
    for _ in range(_POWER_MAX_ITER):
        w = a @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(norm - prev) <= _POWER_TOL * max(1.0, norm):
            return norm
        prev = norm
    return prev


def _halton_ball(dim: int, radius: float, count: int) -> np.ndarray:
    """Deterministic low-discrepancy points in the L2 ball of given radius.

    Halton points in [0,1]^(dim+1) are mapped to directions through the
    normal inverse CDF and to radii through the u^(1/dim) volume transform.
    """
    sampler = qmc.Halton(d=dim + 1, scramble=False)
    sampler.fast_forward(1)  # skip the origin-heavy first point
    u = sampler.random(count)
    direction = ndtri(np.clip(u[:, :dim], 1e-12, 1.0 - 1e-12))
    norms = np.linalg.norm(direction, axis=1)
    norms = np.where(norms > 0, norms, 1.0)
    r = radius * u[:, dim] ** (1.0 / dim)
    return direction / norms[:, None] * r[:, None]


def hessian_spectrum_scan(
    data: Dataset,
    supports: Sequence[SupportSet],
    radius: float = 2.0,
    grid_size: int = 64,
) -> tuple[float, float, float]:
    """Empirical (lambda1, lambda2, lambda3) over supports and a ball.

    lambda1/lambda2 are the extreme eigenvalues of H_J(phi)/n over every
    support and grid point; lambda3 is the largest observed
    ||H(phi) - H(phi')||_2 / (n ||phi - phi'||_2) over consecutive grid
    pairs, a Lipschitz estimate.  Exact for the gaussian family, where the
    Hessian is constant and lambda3 is 0.
    """
    if not supports:
        raise ValidationError("need at least one support to scan")
    if radius <= 0 or grid_size < 2:
        raise ValidationError("radius must be positive and grid_size >= 2")
    lam1 = math.inf
    lam2 = -math.inf
    lam3 = 0.0
    for support in supports:
        d = len(support)
        if d == 0:
            continue
        points = _halton_ball(d, radius, grid_size)
        prev_h = None
        prev_phi = None
        for phi in points:
            h = hessian(data, support, phi) / data.n
            evals = eigvalsh(h)
            lam1 = min(lam1, float(evals[0]))
            lam2 = max(lam2, float(evals[-1]))
            if prev_h is not None:
                gap = float(np.linalg.norm(phi - prev_phi))
                if gap > 0:
                    lam3 = max(lam3, _spectral_norm(h - prev_h) / gap)
            prev_h, prev_phi = h, phi
    if not math.isfinite(lam1):
        raise ValidationError("every support was empty; nothing to scan")
    return lam1, lam2, lam3


def quadratic_bound_check(
    data: Dataset,
    true_coeffs: np.ndarray,
    supports: Sequence[SupportSet],
    directions_per_support: int,
    tau_hat: float,
    alpha: float = 1.0,
    beta: float = 1.0,
    lambda1_hat: float | None = None,
    seed: int = 0,
) -> int:
    """Count violations of the likelihood-drop lower bound.

    For random directions psi on each support with magnitudes in (0, 2],
    checks log L(phi* + psi) - log L(phi*) against
    -(lambda1 n / 2) ||psi|| (min(1, ||psi||) - tau sqrt(log(n^a p^(1+b))/n)).
    lambda1_hat defaults to the smallest eigenvalue of H/n at phi* over the
    given supports.
    """
    phi_star = np.asarray(true_coeffs, dtype=float)
    if phi_star.shape != (data.p,):
        raise LengthMismatch(f"true_coeffs must have length p={data.p}")
    if directions_per_support < 1:
        raise ValidationError("directions_per_support must be positive")
    base = SupportSet.from_iterable(np.flatnonzero(phi_star))
    if lambda1_hat is None:
        lam = math.inf
        for support in supports:
            if len(support) == 0:
                continue
            h = hessian(data, support, phi_star[support.as_array()]) / data.n
            lam = min(lam, float(eigvalsh(h)[0]))
        lambda1_hat = lam if math.isfinite(lam) else 0.0
    rate = math.sqrt(_log_rate(data.n, data.p, alpha, beta) / data.n)
    ll_star_cache: dict[tuple[int, ...], float] = {}
    rng = np.random.default_rng(seed)
    violations = 0
    for support in supports:
        d = len(support)
        if d == 0:
            continue
        eval_support = support.union(base)
        key = eval_support.indices
        if key not in ll_star_cache:
            ll_star_cache[key] = log_likelihood(
                data, eval_support, phi_star[eval_support.as_array()]
            )
        ll_star = ll_star_cache[key]
        pos = {j: i for i, j in enumerate(eval_support)}
        for _ in range(directions_per_support):
            direction = rng.standard_normal(d)
            direction /= np.linalg.norm(direction)
            magnitude = rng.uniform(0.0, 2.0)
            if magnitude == 0.0:
                magnitude = 2.0
            psi = magnitude * direction
            coeffs = phi_star[eval_support.as_array()].copy()
            for i, j in enumerate(support):
                coeffs[pos[j]] += psi[i]
            lhs = log_likelihood(data, eval_support, coeffs) - ll_star
            norm = float(np.linalg.norm(psi))
            rhs = (
                -0.5
                * lambda1_hat
                * data.n
                * norm
                * (min(1.0, norm) - tau_hat * rate)
            )
            if lhs > rhs + 1e-12:
                violations += 1
    return violations


def mle_radius_check(
    data: Dataset,
    supports: Sequence[SupportSet],
    opts: FitOptions = FitOptions(),
) -> float:
    """Largest L2 norm of the restricted MLEs over the given supports.

    Failed fits are excluded; their count is reported through a warning.
    The empty list of supports (or all-failed fits) yields 0.
    """
    radius = 0.0
    failures = 0
    for support in supports:
        try:
            fit = fit_mle(data, support, opts)
        except NumericalError:
            failures += 1
            continue
        radius = max(radius, float(np.linalg.norm(fit.coeffs)))
    if failures:
        warnings.warn(
            f"{failures} of {len(supports)} restricted fits failed and were excluded",
            RuntimeWarning,
            stacklevel=2,
        )
    return radius


def smoothed_selection_curve(
    values: np.ndarray,
    selected: np.ndarray,
    bandwidth: float,
    query_points: np.ndarray,
) -> np.ndarray:
    """Gaussian-kernel Nadaraya-Watson smoothing of selection indicators.

    Returns the smoothed frequency at each query point, always within
    [0, 1].  Query points whose kernel mass underflows get 0 and trigger a
    warning.
    """
    v = np.asarray(values, dtype=float)
    s = np.asarray(selected, dtype=float)
    q = np.asarray(query_points, dtype=float)
    if v.ndim != 1 or v.shape != s.shape:
        raise LengthMismatch("values and selected must be equal-length vectors")
    if v.shape[0] == 0:
        raise ValidationError("need at least one observation to smooth")
    if bandwidth <= 0:
        raise ValidationError("bandwidth must be positive")
    if np.any((s != 0.0) & (s != 1.0)):
        raise ValidationError("selected must be 0/1 indicators")
    z = (q[:, None] - v[None, :]) / bandwidth
    weights = np.exp(-0.5 * z * z)
    denom = weights.sum(axis=1)
    dead = denom < _UNDERFLOW
    if np.any(dead):
        warnings.warn(
            f"{int(np.sum(dead))} query points had vanishing kernel mass; returning 0 there",
            RuntimeWarning,
            stacklevel=2,
        )
    num = weights @ s
    out = np.where(dead, 0.0, num / np.where(dead, 1.0, denom))
    return np.clip(out, 0.0, 1.0)
