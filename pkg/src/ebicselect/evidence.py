"""Laplace and quadrature approximations to the model evidence.

For a support J with restricted MLE phi_hat and likelihood Hessian H, the
Laplace approximation to the (unnormalized) posterior mass of J is

    log m(J) = log P(J) + l(phi_hat) + log f(phi_hat)
               - (1/2) log det H + (|J|/2) log 2pi,

the quantity that pairs with -ebic/2 when gamma matches on both sides.  The
quadrature oracle evaluates the same integral by adaptive tensor-product
Gauss-Hermite rules centered and scaled at (phi_hat, H^{-1/2}), feasible for
|J| <= 3.  A posterior-mode variant expands around the maximizer of
likelihood times prior instead; for the gaussian family with a gaussian
prior it reproduces the conjugate closed form exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular, LinAlgError
from scipy.special import gammaln, logsumexp
from numpy.polynomial.hermite import hermgauss

from .errors import (
    DimensionTooLarge,
    EmptyCandidates,
    NumericalError,
    QuadratureNotConverged,
    SingularHessian,
    UnconvergedFit,
    ValidationError,
)
from .families import Dataset, SupportSet, cumulant, hessian, score
from .fitting import FitOptions, FittedModel, fit_mle
from .criteria import ModelScore, PriorSpec, ebic_score, log_model_prior, select_best

__all__ = [
    "GaussianPrior",
    "UniformBallPrior",
    "BayesScore",
    "QuadratureOptions",
    "laplace_log_marginal",
    "posterior_laplace_log_marginal",
    "quadrature_log_marginal",
    "region_decomposition",
    "EquivalenceReport",
    "equivalence_report",
]


@dataclass(frozen=True)
class GaussianPrior:
    """Isotropic mean-zero gaussian coefficient prior.

    ``log_scale`` multiplies the density by a constant (useful for testing
    evidence identities with unnormalized priors); the default is a proper
    density.
    """

    sigma: float = 10.0
    log_scale: float = 0.0

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValidationError("sigma must be positive")

    def logpdf(self, phi: np.ndarray) -> float:
        phi = np.asarray(phi, dtype=float)
        d = phi.shape[-1] if phi.ndim else 0
        if d == 0:
            return self.log_scale
        return float(
            -0.5 * d * math.log(2.0 * math.pi * self.sigma**2)
            - float(phi @ phi) / (2.0 * self.sigma**2)
            + self.log_scale
        )

    def logpdf_batch(self, phi: np.ndarray) -> np.ndarray:
        d = phi.shape[1]
        sq = np.einsum("ij,ij->i", phi, phi)
        return (
            -0.5 * d * math.log(2.0 * math.pi * self.sigma**2)
            - sq / (2.0 * self.sigma**2)
            + self.log_scale
        )

    def curvature(self, dim: int) -> np.ndarray:
        """Negative Hessian of logpdf (constant for a gaussian)."""
        return np.eye(dim) / self.sigma**2

    def grad_logpdf(self, phi: np.ndarray) -> np.ndarray:
        return -np.asarray(phi, dtype=float) / self.sigma**2

    # Envelope constants over a ball of the given radius: sup f, inf f,
    # and a Lipschitz bound sup ||grad f||.
    def density_bounds(self, dim: int, radius: float) -> tuple[float, float, float]:
        f1 = (2.0 * math.pi * self.sigma**2) ** (-0.5 * dim) * math.exp(self.log_scale)
        f2 = f1 * math.exp(-(radius**2) / (2.0 * self.sigma**2))
        f3 = f1 * radius / self.sigma**2
        return f1, f2, f3


def _log_ball_volume(dim: int, radius: float) -> float:
    return 0.5 * dim * math.log(math.pi) + dim * math.log(radius) - gammaln(0.5 * dim + 1.0)


@dataclass(frozen=True)
class UniformBallPrior:
    """Uniform coefficient prior on a centered L2 ball.

    The radius must comfortably contain every restricted MLE it will be
    used with; pass the largest fitted norm (e.g. from a diagnostics radius
    check) as ``mle_radius_estimate`` to enforce radius > estimate + 1 at
    construction.
    """

    radius: float
    log_scale: float = 0.0
    mle_radius_estimate: float | None = None

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValidationError("radius must be positive")
        if self.mle_radius_estimate is not None and self.radius <= self.mle_radius_estimate + 1.0:
            raise ValidationError(
                f"ball radius {self.radius} must exceed the fitted-norm estimate "
                f"{self.mle_radius_estimate} by more than 1"
            )

    def logpdf(self, phi: np.ndarray) -> float:
        phi = np.asarray(phi, dtype=float)
        d = phi.shape[-1] if phi.ndim else 0
        if d == 0:
            return self.log_scale
        if float(np.linalg.norm(phi)) > self.radius:
            return float("-inf")
        return -_log_ball_volume(d, self.radius) + self.log_scale

    def logpdf_batch(self, phi: np.ndarray) -> np.ndarray:
        d = phi.shape[1]
        norms = np.sqrt(np.einsum("ij,ij->i", phi, phi))
        inside = -_log_ball_volume(d, self.radius) + self.log_scale
        return np.where(norms <= self.radius, inside, -np.inf)

    def curvature(self, dim: int) -> np.ndarray:
        return np.zeros((dim, dim))

    def grad_logpdf(self, phi: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(phi, dtype=float))


@dataclass(frozen=True)
class BayesScore:
    """Laplace evidence with its additive components.

    components = (log_lik, log_f_at_mle, neg_half_logdet_h, half_dim_log_2pi)
    and log_marginal_laplace equals their sum plus log_prior_model.
    """

    support: SupportSet
    log_marginal_laplace: float
    log_prior_model: float
    components: tuple[float, float, float, float]


def _half_logdet(h: np.ndarray) -> float:
    if h.shape[0] == 0:
        return 0.0
    try:
        c, _ = cho_factor(h, lower=True)
    except (LinAlgError, ValueError) as exc:
        raise SingularHessian("Hessian at the MLE is not positive definite") from exc
    return float(np.sum(np.log(np.diag(c))))


def laplace_log_marginal(fit: FittedModel, prior, model_log_prior: float) -> BayesScore:
    """Evidence from a second-order expansion at the restricted MLE."""
    if not fit.converged:
        raise UnconvergedFit(f"cannot score failed fit on {fit.support.indices}: {fit.error}")
    d = len(fit.support)
    if d == 0:
        comps = (fit.log_lik, prior.logpdf(np.zeros(0)), 0.0, 0.0)
    else:
        comps = (
            fit.log_lik,
            prior.logpdf(fit.coeffs),
            -_half_logdet(fit.hessian_at_mle),
            0.5 * d * math.log(2.0 * math.pi),
        )
    total = sum(comps) + model_log_prior
    return BayesScore(
        support=fit.support,
        log_marginal_laplace=total,
        log_prior_model=model_log_prior,
        components=comps,
    )


def posterior_laplace_log_marginal(
    data: Dataset,
    support: SupportSet,
    prior,
    model_log_prior: float,
    fit_opts: FitOptions = FitOptions(),
) -> BayesScore:
    """Evidence expanded at the mode of likelihood times prior.

    The Hessian used is the likelihood Hessian plus the prior curvature, so
    for an exactly quadratic log-likelihood and gaussian prior the result is
    the conjugate closed form, not an approximation.
    """
    y = data.require_response()
    d = len(support)
    if d == 0:
        fit = fit_mle(data, support, FitOptions())
        comps = (fit.log_lik, prior.logpdf(np.zeros(0)), 0.0, 0.0)
        return BayesScore(support, sum(comps) + model_log_prior, model_log_prior, comps)
    xj = data.x[:, support.as_array()]

    def objective(v: np.ndarray) -> float:
        th = xj @ v
        return float(y @ th - np.sum(cumulant(data.family, th))) + prior.logpdf(v)

    phi = np.zeros(d)
    val = objective(phi)
    converged = False
    for _ in range(fit_opts.max_iter):
        g = score(data, support, phi) + prior.grad_logpdf(phi)
        if float(np.max(np.abs(g))) <= fit_opts.grad_tol:
            converged = True
            break
        h = hessian(data, support, phi) + prior.curvature(d)
        try:
            direction = cho_solve(cho_factor(h, lower=True), g)
        except (LinAlgError, ValueError) as exc:
            raise SingularHessian("penalized Hessian not positive definite") from exc
        step = 1.0
        while step >= 2.0**-40:
            cand = phi + step * direction
            cand_val = objective(cand)
            if cand_val >= val + 1e-4 * step * float(g @ direction):
                break
            step *= 0.5
        else:
            raise NumericalError("posterior mode line search failed")
        phi, val = cand, cand_val
    if not converged:
        raise NumericalError("posterior mode search did not converge")
    theta = xj @ phi
    ll = float(y @ theta - np.sum(cumulant(data.family, theta)))
    h_total = hessian(data, support, phi) + prior.curvature(d)
    comps = (
        ll,
        prior.logpdf(phi),
        -_half_logdet(h_total),
        0.5 * d * math.log(2.0 * math.pi),
    )
    return BayesScore(support, sum(comps) + model_log_prior, model_log_prior, comps)


@dataclass(frozen=True)
class QuadratureOptions:
    """Adaptive Gauss-Hermite controls."""

    base_nodes: int = 40
    max_nodes: int = 320
    rel_tol: float = 1e-6
    chunk: int = 4096


def _gh_log_integral(
    data: Dataset,
    fit: FittedModel,
    prior,
    m: int,
    opts: QuadratureOptions,
    log_np_regions: tuple[float, float] | None = None,
) -> float | tuple[float, float, float]:
    """Gauss-Hermite log of integral L(phi) f(phi) dphi at m nodes per axis.

    With region radii supplied, returns the log integral split over the
    three balls ||H^{1/2}(phi - phi_hat)|| <= r1, <= r2, and beyond.
    """
    y = data.require_response()
    d = len(fit.support)
    xj = data.x[:, fit.support.as_array()]
    try:
        chol = np.linalg.cholesky(fit.hessian_at_mle)
    except np.linalg.LinAlgError as exc:
        raise SingularHessian("Hessian at the MLE is not positive definite") from exc
    log_det_half = float(np.sum(np.log(np.diag(chol))))
    nodes, weights = hermgauss(m)
    log_w = np.log(weights)
    total = m**d
    pieces: list[np.ndarray] = []
    radii: list[np.ndarray] = []
    idx = np.arange(total)
    for start in range(0, total, opts.chunk):
        sel = idx[start : start + opts.chunk]
        digits = np.empty((sel.shape[0], d), dtype=np.intp)
        rem = sel.copy()
        for axis in range(d):
            digits[:, axis] = rem % m
            rem //= m
        u = nodes[digits]
        lw = np.sum(log_w[digits], axis=1)
        # phi = phi_hat + sqrt(2) * L^{-T} u
        shift = solve_triangular(chol, u.T, lower=True, trans="T").T
        phi = fit.coeffs[None, :] + math.sqrt(2.0) * shift
        theta = xj @ phi.T
        ll = y @ theta - np.sum(cumulant(data.family, theta), axis=0)
        lf = prior.logpdf_batch(phi)
        usq = np.einsum("ij,ij->i", u, u)
        contrib = lw + ll + lf + usq
        pieces.append(contrib)
        if log_np_regions is not None:
            # ||H^{1/2}(phi - phi_hat)|| = sqrt(2) ||u||
            radii.append(np.sqrt(2.0 * usq))
    const = 0.5 * d * math.log(2.0) - log_det_half
    all_contrib = np.concatenate(pieces)
    if log_np_regions is None:
        return float(logsumexp(all_contrib) + const)
    rad = np.concatenate(radii)
    r1, r2 = log_np_regions
    masks = (rad <= r1, (rad > r1) & (rad <= r2), rad > r2)
    out = []
    for mask in masks:
        if np.any(mask):
            out.append(float(logsumexp(all_contrib[mask]) + const))
        else:
            out.append(float("-inf"))
    return tuple(out)


def quadrature_log_marginal(
    data: Dataset,
    support: SupportSet,
    prior,
    model_log_prior: float,
    opts: QuadratureOptions = QuadratureOptions(),
    fit: FittedModel | None = None,
) -> float:
    """Adaptive Gauss-Hermite evidence for |J| <= 3.

    Doubles the per-axis node count from ``base_nodes`` until successive
    log values agree to ``rel_tol`` (relative to max(1, |value|)).
    """
    d = len(support)
    if d > 3:
        raise DimensionTooLarge(f"quadrature oracle supports |J| <= 3, got {d}")
    if fit is None:
        fit = fit_mle(data, support, FitOptions())
    elif fit.support != support:
        raise ValidationError("provided fit does not match the requested support")
    if d == 0:
        return fit.log_lik + prior.logpdf(np.zeros(0)) + model_log_prior
    m = opts.base_nodes
    prev = _gh_log_integral(data, fit, prior, m, opts)
    while 2 * m <= opts.max_nodes:
        m *= 2
        cur = _gh_log_integral(data, fit, prior, m, opts)
        if abs(cur - prev) <= opts.rel_tol * max(1.0, abs(cur)):
            return float(cur + model_log_prior)
        prev = cur
    raise QuadratureNotConverged(
        f"no convergence up to {opts.max_nodes} nodes per axis for |J|={d}"
    )


def region_decomposition(
    data: Dataset,
    fit: FittedModel,
    prior,
    log_np: float,
    lambda1_hat: float,
    opts: QuadratureOptions = QuadratureOptions(),
) -> tuple[float, float, float]:
    """Split the evidence integral over the curvature-metric balls.

    Region 1 is ||H^{1/2}(phi - phi_hat)|| <= sqrt(4 log(np)), region 2
    extends to sqrt(lambda1_hat * n), region 3 is everything beyond.  All
    three pieces use the node set that the adaptive total converged on, so
    their log-sum-exp recovers the total to floating-point error.
    """
    if not fit.converged:
        raise UnconvergedFit("region decomposition needs a converged fit")
    d = len(fit.support)
    if d > 3:
        raise DimensionTooLarge(f"region decomposition supports |J| <= 3, got {d}")
    if log_np <= 0 or lambda1_hat <= 0:
        raise ValidationError("log_np and lambda1_hat must be positive")
    r1 = math.sqrt(4.0 * log_np)
    r2 = math.sqrt(lambda1_hat * data.n)
    if d == 0:
        total = fit.log_lik + prior.logpdf(np.zeros(0))
        return (total, float("-inf"), float("-inf"))
    m = opts.base_nodes
    prev = _gh_log_integral(data, fit, prior, m, opts)
    final_m = None
    while 2 * m <= opts.max_nodes:
        m *= 2
        cur = _gh_log_integral(data, fit, prior, m, opts)
        if abs(cur - prev) <= opts.rel_tol * max(1.0, abs(cur)):
            final_m = m
            break
        prev = cur
    if final_m is None:
        raise QuadratureNotConverged(
            f"no convergence up to {opts.max_nodes} nodes per axis for |J|={d}"
        )
    return _gh_log_integral(data, fit, prior, final_m, opts, log_np_regions=(r1, r2))


@dataclass(frozen=True)
class EquivalenceReport:
    """Side-by-side EBIC and Laplace-evidence ranking of one candidate list.

    ``gaps`` holds log m(J) + ebic(J)/2 per converged model; agreement says
    whether both rankings pick the same support under the shared tie-break.
    """

    per_model: tuple[dict, ...]
    ebic_choice: SupportSet
    bayes_choice: SupportSet
    agreement: bool
    max_abs_gap: float
    gap_spread: float


def equivalence_report(
    fits: Sequence[FittedModel],
    prior,
    gamma: float,
    q_cap: int,
    n: int,
    p: int,
) -> EquivalenceReport:
    """Score every fit both ways and compare the two selections."""
    if not fits:
        raise EmptyCandidates("no fits to compare")
    spec = PriorSpec(gamma=gamma, q_cap=q_cap)
    rows: list[dict] = []
    scores: list[ModelScore] = []
    bayes_vals: list[tuple[float, int, tuple[int, ...]]] = []
    for fit in fits:
        if not fit.converged:
            rows.append(
                {"support": fit.support.indices, "error": fit.error, "ebic": None,
                 "log_bayes": None, "gap": None}
            )
            continue
        ms = ebic_score(fit, n, p, gamma)
        lp = log_model_prior(p, len(fit.support), spec)
        try:
            bs = laplace_log_marginal(fit, prior, lp)
        except NumericalError as exc:
            rows.append(
                {"support": fit.support.indices, "error": f"{type(exc).__name__}: {exc}",
                 "ebic": ms.ebic, "log_bayes": None, "gap": None}
            )
            continue
        gap = bs.log_marginal_laplace + 0.5 * ms.ebic
        scores.append(ms)
        bayes_vals.append((-bs.log_marginal_laplace, len(fit.support), fit.support.indices))
        rows.append(
            {"support": fit.support.indices, "error": None, "ebic": ms.ebic,
             "log_bayes": bs.log_marginal_laplace, "gap": gap}
        )
    if not scores:
        raise EmptyCandidates("every candidate failed scoring")
    ebic_choice = select_best(scores)
    bayes_choice = SupportSet(min(bayes_vals)[2])
    gaps = [row["gap"] for row in rows if row["gap"] is not None and math.isfinite(row["gap"])]
    max_abs = max(abs(g) for g in gaps) if gaps else float("nan")
    spread = (max(gaps) - min(gaps)) if gaps else float("nan")
    return EquivalenceReport(
        per_model=tuple(rows),
        ebic_choice=ebic_choice,
        bayes_choice=bayes_choice,
        agreement=ebic_choice == bayes_choice,
        max_abs_gap=max_abs,
        gap_spread=spread,
    )
