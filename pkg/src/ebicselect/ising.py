"""Binary pairwise graphical models: sampling, enumeration, and selection.

The model over x in {0,1}^p is

    P(x) proportional to exp( sum_j zeta_j x_j
                              + (1/2) sum_{j != k} theta_jk x_j x_k ),

with symmetric zero-diagonal interactions.  The conditional log-odds of
node j given the rest is exactly logistic with intercept zeta_j and slopes
theta_j., which is what lets per-node penalized logistic regressions
estimate the neighborhood structure.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace
from typing import Literal, Sequence

import numpy as np
from scipy.special import expit, logsumexp

from .errors import (
    DimensionMismatch,
    DimensionTooLarge,
    SelfNeighborhood,
    ValidationError,
)
from .families import Dataset, Family, SupportSet
from .fitting import FitOptions, refit_candidates
from .lasso import PathOptions, candidate_supports, lasso_path
from .criteria import ModelScore, ebic_score, select_best

__all__ = [
    "IsingParameters",
    "GraphEstimate",
    "GraphMetrics",
    "grid_graph",
    "gibbs_sample",
    "exact_distribution",
    "neighborhood_select",
    "combine_graph",
    "graph_metrics",
]

Rule = Literal["and", "or"]


@dataclass(frozen=True)
class IsingParameters:
    """Node fields ``zeta`` (p,) and symmetric zero-diagonal couplings ``theta``."""

    zeta: np.ndarray
    theta: np.ndarray

    def __post_init__(self) -> None:
        zeta = np.ascontiguousarray(np.asarray(self.zeta, dtype=float))
        theta = np.ascontiguousarray(np.asarray(self.theta, dtype=float))
        if zeta.ndim != 1:
            raise DimensionMismatch("zeta must be a vector")
        p = zeta.shape[0]
        if theta.shape != (p, p):
            raise DimensionMismatch(f"theta must be ({p}, {p}), got {theta.shape}")
        if not (np.all(np.isfinite(zeta)) and np.all(np.isfinite(theta))):
            raise ValidationError("parameters contain non-finite entries")
        if not np.array_equal(theta, theta.T):
            raise ValidationError("theta must be symmetric")
        if np.any(np.diag(theta) != 0.0):
            raise ValidationError("theta must have a zero diagonal")
        zeta.setflags(write=False)
        theta.setflags(write=False)
        object.__setattr__(self, "zeta", zeta)
        object.__setattr__(self, "theta", theta)

    @property
    def p(self) -> int:
        return self.zeta.shape[0]

    @classmethod
    def from_graph(
        cls, graph: "GraphEstimate", edge_weight: float, zeta_value: float = 0.0
    ) -> "IsingParameters":
        theta = np.zeros((graph.p, graph.p))
        for j, k in graph.edges:
            theta[j, k] = edge_weight
            theta[k, j] = edge_weight
        return cls(np.full(graph.p, zeta_value), theta)


@dataclass(frozen=True)
class GraphEstimate:
    """Undirected graph as sorted (j, k) pairs with j < k."""

    p: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        seen = set()
        norm = []
        for j, k in self.edges:
            j, k = int(j), int(k)
            if j == k:
                raise ValidationError(f"self edge ({j}, {k})")
            if not (0 <= j < self.p and 0 <= k < self.p):
                raise DimensionMismatch(f"edge ({j}, {k}) out of range for p={self.p}")
            if j > k:
                j, k = k, j
            if (j, k) in seen:
                continue
            seen.add((j, k))
            norm.append((j, k))
        object.__setattr__(self, "edges", tuple(sorted(norm)))

    def to_json(self) -> str:
        return json.dumps({"p": self.p, "edges": [list(e) for e in self.edges]})

    @classmethod
    def from_json(cls, text: str) -> "GraphEstimate":
        obj = json.loads(text)
        return cls(p=int(obj["p"]), edges=tuple((int(j), int(k)) for j, k in obj["edges"]))


@dataclass(frozen=True)
class GraphMetrics:
    """Positive selection rate and false discovery rate of an edge set."""

    psr: float
    fdr: float


def grid_graph(rows: int, cols: int) -> GraphEstimate:
    """Nearest-neighbor lattice on rows x cols nodes, row-major numbering."""
    if rows < 1 or cols < 1:
        raise ValidationError("grid dimensions must be positive")
    edges = []
    for r in range(rows):
        for c in range(cols):
            node = r * cols + c
            if c + 1 < cols:
                edges.append((node, node + 1))
            if r + 1 < rows:
                edges.append((node, node + cols))
    return GraphEstimate(p=rows * cols, edges=tuple(edges))


def gibbs_sample(
    params: IsingParameters,
    n: int,
    burn_in: int = 1000,
    thin: int = 5,
    seed: int | Sequence[int] = 0,
) -> Dataset:
    """Systematic-scan Gibbs sampler returning n thinned draws.

    The chain starts from an independent fair-coin state, discards
    ``burn_in`` full sweeps, then keeps every ``thin``-th sweep.  The result
    is a covariates-only Dataset (y is None) tagged logistic.
    """
    if n < 1:
        raise ValidationError("n must be positive")
    if burn_in < 0 or thin < 1:
        raise ValidationError("burn_in must be >= 0 and thin >= 1")
    p = params.p
    rng = np.random.default_rng(seed)
    state = (rng.random(p) < 0.5).astype(float)
    sweeps = burn_in + n * thin
    uniforms = rng.random((sweeps, p))
    theta = params.theta
    zeta = params.zeta
    out = np.empty((n, p))
    kept = 0
    for s in range(sweeps):
        u_row = uniforms[s]
        for j in range(p):
            logit = zeta[j] + float(theta[j] @ state)
            state[j] = 1.0 if u_row[j] < expit(logit) else 0.0
        if s >= burn_in and (s - burn_in + 1) % thin == 0:
            out[kept] = state
            kept += 1
    assert kept == n
    return Dataset(x=out, y=None, family=Family.LOGISTIC)


def exact_distribution(params: IsingParameters) -> np.ndarray:
    """Probabilities of all 2^p states; state s sets x_j = bit j of s."""
    p = params.p
    if p > 15:
        raise DimensionTooLarge(f"exact enumeration limited to p <= 15, got {p}")
    states = ((np.arange(2**p)[:, None] >> np.arange(p)) & 1).astype(float)
    log_w = states @ params.zeta + 0.5 * np.einsum("ij,ij->i", states @ params.theta, states)
    return np.exp(log_w - logsumexp(log_w))


def node_regression(data: Dataset, node: int) -> tuple[Dataset, list[int]]:
    """Response = column ``node``, covariates = the remaining columns.

    Returns the regression dataset and the global indices of its columns.
    """
    if not 0 <= node < data.p:
        raise DimensionMismatch(f"node {node} out of range for p={data.p}")
    others = [k for k in range(data.p) if k != node]
    y = data.x[:, node]
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValidationError("node columns must be binary for neighborhood selection")
    return Dataset(x=data.x[:, others], y=y, family=Family.LOGISTIC), others


def neighborhood_select(
    data: Dataset,
    node: int,
    gamma: float,
    q_cap: int,
    path_opts: PathOptions | None = None,
    fit_opts: FitOptions | None = None,
) -> SupportSet:
    """EBIC-selected neighborhood of one node via penalized logistic paths.

    The node regression keeps an unpenalized intercept; the EBIC model-space
    size is the node's covariate count p - 1.  When every candidate fails to
    fit, the empty neighborhood is returned with a warning.
    """
    reg, others = node_regression(data, node)
    popts = path_opts or PathOptions()
    if not popts.with_intercept:
        popts = replace(popts, with_intercept=True)
    fopts = fit_opts or FitOptions()
    if not fopts.with_intercept:
        fopts = replace(fopts, with_intercept=True)
    path = lasso_path(reg, popts)
    candidates = candidate_supports(path, q_max=q_cap)
    if not candidates:
        candidates = [SupportSet.empty()]
    fits = refit_candidates(reg, candidates, fopts)
    scores: list[ModelScore] = []
    for fit in fits:
        if fit.converged:
            scores.append(ebic_score(fit, n=reg.n, p=reg.p, gamma=gamma))
    if not scores:
        warnings.warn(
            f"node {node}: every candidate fit failed; selecting empty neighborhood",
            RuntimeWarning,
            stacklevel=2,
        )
        return SupportSet.empty()
    local = select_best(scores)
    return SupportSet.from_iterable(others[j] for j in local)


def combine_graph(neighborhoods: Sequence[SupportSet], rule: Rule) -> GraphEstimate:
    """Merge per-node neighborhoods into an edge set.

    "and" keeps an edge only when each endpoint selects the other; "or"
    keeps it when either does.
    """
    if rule not in ("and", "or"):
        raise ValidationError(f"rule must be 'and' or 'or', got {rule!r}")
    p = len(neighborhoods)
    arrows: set[tuple[int, int]] = set()
    for j, nb in enumerate(neighborhoods):
        if j in nb:
            raise SelfNeighborhood(f"node {j} lists itself as a neighbor")
        if len(nb) and nb.indices[-1] >= p:
            raise DimensionMismatch(f"node {j} neighborhood exceeds p={p}")
        arrows.update((j, k) for k in nb)
    edges = []
    for j, k in sorted({(min(a, b), max(a, b)) for a, b in arrows}):
        forward = (j, k) in arrows
        backward = (k, j) in arrows
        keep = (forward and backward) if rule == "and" else (forward or backward)
        if keep:
            edges.append((j, k))
    return GraphEstimate(p=p, edges=tuple(edges))


def graph_metrics(estimate: GraphEstimate, truth: GraphEstimate) -> GraphMetrics:
    """PSR = |found true edges| / |true edges|; FDR = |false| / |found|.

    Empty denominators yield 0 by convention.
    """
    if estimate.p != truth.p:
        raise DimensionMismatch(
            f"graphs disagree on p: {estimate.p} vs {truth.p}"
        )
    est = set(estimate.edges)
    tru = set(truth.edges)
    psr = len(est & tru) / len(tru) if tru else 0.0
    fdr = len(est - tru) / len(est) if est else 0.0
    return GraphMetrics(psr=float(psr), fdr=float(fdr))
