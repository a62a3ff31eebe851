"""Natural-parameter exponential families and restricted GLM likelihoods.

Each family is determined by its cumulant function ``b``.  With linear
predictor theta_i = x_i' phi (plus an optional fixed intercept), the
log-likelihood used throughout drops the base measure:

    l(phi) = sum_i [ y_i * theta_i - b(theta_i) ].

Score and Hessian are taken with respect to the coefficients of the active
support only, so the Hessian is |J| x |J| and positive semidefinite.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatch, LengthMismatch, ValidationError

__all__ = [
    "Family",
    "SupportSet",
    "Dataset",
    "cumulant",
    "cumulant_derivs",
    "log_likelihood",
    "score",
    "hessian",
]

# Logistic cumulant switches branches here; log1p(exp(t)) is exact to double
# precision for |t| <= this cutoff.
_LOGISTIC_CUT = 35.0


class Family(enum.Enum):
    """Supported one-parameter exponential families (unit dispersion)."""

    LOGISTIC = "logistic"
    POISSON = "poisson"
    GAUSSIAN = "gaussian_unit_variance"

    @classmethod
    def from_name(cls, name: str) -> "Family":
        key = name.strip().lower()
        aliases = {
            "logistic": cls.LOGISTIC,
            "binomial": cls.LOGISTIC,
            "poisson": cls.POISSON,
            "gaussian": cls.GAUSSIAN,
            "gaussian_unit_variance": cls.GAUSSIAN,
            "normal": cls.GAUSSIAN,
        }
        if key not in aliases:
            raise ValidationError(f"unknown family {name!r}")
        return aliases[key]


def cumulant(family: Family, theta: np.ndarray | float) -> np.ndarray | float:
    """Cumulant b(theta), overflow-safe for |theta| <= 700."""
    t = np.asarray(theta, dtype=float)
    if family is Family.LOGISTIC:
        out = np.empty_like(t)
        hi = t > _LOGISTIC_CUT
        lo = t < -_LOGISTIC_CUT
        mid = ~(hi | lo)
        out[hi] = t[hi]
        out[lo] = np.exp(t[lo])
        out[mid] = np.log1p(np.exp(t[mid]))
    elif family is Family.POISSON:
        out = np.exp(t)
    elif family is Family.GAUSSIAN:
        out = 0.5 * t * t
    else:  # pragma: no cover - exhaustive enum
        raise ValidationError(f"unknown family {family!r}")
    if np.isscalar(theta) or np.ndim(theta) == 0:
        return float(out)
    return out


def cumulant_derivs(family: Family, theta: np.ndarray | float):
    """First three derivatives (b', b'', b''') of the cumulant."""
    t = np.asarray(theta, dtype=float)
    if family is Family.LOGISTIC:
        mu = expit(t)
        var = mu * (1.0 - mu)
        b3 = var * (1.0 - 2.0 * mu)
    elif family is Family.POISSON:
        mu = np.exp(t)
        var = mu
        b3 = mu
    elif family is Family.GAUSSIAN:
        mu = t
        var = np.ones_like(t)
        b3 = np.zeros_like(t)
    else:  # pragma: no cover - exhaustive enum
        raise ValidationError(f"unknown family {family!r}")
    if np.isscalar(theta) or np.ndim(theta) == 0:
        return float(mu), float(var), float(b3)
    return mu, var, b3


@dataclass(frozen=True)
class SupportSet:
    """Strictly increasing tuple of active covariate indices."""

    indices: tuple[int, ...]

    def __post_init__(self) -> None:
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if any(i < 0 for i in idx):
            raise ValidationError(f"negative index in support {idx}")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValidationError(f"support indices must be strictly increasing, got {idx}")

    @classmethod
    def from_iterable(cls, it: Iterable[int]) -> "SupportSet":
        return cls(tuple(sorted(set(int(i) for i in it))))

    @classmethod
    def empty(cls) -> "SupportSet":
        return cls(())

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.intp)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices)

    def __contains__(self, j: object) -> bool:
        return j in self.indices

    def issubset(self, other: "SupportSet") -> bool:
        return set(self.indices) <= set(other.indices)

    def union(self, other: "SupportSet") -> "SupportSet":
        return SupportSet.from_iterable(self.indices + other.indices)


@dataclass(frozen=True)
class Dataset:
    """Immutable design matrix, optional response, and family tag.

    ``y`` may be None for covariates-only data (e.g. raw binary samples
    before a node regression is formed); likelihood operations then refuse
    to run.
    """

    x: np.ndarray
    y: np.ndarray | None
    family: Family

    def __post_init__(self) -> None:
        x = np.ascontiguousarray(np.asarray(self.x, dtype=float))
        if x.ndim != 2:
            raise DimensionMismatch(f"x must be 2-d, got shape {x.shape}")
        n, p = x.shape
        if n < 1 or p < 1:
            raise ValidationError(f"x must have at least one row and one column, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValidationError("x contains non-finite entries")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        if self.y is None:
            return
        y = np.ascontiguousarray(np.asarray(self.y, dtype=float))
        if y.shape != (n,):
            raise LengthMismatch(f"y has shape {y.shape}, expected ({n},)")
        if not np.all(np.isfinite(y)):
            raise ValidationError("y contains non-finite entries")
        if self.family is Family.LOGISTIC and not np.all((y == 0.0) | (y == 1.0)):
            raise ValidationError("logistic family requires y in {0, 1}")
        if self.family is Family.POISSON and (np.any(y < 0) or np.any(y != np.floor(y))):
            raise ValidationError("poisson family requires nonnegative integer y")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def require_response(self) -> np.ndarray:
        if self.y is None:
            raise ValidationError("dataset has no response column")
        return self.y


def _design(data: Dataset, support: SupportSet) -> np.ndarray:
    if len(support) and support.indices[-1] >= data.p:
        raise DimensionMismatch(
            f"support index {support.indices[-1]} out of range for p={data.p}"
        )
    return data.x[:, support.as_array()]


def _check_coeffs(support: SupportSet, coeffs: np.ndarray) -> np.ndarray:
    c = np.asarray(coeffs, dtype=float)
    if c.shape != (len(support),):
        raise LengthMismatch(f"coeffs has shape {c.shape}, expected ({len(support)},)")
    return c


def _linear_predictor(
    data: Dataset, support: SupportSet, coeffs: np.ndarray, intercept: float
) -> np.ndarray:
    xj = _design(data, support)
    c = _check_coeffs(support, coeffs)
    theta = xj @ c if len(support) else np.zeros(data.n)
    if intercept != 0.0:
        theta = theta + intercept
    return theta


def log_likelihood(
    data: Dataset,
    support: SupportSet,
    coeffs: np.ndarray,
    intercept: float = 0.0,
) -> float:
    """Base-measure-free log-likelihood of the restricted model.

    Evaluating support J on the restricted coefficient vector equals
    evaluating the full support on its zero-padded embedding.
    """
    y = data.require_response()
    theta = _linear_predictor(data, support, coeffs, intercept)
    return float(y @ theta - np.sum(cumulant(data.family, theta)))


def score(
    data: Dataset,
    support: SupportSet,
    coeffs: np.ndarray,
    intercept: float = 0.0,
) -> np.ndarray:
    """Gradient of the log-likelihood w.r.t. the active coefficients."""
    y = data.require_response()
    theta = _linear_predictor(data, support, coeffs, intercept)
    mu, _, _ = cumulant_derivs(data.family, theta)
    return _design(data, support).T @ (y - mu)


def hessian(
    data: Dataset,
    support: SupportSet,
    coeffs: np.ndarray,
    intercept: float = 0.0,
) -> np.ndarray:
    """Observed information sum_i x_iJ x_iJ' b''(theta_i) (y-free)."""
    theta = _linear_predictor(data, support, coeffs, intercept)
    _, var, _ = cumulant_derivs(data.family, theta)
    xj = _design(data, support)
    return (xj * var[:, None]).T @ xj
