"""Exception hierarchy.

Validation errors signal bad inputs or contract violations and map to CLI
exit code 2.  Numerical errors signal fit or quadrature failures on valid
inputs and map to CLI exit code 3.
"""

from __future__ import annotations


class EbicSelectError(Exception):
    """Base class for all package errors."""


class ValidationError(EbicSelectError, ValueError):
    """Invalid input data, options, or preconditions."""


class DimensionMismatch(ValidationError):
    """Array shapes or index ranges do not line up."""


class LengthMismatch(ValidationError):
    """Paired sequences have different lengths."""


class EmptyCandidates(ValidationError):
    """An operation that needs at least one usable candidate got none."""


class DimensionTooLarge(ValidationError):
    """Operation restricted to small dimension got a larger one."""


class SelfNeighborhood(ValidationError):
    """A node appears in its own estimated neighborhood."""


class UnconvergedFit(ValidationError):
    """A failed or unconverged fit was passed where a converged one is required."""


class ParseError(ValidationError):
    """CSV cell could not be parsed; message names the offending row and column."""


class EmptyAfterFiltering(ValidationError):
    """No rows remain after dropping incomplete ones."""


class NumericalError(EbicSelectError, RuntimeError):
    """Numerical failure on structurally valid input."""


class SeparationDetected(NumericalError):
    """Coefficient norm diverged during iteration (e.g. separated logistic data)."""


class SingularHessian(NumericalError):
    """Hessian not positive definite even after a small ridge retry."""


class NotConverged(NumericalError):
    """Iteration limit reached before meeting the convergence tolerance."""


class QuadratureNotConverged(NumericalError):
    """Node doubling hit its cap before the quadrature stabilized."""
