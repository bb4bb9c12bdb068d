"""Exception types and input validation helpers shared across modules."""

import math

import numpy as np

#: Entrywise tolerance on ``B^T B - I`` for an accepted orthonormal basis.
ORTHONORMAL_TOL = 1e-10
#: Tolerance on the total mass of a probability vector.
PROB_SUM_TOL = 1e-12


class ValidationError(ValueError):
    """An input has the wrong shape, sign or structure."""


class DomainError(ValueError):
    """A parameter lies outside the region where a formula is defined."""


def check_vector(x, n=None, name="y"):
    """Return ``x`` as a finite float array whose last axis has length ``n``."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        raise ValidationError(f"{name} must be a vector, got a scalar")
    if n is not None and arr.shape[-1] != n:
        raise ValidationError(f"{name} has length {arr.shape[-1]}, expected {n}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def check_probability(p, name="prior", size=None):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError(f"{name} must be a non-empty 1-d vector")
    if size is not None and p.size != size:
        raise ValidationError(f"{name} has {p.size} entries, expected {size}")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValidationError(f"{name} entries must be finite and nonnegative")
    if abs(p.sum() - 1.0) > PROB_SUM_TOL:
        raise ValidationError(f"{name} sums to {p.sum()!r}, not 1")
    return p


def check_positive(value, name, strict=True):
    value = float(value)
    if not math.isfinite(value) or value < 0 or (strict and value == 0):
        kind = "positive" if strict else "nonnegative"
        raise DomainError(f"{name} must be finite and {kind}, got {value!r}")
    return value
