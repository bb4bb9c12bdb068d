"""Smoothed-projection linear estimators and finite collections of them.

An estimator is stored as an orthonormal basis ``B`` and nonnegative
shrinkage coefficients ``rho`` so that ``P = B diag(rho) B^T``. Traces and
the spectral norm are then read off ``rho`` exactly.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft

from ewa._validation import (
    ORTHONORMAL_TOL,
    ValidationError,
    check_probability,
    check_vector,
)

MAX_GRID_SIZE = 2048


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LinearEstimator:
    """Linear smoother ``y -> B diag(shrink) B^T y``.

    Parameters
    ----------
    basis : ndarray of shape (n, n)
        Orthonormal basis, one basis vector per column.
    shrink : ndarray of shape (n,)
        Nonnegative shrinkage coefficient applied to each basis coordinate.
    label : str
        Free-form identifier used in reports.
    """

    basis: np.ndarray
    shrink: np.ndarray
    label: str = ""

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=float)
        shrink = np.asarray(self.shrink, dtype=float)
        if basis.ndim != 2 or basis.shape[0] != basis.shape[1]:
            raise ValidationError(f"basis must be square, got shape {basis.shape}")
        n = basis.shape[0]
        if n == 0 or n > MAX_GRID_SIZE:
            raise ValidationError(f"grid size {n} outside [1, {MAX_GRID_SIZE}]")
        if shrink.shape != (n,):
            raise ValidationError(f"shrink has shape {shrink.shape}, expected ({n},)")
        if not np.all(np.isfinite(basis)) or not np.all(np.isfinite(shrink)):
            raise ValidationError("basis and shrink must be finite")
        if np.any(shrink < 0):
            i = int(np.argmin(shrink))
            raise ValidationError(f"shrink[{i}] = {shrink[i]!r} is negative")
        dev = np.max(np.abs(basis.T @ basis - np.eye(n)))
        if dev > ORTHONORMAL_TOL:
            raise ValidationError(
                f"basis is not orthonormal: max |B^T B - I| = {dev:.3e} > {ORTHONORMAL_TOL:g}"
            )
        object.__setattr__(self, "basis", _frozen(basis))
        object.__setattr__(self, "shrink", _frozen(shrink))

    @property
    def n(self):
        return self.basis.shape[0]

    @cached_property
    def trace(self):
        return float(np.sum(self.shrink))

    @cached_property
    def trace_sq(self):
        return float(np.sum(self.shrink**2))

    @cached_property
    def spec_norm(self):
        return float(np.max(self.shrink))

    @cached_property
    def is_projection(self):
        return bool(np.all((self.shrink == 0.0) | (self.shrink == 1.0)))

    def matrix(self):
        """Dense ``P``; meant for cross-checks, not for the hot path."""
        return (self.basis * self.shrink) @ self.basis.T

    def apply(self, y):
        """Return ``P y``. ``y`` may be a batch with samples along the first axis."""
        y = check_vector(y, self.n)
        return ((y @ self.basis) * self.shrink) @ self.basis.T

    __call__ = apply


def make_smoothed_projection(basis, shrink, label=""):
    return LinearEstimator(basis, shrink, label)


def make_rank_projection(basis, k, label=None):
    """Orthogonal projection onto the first ``k`` columns of ``basis``."""
    basis = np.asarray(basis, dtype=float)
    n = basis.shape[0]
    if not 0 <= k <= n:
        raise ValidationError(f"rank k={k} outside [0, {n}]")
    shrink = np.zeros(n)
    shrink[:k] = 1.0
    return LinearEstimator(basis, shrink, f"rank{k}" if label is None else label)


def trace_stats(est):
    """Return ``(tr P, tr P^2, ||P||_2)``."""
    return est.trace, est.trace_sq, est.spec_norm


def apply(est, y):
    return est.apply(y)


def standard_basis(n):
    return np.eye(n)


def cosine_basis(n):
    """Orthonormal DCT-II basis, columns ordered from low to high frequency."""
    return scipy.fft.idct(np.eye(n), type=2, norm="ortho", axis=0)


def random_basis(n, seed=0):
    """Orthonormal basis from the QR factorisation of a seeded Gaussian matrix."""
    rng = np.random.Generator(np.random.Philox(seed))
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


BASES = {"standard": standard_basis, "cosine": cosine_basis, "random": random_basis}


def make_basis(kind, n, seed=0):
    try:
        factory = BASES[kind]
    except KeyError:
        raise ValidationError(f"unknown basis kind {kind!r}; choose from {sorted(BASES)}")
    return factory(n, seed) if kind == "random" else factory(n)


def default_ranks(n):
    """Nested dyadic ranks 1, 2, 4, ... capped by ``n`` (``n`` always included)."""
    ranks = []
    k = 1
    while k < n:
        ranks.append(k)
        k *= 2
    ranks.append(n)
    return ranks


def linear_taper(n, k):
    """Shrinkage profile ``rho_i = (1 - i/k)_+`` for ``i = 0..n-1``."""
    if k <= 0:
        raise ValidationError(f"taper length must be positive, got {k}")
    return np.clip(1.0 - np.arange(n) / k, 0.0, None)


@dataclass(frozen=True, eq=False)
class EstimatorCollection:
    """Finite family of linear estimators with a prior and a spectral bound ``V``.

    ``v_bound`` defaults to ``max(0.5, max_t ||P_t||_2)``.
    """

    items: tuple
    prior: np.ndarray = None
    v_bound: float = None
    _stats: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        items = tuple(self.items)
        if not items:
            raise ValidationError("collection must contain at least one estimator")
        n = items[0].n
        if any(est.n != n for est in items):
            raise ValidationError("all estimators must share the same grid size")
        m = len(items)
        prior = np.full(m, 1.0 / m) if self.prior is None else self.prior
        prior = _frozen(check_probability(prior, "prior", m))
        stats = _frozen([trace_stats(est) for est in items])
        max_norm = float(stats[:, 2].max())
        v = max(0.5, max_norm) if self.v_bound is None else float(self.v_bound)
        if v < 0.5:
            raise ValidationError(f"v_bound={v!r} must be at least 0.5")
        if v < max_norm:
            raise ValidationError(
                f"v_bound={v!r} is below the largest spectral norm {max_norm!r}"
            )
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "v_bound", v)
        object.__setattr__(self, "_stats", stats)

    def __len__(self):
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def __iter__(self):
        return iter(self.items)

    @property
    def n(self):
        return self.items[0].n

    @property
    def traces(self):
        return self._stats[:, 0]

    @property
    def traces_sq(self):
        return self._stats[:, 1]

    @property
    def spec_norms(self):
        return self._stats[:, 2]

    @property
    def labels(self):
        return [est.label for est in self.items]

    @cached_property
    def all_projections(self):
        return all(est.is_projection for est in self.items)

    def apply_all(self, y):
        """Stack of ``P_t y`` with shape ``(len(self), *y.shape)``."""
        return np.stack([est.apply(y) for est in self.items])


def make_collection(n, basis="cosine", kind="projection", ranks=None, seed=0,
                    prior=None, v_bound=None):
    """Build a collection in one basis.

    ``kind="projection"`` gives rank-``k`` projections for each ``k`` in
    ``ranks``; ``kind="shrinkage"`` gives linear tapers of length ``k``.
    """
    if not 1 <= n <= MAX_GRID_SIZE:
        raise ValidationError(f"grid size {n} outside [1, {MAX_GRID_SIZE}]")
    B = make_basis(basis, n, seed)
    ranks = default_ranks(n) if ranks is None else list(ranks)
    if kind == "projection":
        items = [make_rank_projection(B, k) for k in ranks]
    elif kind == "shrinkage":
        items = [LinearEstimator(B, linear_taper(n, k), f"taper{k}") for k in ranks]
    else:
        raise ValidationError(f"unknown collection kind {kind!r}")
    return EstimatorCollection(tuple(items), prior, v_bound)
