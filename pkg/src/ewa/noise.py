"""Centered sub-Gaussian noise models with certified parameters.

All randomness goes through Philox (counter-based, platform-stable) keyed by a
``SeedSequence``; a trial stream is derived from ``(master_seed, trial_index)``.
"""

from dataclasses import dataclass

import numpy as np

from ewa._validation import ValidationError, check_positive

KINDS = ("gaussian", "rademacher", "uniform_bounded")
MAX_DIRECTION_NORM = 2.0
_CHUNK = 100_000


def rng_for(seed):
    """Philox generator for an int seed or a tuple of ints such as ``(master, i)``."""
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class NoiseModel:
    """i.i.d. centered noise coordinates.

    ``scale`` is the standard deviation for ``gaussian``, the magnitude ``a``
    of ``+-a`` for ``rademacher`` and the half-width ``a`` of ``[-a, a]`` for
    ``uniform_bounded``.
    """

    kind: str = "gaussian"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown noise kind {self.kind!r}; choose from {KINDS}")
        object.__setattr__(self, "scale", check_positive(self.scale, "noise scale"))

    @property
    def sigma_sq(self):
        # Hoeffding's lemma gives a^2 for both bounded laws.
        return self.scale**2

    @property
    def variance(self):
        if self.kind == "uniform_bounded":
            return self.scale**2 / 3.0
        return self.scale**2

    def sample(self, rng, shape):
        a = self.scale
        if self.kind == "gaussian":
            return a * rng.standard_normal(shape)
        if self.kind == "rademacher":
            return a * (2.0 * rng.integers(0, 2, size=shape) - 1.0)
        return rng.uniform(-a, a, size=shape)


def subgaussian_param(model):
    return model.sigma_sq


def sample_noise(model, n, seed, size=None):
    """Draw one noise vector of length ``n`` (or ``size`` of them, stacked by row)."""
    if n < 1:
        raise ValidationError(f"n must be at least 1, got {n}")
    shape = (n,) if size is None else (size, n)
    return model.sample(rng_for(seed), shape)


def mgf_check(model, n, directions, samples, seed):
    """Monte Carlo check of ``E exp(a^T W) <= exp(sigma^2 |a|^2 / 2)``.

    Returns one dict per direction with keys ``empirical_mgf``, ``stderr``,
    ``bound`` and ``ok``. The check passes when the sample mean exceeds the
    bound by at most three standard errors.
    """
    A = np.atleast_2d(np.asarray(directions, dtype=float))
    if A.shape[1] != n:
        raise ValidationError(f"directions must have length {n}, got {A.shape[1]}")
    norms = np.linalg.norm(A, axis=1)
    if np.any(norms > MAX_DIRECTION_NORM):
        i = int(np.argmax(norms))
        raise ValidationError(
            f"direction {i} has norm {norms[i]:.4g} > {MAX_DIRECTION_NORM}"
        )
    rng = rng_for(seed)
    total = np.zeros(len(A))
    total_sq = np.zeros(len(A))
    done = 0
    while done < samples:
        m = min(_CHUNK, samples - done)
        e = np.exp(model.sample(rng, (m, n)) @ A.T)
        total += e.sum(axis=0)
        total_sq += (e**2).sum(axis=0)
        done += m
    mean = total / samples
    var = np.maximum(total_sq / samples - mean**2, 0.0)
    stderr = np.sqrt(var / max(samples - 1, 1))
    bound = np.exp(0.5 * model.sigma_sq * norms**2)
    return [
        {
            "empirical_mgf": float(mean[i]),
            "stderr": float(stderr[i]),
            "bound": float(bound[i]),
            "ok": bool(mean[i] <= bound[i] + 3.0 * stderr[i]),
        }
        for i in range(len(A))
    ]


def random_unit_directions(n, count, seed):
    rng = rng_for(seed)
    A = rng.standard_normal((count, n))
    return A / np.linalg.norm(A, axis=1, keepdims=True)
