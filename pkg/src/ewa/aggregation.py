"""Gibbs posterior weights, the aggregate and the Gibbs variational identity."""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ewa._validation import DomainError, ValidationError, check_positive, check_probability


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Probability vector over a collection, kept alongside its logarithm."""

    weights: np.ndarray
    log_weights: np.ndarray

    def __len__(self):
        return len(self.weights)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.weights, dtype=dtype)


def _log_prior(prior):
    with np.errstate(divide="ignore"):
        return np.log(prior)


def gibbs_weights(penalized_risks, beta, prior):
    """Weights proportional to ``prior[t] * exp(-penalized_risks[t] / beta)``.

    Normalised in the log domain, so risks spanning many orders of
    magnitude do not overflow. Atoms with zero prior mass get weight 0.
    """
    beta = check_positive(beta, "beta")
    r = np.asarray(penalized_risks, dtype=float)
    prior = check_probability(prior, "prior", r.size)
    if not np.all(np.isfinite(r)):
        raise ValidationError("penalized risks must be finite")
    logits = _log_prior(prior) - r / beta
    log_w = logits - logsumexp(logits)
    return WeightVector(np.exp(log_w), log_w)


def aggregate(w, coll, y):
    """``f_EWA = sum_t w[t] P_t y``."""
    weights = np.asarray(w, dtype=float)
    if weights.shape != (len(coll),):
        raise ValidationError(
            f"weights have shape {weights.shape}, collection has {len(coll)} items"
        )
    fits = coll.apply_all(y)
    return np.tensordot(weights, fits, axes=1)


def kl_divergence(mu, pi):
    """``KL(mu, pi) = sum mu log(mu / pi)`` with ``0 log 0 = 0``."""
    mu = check_probability(mu, "mu")
    pi = check_probability(pi, "pi", mu.size)
    support = mu > 0
    if np.any(pi[support] == 0):
        t = int(np.flatnonzero(support & (pi == 0))[0])
        raise DomainError(f"mu is not absolutely continuous w.r.t. pi (atom {t})")
    m, p = mu[support], pi[support]
    return max(float(np.sum(m * (np.log(m) - np.log(p)))), 0.0)


def tilted(h, pi):
    """The Gibbs measure ``pi_exp(h)`` with density ``exp(h) / int exp(h) dpi``."""
    h = np.asarray(h, dtype=float)
    pi = check_probability(pi, "pi", h.size)
    logits = _log_prior(pi) + h
    return np.exp(logits - logsumexp(logits))


def log_partition(h, pi):
    """``log int exp(h) dpi``."""
    h = np.asarray(h, dtype=float)
    pi = check_probability(pi, "pi", h.size)
    return float(logsumexp(_log_prior(pi) + h))


def variational_gap(h, pi, candidate):
    """``log int exp(h) dpi - (int h dcandidate - KL(candidate, pi))``.

    The gap is ``KL(candidate, pi_exp(h))``: nonnegative and zero exactly at
    the Gibbs measure.
    """
    h = np.asarray(h, dtype=float)
    candidate = check_probability(candidate, "candidate", h.size)
    kl = kl_divergence(candidate, pi)
    return log_partition(h, pi) - (float(candidate @ h) - kl)
