"""Stein unbiased risk and the penalty / temperature constant calculus.

Two rule families are supported:

* ``theorem1`` (and ``custom``): general smoothed projections with
  ``sup_t ||P_t||_2 <= V`` under sub-Gaussian noise. Penalties scale with
  ``tr(P_t^2)`` and the bias/residual trade-off is governed by ``gamma`` and a
  free parameter ``nu``.
* ``gaussian_projection``: orthogonal projections under Gaussian noise, with
  penalties in ``tr(P_t)`` and a closed-form ``epsilon``.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from ewa._validation import DomainError, ValidationError, check_positive, check_vector

PENALTY_RULES = ("theorem1", "gaussian_projection", "custom")
_NU_MARGIN = 1e-9
# relative slack when checking a supplied penalty against its minimum
_PEN_RTOL = 1e-12


@dataclass(frozen=True)
class AggregationConfig:
    """Temperature, interpolation and confidence settings for one aggregation.

    ``delta`` interpolates between the sharp (0) and weak (1) regimes,
    ``eta`` is the confidence level of the in-probability bound and ``kappa``
    is the multiplier of ``tr(P_t^2) sigma^2`` used by the ``custom`` rule.
    Construction fails with a :class:`DomainError` naming the violated
    inequality when the temperature is too low.
    """

    beta: float
    delta: float = 1.0
    eta: float = 0.05
    penalty_rule: str = "theorem1"
    sigma_sq: float = 1.0
    v_bound: float = 1.0
    kappa: Optional[float] = None

    def __post_init__(self):
        for name in ("beta", "sigma_sq", "v_bound"):
            object.__setattr__(self, name, check_positive(getattr(self, name), name))
        delta, eta = float(self.delta), float(self.eta)
        if not 0.0 <= delta <= 1.0:
            raise DomainError(f"delta must lie in [0, 1], got {delta!r}")
        if not 0.0 < eta <= 1.0:
            raise DomainError(f"eta must lie in (0, 1], got {eta!r}")
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "eta", eta)
        if self.penalty_rule not in PENALTY_RULES:
            raise ValidationError(
                f"unknown penalty_rule {self.penalty_rule!r}; choose from {PENALTY_RULES}"
            )
        if self.penalty_rule == "custom":
            if self.kappa is None:
                raise ValidationError("penalty_rule 'custom' requires kappa")
            object.__setattr__(self, "kappa", check_positive(self.kappa, "kappa", strict=False))
        elif self.kappa is not None:
            raise ValidationError("kappa is only used with penalty_rule 'custom'")
        check_temperature(self.beta, self.delta, self.sigma_sq, self.v_bound, self.penalty_rule)

    @property
    def is_gaussian_rule(self):
        return self.penalty_rule == "gaussian_projection"

    @property
    def gamma(self):
        if self.is_gaussian_rule:
            return 0.0
        return gamma(self.beta, self.delta, self.sigma_sq, self.v_bound)

    @property
    def log_inv_eta(self):
        return -math.log(self.eta)


def check_temperature(beta, delta, sigma_sq, v, rule="theorem1"):
    if rule == "gaussian_projection":
        floor = 4 * sigma_sq * (1 + delta)
        if not beta > floor:
            raise DomainError(
                f"temperature must exceed 4*sigma^2*(1+delta) = {floor:g} for projection "
                f"estimators under Gaussian noise, got beta={beta:g}"
            )
        return
    base = 4 * sigma_sq * v
    if not beta > base:
        raise DomainError(
            f"temperature must exceed 4*sigma^2*V = {base:g}, got beta={beta:g}"
        )
    if delta > 0:
        floor = base * (1 + 4 * delta)
        if not beta >= floor:
            msg = (
                f"temperature violates beta >= 4*sigma^2*V*(1+4*delta) = {floor:g} "
                f"(beta={beta:g}, delta={delta:g})"
            )
            if delta == 1:
                msg += "; the weak regime needs beta >= 20*sigma^2*V"
            raise DomainError(msg)
        # for V > 1/2 the set {nu > 0 : (1+nu) gamma < 1} always contains (0, 2V-1)
        if v <= 0.5 and not beta > base + 2 * sigma_sq * delta * (1 + 2 * v) ** 2:
            raise DomainError(
                "no admissible nu: (1+nu)*gamma < 1 has no solution; need "
                f"beta > 4*sigma^2*V + 2*sigma^2*delta*(1+2V)^2 = "
                f"{base + 2 * sigma_sq * delta * (1 + 2 * v) ** 2:g} or V > 0.5"
            )


def sure(y, est, sigma_sq):
    """Stein unbiased risk estimate ``||y - P y||^2 + 2 sigma^2 tr(P) - n sigma^2``.

    ``y`` may hold several observations along its first axis.
    """
    sigma_sq = check_positive(sigma_sq, "sigma_sq")
    y = check_vector(y, est.n)
    resid = y - est.apply(y)
    return np.sum(resid**2, axis=-1) + 2 * sigma_sq * est.trace - est.n * sigma_sq


def tilde_sup_norm(f0, coll):
    """Smallest ``C >= 0`` with ``||P_t f0||^2 <= C^2 tr(P_t^2)`` for every ``t``."""
    f0 = check_vector(f0, coll.n, "f0")
    best = 0.0
    for est, tr_sq in zip(coll, coll.traces_sq):
        if tr_sq > 0:
            best = max(best, float(np.linalg.norm(est.apply(f0))) / math.sqrt(tr_sq))
    return best


def gamma(beta, delta, sigma_sq, v):
    """Bias/residual trade-off constant; zero when ``delta == 0``.

    Evaluated as ``8 sigma^2 delta / (sqrt(a) + sqrt(b))^2`` with
    ``a = beta - 4 sigma^2 V`` and ``b = beta - 4 sigma^2 V (1 + 4 delta)``,
    which is algebraically equal to the difference-of-roots form but free of
    cancellation for large ``beta``.
    """
    check_temperature(beta, 0.0, sigma_sq, v)
    if delta == 0:
        return 0.0
    a = beta - 4 * sigma_sq * v
    b = beta - 4 * sigma_sq * v * (1 + 4 * delta)
    if b < 0:
        raise DomainError(
            f"temperature violates beta >= 4*sigma^2*V*(1+4*delta) = "
            f"{4 * sigma_sq * v * (1 + 4 * delta):g} (beta={beta:g}, delta={delta:g})"
        )
    return 8 * sigma_sq * delta / (math.sqrt(a) + math.sqrt(b)) ** 2


def _bias_factor(cfg, C):
    """``(1 - delta) (1 + 2 gamma V)^2 C^2 / sigma^2``."""
    g = cfg.gamma
    return (1 - cfg.delta) * (1 + 2 * g * cfg.v_bound) ** 2 * C**2 / cfg.sigma_sq


def _traces(est):
    if hasattr(est, "traces"):
        return np.asarray(est.traces), np.asarray(est.traces_sq)
    return est.trace, est.trace_sq


def min_penalty(est, cfg, C):
    """Smallest penalty for which the oracle bound of ``cfg``'s rule is valid.

    ``est`` may be a single estimator or a whole collection (vectorised).
    """
    C = check_positive(C, "C", strict=False)
    tr, tr_sq = _traces(est)
    s2 = cfg.sigma_sq
    if cfg.is_gaussian_rule:
        return _gaussian_min_penalty(tr, cfg.beta, cfg.delta, s2, C)
    return 4 * s2 / (cfg.beta - 4 * s2 * cfg.v_bound) * (1 + _bias_factor(cfg, C)) * tr_sq * s2


def penalty(est, cfg, C):
    """Penalty actually used inside the weights: the minimum, or ``kappa tr(P^2) sigma^2``."""
    if cfg.penalty_rule == "custom":
        _, tr_sq = _traces(est)
        return cfg.kappa * tr_sq * cfg.sigma_sq
    return min_penalty(est, cfg, C)


def _gaussian_min_penalty(tr, beta, delta, sigma_sq, C):
    return 2 * sigma_sq**2 / (beta - 4 * sigma_sq) * (1 + 2 * (1 - delta) * C**2 / sigma_sq) * tr


def min_penalty_gaussian_projection(est, beta, delta, sigma_sq, C):
    if not est.is_projection:
        raise ValidationError(
            f"estimator {est.label!r} is not an orthogonal projection"
        )
    check_temperature(beta, delta, sigma_sq, 1.0, "gaussian_projection")
    return _gaussian_min_penalty(est.trace, beta, delta, sigma_sq, C)


def price(est, cfg, C):
    """Additive cost attached to estimator ``t`` in the oracle bound."""
    C = check_positive(C, "C", strict=False)
    tr, tr_sq = _traces(est)
    s2 = cfg.sigma_sq
    if cfg.is_gaussian_rule:
        return 2 * (1 + 2 * (1 - cfg.delta) * s2 / (cfg.beta - 4 * s2) * C**2 / s2) * tr * s2
    return 2 * s2 * (tr + 2 * s2 / (cfg.beta - 4 * s2 * cfg.v_bound) * _bias_factor(cfg, C) * tr_sq)


def weak_inequality_holds(kappa, beta, sigma_sq, v):
    """Whether ``pen = kappa tr(P^2) sigma^2`` is large enough for the weak bound."""
    return kappa >= 4 * sigma_sq / (beta - 4 * sigma_sq * v)


def exact_inequality_holds(kappa, beta, sigma_sq, v, C, delta=0.0):
    """Whether ``pen = kappa tr(P^2) sigma^2`` is large enough at interpolation ``delta``.

    With ``delta = 0`` this is the condition for the sharp (leading constant
    one) inequality; larger ``delta`` relaxes the signal-dependent term.
    """
    g = gamma(beta, delta, sigma_sq, v)
    lhs = (beta - 4 * sigma_sq * v) * kappa / (4 * sigma_sq) - 1
    return lhs >= (1 - delta) * (1 + 2 * g * v) ** 2 * C**2 / sigma_sq


def epsilons(nu, gamma):
    """Return ``(eps_prime, eps)`` for ``nu`` in ``N = {nu > 0 : (1+nu) gamma < 1}``."""
    if not nu > 0 or not (1 + nu) * gamma < 1:
        raise DomainError(f"nu={nu!r} is outside N for gamma={gamma!r}: need nu > 0 and (1+nu)*gamma < 1")
    s = 1 - (1 + nu) * gamma
    return 1 / s - 1, (1 + nu) ** 2 * gamma / (nu * s)


def gaussian_epsilon(beta, delta, sigma_sq):
    check_temperature(beta, delta, sigma_sq, 1.0, "gaussian_projection")
    return 4 * sigma_sq * delta / (beta - 4 * sigma_sq * (delta + 1))


class NuChoice(NamedTuple):
    nu: Optional[float]  # None means any nu > 0 is optimal
    eps_prime: float
    eps: float
    objective: float


def _golden_section(f, lo, hi, tol, max_iter=200):
    invphi = (math.sqrt(5) - 1) / 2
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def optimize_nu(gamma, A, B, K, n_scan=64):
    """Minimise ``(1+eps(nu)) A + (1+eps'(nu)) (B + K)`` over ``N``.

    A coarse geometric scan brackets the minimum, then golden-section search
    refines it inside the bracket.
    """
    if gamma < 0:
        raise DomainError(f"gamma must be nonnegative, got {gamma!r}")
    if gamma == 0:
        return NuChoice(None, 0.0, 0.0, A + B + K)
    upper = 1 / gamma - 1
    if not upper > 0:
        raise DomainError(f"N is empty for gamma={gamma!r}")

    def objective(nu):
        ep, e = epsilons(nu, gamma)
        return (1 + e) * A + (1 + ep) * (B + K)

    lo, hi = upper * _NU_MARGIN, upper * (1 - _NU_MARGIN)
    grid = np.geomspace(lo, hi, n_scan)
    slack = 1 - (1 + grid) * gamma
    values = (1 + (1 + grid) ** 2 * gamma / (grid * slack)) * A + (B + K) / slack
    i = int(np.argmin(values))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, n_scan - 1)]
    nu, _ = _golden_section(objective, a, b, tol=1e-12 * max(b, 1e-300))
    if values[i] < objective(nu):
        nu = grid[i]
    ep, e = epsilons(nu, gamma)
    return NuChoice(float(nu), ep, e, objective(nu))


@dataclass(frozen=True)
class BoundConstants:
    """Per-configuration constants plus per-estimator penalties and prices."""

    gamma: float
    pen_min: np.ndarray
    pen: np.ndarray
    price: np.ndarray
    C: float
    eps_gaussian: Optional[float] = None


def bound_constants(coll, cfg, C):
    if cfg.is_gaussian_rule and not coll.all_projections:
        raise ValidationError("penalty_rule 'gaussian_projection' needs projection estimators")
    if not cfg.is_gaussian_rule and float(coll.spec_norms.max()) > cfg.v_bound:
        raise DomainError(
            f"cfg.v_bound={cfg.v_bound:g} is below max_t ||P_t||_2 = {coll.spec_norms.max():g}"
        )
    pen_min = np.asarray(min_penalty(coll, cfg, C), dtype=float)
    pen = np.asarray(penalty(coll, cfg, C), dtype=float)
    eps_g = gaussian_epsilon(cfg.beta, cfg.delta, cfg.sigma_sq) if cfg.is_gaussian_rule else None
    return BoundConstants(cfg.gamma, pen_min, pen, np.asarray(price(coll, cfg, C), dtype=float), C, eps_g)


def check_penalties(pen, pen_min):
    pen = np.asarray(pen, dtype=float)
    short = pen < pen_min * (1 - _PEN_RTOL)
    if np.any(short):
        t = int(np.flatnonzero(short)[0])
        raise ValidationError(
            f"penalty for estimator {t} is {pen[t]!r}, below the minimum {pen_min[t]!r}"
        )
    return pen


class DiracBound(NamedTuple):
    rhs: float
    nu: Optional[float]
    eps: float
    eps_prime: float
    kl_term: float


def dirac_bound(risk, pen, price_t, prior_t, cfg, gamma=None, expectation=False):
    """Right-hand side of the oracle bound for ``mu`` a point mass at one estimator.

    ``KL(delta_t, pi) = ln(1/pi(t))``. With ``expectation=True`` the
    ``ln(1/eta)`` term is dropped, giving the in-expectation display.
    """
    if prior_t <= 0:
        return DiracBound(math.inf, None, 0.0, 0.0, math.inf)
    kl = -math.log(prior_t)
    conf = 0.0 if expectation else cfg.log_inv_eta
    kl_term = cfg.beta * (2 * kl + conf)
    if cfg.is_gaussian_rule:
        e = gaussian_epsilon(cfg.beta, cfg.delta, cfg.sigma_sq)
        rhs = (1 + 2 * e) * risk + (1 + e) * (pen + price_t + kl_term)
        return DiracBound(float(rhs), None, 2 * e, e, kl_term)
    g = cfg.gamma if gamma is None else gamma
    choice = optimize_nu(g, risk, pen + price_t, kl_term)
    return DiracBound(float(choice.objective), choice.nu, choice.eps, choice.eps_prime, kl_term)


def bound_rhs(coll, cfg, C, t_star, risks, pen, expectation=False):
    """Oracle bound evaluated at ``mu = delta_{t_star}``, optimised over ``nu``."""
    consts = bound_constants(coll, cfg, C)
    pen = check_penalties(pen, consts.pen_min)
    risks = np.asarray(risks, dtype=float)
    return dirac_bound(
        float(risks[t_star]), float(pen[t_star]), float(consts.price[t_star]),
        float(coll.prior[t_star]), cfg, consts.gamma, expectation,
    )


def oracle_bound(coll, cfg, C, risks, pen, expectation=False):
    """Best bound over Dirac masses. Returns ``(t_star, DiracBound)``."""
    consts = bound_constants(coll, cfg, C)
    pen = check_penalties(pen, consts.pen_min)
    risks = np.asarray(risks, dtype=float)
    best_t, best = None, None
    for t in range(len(coll)):
        b = dirac_bound(float(risks[t]), float(pen[t]), float(consts.price[t]),
                        float(coll.prior[t]), cfg, consts.gamma, expectation)
        if best is None or b.rhs < best.rhs:
            best_t, best = t, b
    return best_t, best
