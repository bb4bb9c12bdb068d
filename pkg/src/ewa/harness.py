"""Monte Carlo verification of the oracle inequalities and deviation bounds."""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ewa._validation import DomainError, ValidationError, check_probability, check_vector
from ewa.aggregation import gibbs_weights, kl_divergence
from ewa.noise import rng_for
from ewa.risk import (
    bound_constants,
    check_penalties,
    dirac_bound,
    tilde_sup_norm,
)

SIGNAL_KINDS = ("zero", "sinusoid", "mix", "step", "custom")
# the MC slack used whenever an empirical mean is compared to a bound
N_STDERR = 3.0


@dataclass(frozen=True)
class SignalSpec:
    """Deterministic signal on the grid ``x_i = i / n``, ``i = 1..n``.

    ``sinusoid`` is ``amplitude * sin(2 pi f x)`` with ``f = frequencies[0]``,
    ``mix`` sums one such term per frequency, ``step`` jumps from 0 to
    ``amplitude`` at ``x = 1/2`` and ``custom`` uses ``values`` verbatim.
    """

    kind: str = "sinusoid"
    n: int = 64
    amplitude: float = 3.0
    frequencies: tuple = (2.0,)
    values: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise ValidationError(f"unknown signal kind {self.kind!r}; choose from {SIGNAL_KINDS}")
        if self.n < 1:
            raise ValidationError(f"n must be positive, got {self.n}")
        object.__setattr__(self, "frequencies", tuple(float(f) for f in self.frequencies))
        if self.kind == "custom":
            if self.values is None or len(self.values) != self.n:
                raise ValidationError(f"custom signal needs exactly n={self.n} values")
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        elif not self.frequencies and self.kind in ("sinusoid", "mix"):
            raise ValidationError(f"{self.kind} signal needs at least one frequency")

    @property
    def grid(self):
        return np.arange(1, self.n + 1) / self.n

    def vector(self):
        x = self.grid
        if self.kind == "zero":
            return np.zeros(self.n)
        if self.kind == "sinusoid":
            return self.amplitude * np.sin(2 * np.pi * self.frequencies[0] * x)
        if self.kind == "mix":
            return self.amplitude * sum(np.sin(2 * np.pi * f * x) for f in self.frequencies)
        if self.kind == "step":
            return self.amplitude * (x > 0.5).astype(float)
        return np.array(self.values)


def _signal_vector(signal, n):
    f0 = signal.vector() if isinstance(signal, SignalSpec) else signal
    return check_vector(f0, n, "f0")


def trial_seed(master_seed, index):
    """Stable 63-bit seed for trial ``index`` of an experiment."""
    state = np.random.SeedSequence([int(master_seed), int(index)]).generate_state(2, np.uint64)
    return int(state[0] >> np.uint64(1))


@dataclass(frozen=True, eq=False)
class TrialResult:
    """Outcome of one draw: the aggregate's loss against the best Dirac bound."""

    seed: int
    lhs: float
    rhs: float
    holds: bool
    best_t: int
    nu_star: Optional[float]
    eps: float
    eps_prime: float
    gamma: float
    weights: np.ndarray
    risk: np.ndarray  # ||f0 - P_t Y||^2
    sure: np.ndarray
    pen: np.ndarray
    price: np.ndarray
    kl_term: np.ndarray
    rhs_t: np.ndarray

    @property
    def pen_total(self):
        return float(self.pen[self.best_t])

    @property
    def price_total(self):
        return float(self.price[self.best_t])

    @property
    def best_kl_term(self):
        return float(self.kl_term[self.best_t])

    @property
    def jensen_gap(self):
        """``sum_t w_t risk_t - lhs``; nonnegative by convexity."""
        return float(self.weights @ self.risk) - self.lhs


@dataclass(frozen=True)
class ExperimentReport:
    n_trials: int
    n_holds: int
    mean_lhs: float
    stderr_lhs: float
    expectation_rhs: float
    target: float
    trials: tuple = field(default=(), repr=False, compare=False)

    @property
    def empirical_coverage(self):
        return self.n_holds / self.n_trials

    coverage = empirical_coverage

    @property
    def coverage_ok(self):
        return bool(self.empirical_coverage >= self.target)

    @property
    def expectation_ok(self):
        return bool(self.mean_lhs <= self.expectation_rhs)


class _Setup:
    """Quantities shared by every trial of one (signal, collection, noise, cfg)."""

    def __init__(self, signal, coll, noise, cfg, pen=None):
        if not math.isclose(cfg.sigma_sq, noise.sigma_sq, rel_tol=1e-12):
            raise DomainError(
                f"cfg.sigma_sq={cfg.sigma_sq!r} differs from the noise parameter {noise.sigma_sq!r}"
            )
        if cfg.is_gaussian_rule and noise.kind != "gaussian":
            raise DomainError("penalty_rule 'gaussian_projection' requires Gaussian noise")
        self.f0 = _signal_vector(signal, coll.n)
        self.coll, self.noise, self.cfg = coll, noise, cfg
        self.C = tilde_sup_norm(self.f0, coll)
        self.consts = bound_constants(coll, cfg, self.C)
        self.pen = self.consts.pen if pen is None else check_penalties(pen, self.consts.pen_min)
        self.offset = 2 * cfg.sigma_sq * coll.traces - coll.n * cfg.sigma_sq

    def bounds(self, risks, expectation=False):
        cfg, c = self.cfg, self.consts
        return [
            dirac_bound(float(risks[t]), float(self.pen[t]), float(c.price[t]),
                        float(self.coll.prior[t]), cfg, c.gamma, expectation)
            for t in range(len(self.coll))
        ]

    def expected_risks(self):
        """``E ||f0 - P_t Y||^2 = ||(I - P_t) f0||^2 + var * tr(P_t^2)``."""
        bias = self.f0 - self.coll.apply_all(self.f0)
        return np.sum(bias**2, axis=1) + self.noise.variance * self.coll.traces_sq


def run_trial(signal, coll, noise, cfg, seed, pen=None, _setup=None):
    """Draw ``Y = f0 + W``, aggregate, and compare the loss to the oracle bound."""
    s = _setup or _Setup(signal, coll, noise, cfg, pen)
    W = noise.sample(rng_for(seed), (coll.n,))
    Y = s.f0 + W
    fits = coll.apply_all(Y)
    risk = np.sum((s.f0 - fits) ** 2, axis=1)
    r = np.sum((Y - fits) ** 2, axis=1) + s.offset
    w = gibbs_weights(r + s.pen, cfg.beta, coll.prior)
    f_ewa = w.weights @ fits
    lhs = float(np.sum((s.f0 - f_ewa) ** 2))
    bounds = s.bounds(risk)
    rhs_t = np.array([b.rhs for b in bounds])
    best = int(np.argmin(rhs_t))
    b = bounds[best]
    return TrialResult(
        seed=int(seed), lhs=lhs, rhs=float(b.rhs), holds=bool(lhs <= b.rhs), best_t=best, nu_star=b.nu,
        eps=b.eps, eps_prime=b.eps_prime, gamma=s.consts.gamma, weights=w.weights,
        risk=risk, sure=r, pen=s.pen, price=s.consts.price,
        kl_term=np.array([x.kl_term for x in bounds]), rhs_t=rhs_t,
    )


def expectation_rhs(signal, coll, noise, cfg, pen=None, _setup=None):
    """In-expectation bound: true risks, doubled KL and no confidence term."""
    s = _setup or _Setup(signal, coll, noise, cfg, pen)
    return float(min(b.rhs for b in s.bounds(s.expected_risks(), expectation=True)))


def run_experiment(signal, coll, noise, cfg, n_trials, master_seed, pen=None, map_fn=map):
    """Run ``n_trials`` independent trials with seeds derived from ``master_seed``.

    ``map_fn`` may be an executor's ``map`` to run trials concurrently; the
    report only depends on the multiset of trial results.
    """
    if n_trials < 1:
        raise ValidationError(f"n_trials must be at least 1, got {n_trials}")
    s = _Setup(signal, coll, noise, cfg, pen)
    seeds = [trial_seed(master_seed, i) for i in range(n_trials)]
    trials = tuple(map_fn(lambda sd: run_trial(None, coll, noise, cfg, sd, _setup=s), seeds))
    lhs = np.array([t.lhs for t in trials])
    stderr = float(lhs.std(ddof=1) / math.sqrt(n_trials)) if n_trials > 1 else 0.0
    return ExperimentReport(
        n_trials=n_trials,
        n_holds=int(sum(t.holds for t in trials)),
        mean_lhs=float(lhs.mean()),
        stderr_lhs=stderr,
        expectation_rhs=expectation_rhs(None, coll, noise, cfg, _setup=s),
        target=1 - cfg.eta,
        trials=trials,
    )


def delta_tu(f0, fits_t, fits_u, Y, r_t, r_u):
    """``Delta_{t,u} = ||f0 - P_t Y||^2 - r_t - ||f0 - P_u Y||^2 + r_u`` (batched)."""
    return (np.sum((f0 - fits_t) ** 2, axis=-1) - r_t
            - np.sum((f0 - fits_u) ** 2, axis=-1) + r_u)


def deviation_margin(signal, coll, noise, cfg, rho, mu, seed, nu=1.0):
    """Slack (rhs - lhs) of the in-probability deviation inequality for one draw.

    The left side is ``sum_{t,u} rho_t mu_u Delta_{t,u}``. Under the
    ``gaussian_projection`` rule the projection/Gaussian constants are used,
    otherwise the general sub-Gaussian ones with free parameter ``nu``.
    A nonnegative margin means the inequality held on this draw.
    """
    s = _Setup(signal, coll, noise, cfg)
    m = len(coll)
    rho = check_probability(rho, "rho", m)
    mu = check_probability(mu, "mu", m)
    if not nu > 0:
        raise DomainError(f"nu must be positive, got {nu!r}")
    Y = s.f0 + noise.sample(rng_for(seed), (coll.n,))
    fits = coll.apply_all(Y)
    R = np.sum((s.f0 - fits) ** 2, axis=1)
    r = np.sum((Y - fits) ** 2, axis=1) + s.offset
    lhs = float(rho @ (R - r) - mu @ (R - r))

    b, s2, d, C = cfg.beta, cfg.sigma_sq, cfg.delta, s.C
    kl = kl_divergence(rho, coll.prior) + kl_divergence(mu, coll.prior) + cfg.log_inv_eta
    tr, tr_sq = coll.traces, coll.traces_sq
    if cfg.is_gaussian_rule:
        k = 4 * s2 / (b - 4 * s2)
        rhs = (k * d * (rho @ R + mu @ R)
               + k * (s2 + (1 - d) * C**2) * (rho @ tr)
               + 2 * s2 * (1 + 2 * (1 - d) * C**2 / (b - 4 * s2)) * (mu @ tr))
    else:
        g, V = s.consts.gamma, cfg.v_bound
        q = (1 + 2 * g * V) ** 2
        denom = b - 4 * s2 * V
        rhs = ((1 + nu) * g * (rho @ R)
               + 4 * s2 / denom * (s2 + (1 - d) * q * C**2) * (rho @ tr_sq)
               + 2 * s2 * ((mu @ tr) + 2 * (1 - d) * q / denom * C**2 * (mu @ tr_sq))
               + (1 + 1 / nu) * g * (mu @ R))
    rhs += b * kl
    return float(rhs - lhs)


def exp_moment_bound(t, u, f0, coll, cfg, form, C=None):
    """Closed-form upper bound on the exponential moment for the pair ``(t, u)``."""
    b, s2 = cfg.beta, cfg.sigma_sq
    tr, tr_sq = coll.traces, coll.traces_sq
    if form == "gaussian":
        if not b > 4 * s2:
            raise DomainError(f"temperature must exceed 4*sigma^2 = {4 * s2:g}")
        diff = coll[t].apply(f0) - coll[u].apply(f0)
        return math.exp(2 * s2 / b * (tr[u] + (2 * s2 * tr[t] + diff @ diff) / (b - 4 * s2)))
    V, d = cfg.v_bound, cfg.delta
    g = 0.0 if cfg.is_gaussian_rule else cfg.gamma
    C = tilde_sup_norm(f0, coll) if C is None else C
    denom = b - 4 * s2 * V
    q = (1 + 2 * g * V) ** 2
    return math.exp(2 * s2 / b * (tr[u] + 2 * s2 / denom * tr_sq[t]
                                  + 2 * q * (1 - d) / denom * (tr_sq[t] + tr_sq[u]) * C**2))


def exp_moment_check(t, u, signal, coll, noise, cfg, samples, seed, form=None, nu=1.0,
                     chunk=100_000):
    """Monte Carlo check of the exponential-moment bound on ``Delta_{t,u}``.

    ``form="gaussian"`` (projections, Gaussian noise) checks
    ``E exp(Delta/beta)``. ``form="general"`` checks
    ``E exp(Delta/beta - gamma/beta ((1+nu) R_t + (1+1/nu) R_u))`` where
    ``R_t = ||P_t Y - f0||^2``. The default picks the form from
    ``cfg.penalty_rule``.
    """
    form = form or ("gaussian" if cfg.is_gaussian_rule else "general")
    if form not in ("gaussian", "general"):
        raise ValidationError(f"unknown form {form!r}")
    if form == "gaussian" and not (coll[t].is_projection and coll[u].is_projection):
        raise ValidationError("the Gaussian form needs projection estimators")
    if not nu > 0:
        raise DomainError(f"nu must be positive, got {nu!r}")
    if not math.isclose(cfg.sigma_sq, noise.sigma_sq, rel_tol=1e-12):
        raise DomainError("cfg.sigma_sq differs from the noise parameter")
    f0 = _signal_vector(signal, coll.n)
    bound = exp_moment_bound(t, u, f0, coll, cfg, form)
    g = cfg.gamma if form == "general" and not cfg.is_gaussian_rule else 0.0
    Pt, Pu = coll[t], coll[u]
    s2, n = cfg.sigma_sq, coll.n
    rng = rng_for(seed)
    total = total_sq = 0.0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        Y = f0 + noise.sample(rng, (m, n))
        ft, fu = Pt.apply(Y), Pu.apply(Y)
        r_t = np.sum((Y - ft) ** 2, axis=1) + 2 * s2 * Pt.trace - n * s2
        r_u = np.sum((Y - fu) ** 2, axis=1) + 2 * s2 * Pu.trace - n * s2
        z = delta_tu(f0, ft, fu, Y, r_t, r_u) / cfg.beta
        if g > 0:
            z -= g / cfg.beta * ((1 + nu) * np.sum((ft - f0) ** 2, axis=1)
                                 + (1 + 1 / nu) * np.sum((fu - f0) ** 2, axis=1))
        e = np.exp(z)
        total += float(e.sum())
        total_sq += float((e**2).sum())
        done += m
    mean = total / samples
    var = max(total_sq / samples - mean**2, 0.0)
    stderr = math.sqrt(var / max(samples - 1, 1))
    return {
        "t": t, "u": u, "form": form, "empirical": mean, "stderr": stderr,
        "bound": bound, "ok": bool(mean <= bound + N_STDERR * stderr),
    }


@dataclass(frozen=True)
class Scenario:
    name: str
    signal: SignalSpec
    collection: object
    noise: object
    cfg: object


def builtin_scenarios(ns=(32, 64), sigma=1.0, eta=0.05):
    """Default suite: low and high signal-to-noise signals against each regime.

    Regimes are the sharp general rule (``delta=0``, ``beta=8 sigma^2 V``),
    the weak general rule (``delta=1``, ``beta=20 sigma^2 V``) on nested
    projections and on linear tapers, and the projection/Gaussian rule at
    ``delta`` in {0, 0.5, 1} with ``beta = max(8, 5 (1 + delta)) sigma^2``.
    """
    from ewa.estimators import make_collection
    from ewa.noise import NoiseModel
    from ewa.risk import AggregationConfig

    noise = NoiseModel("gaussian", sigma)
    s2 = noise.sigma_sq
    out = []
    for n in ns:
        signals = {
            "zero": SignalSpec("zero", n),
            "sinusoid": SignalSpec("sinusoid", n, 3.0, (2.0,)),
            "mix": SignalSpec("mix", n, 2.0, (1.0, 3.0, 7.0)),
            "step": SignalSpec("step", n, 4.0),
        }
        families = {
            "proj": make_collection(n, "cosine", "projection"),
            "taper": make_collection(n, "cosine", "shrinkage"),
        }
        for sname, sig in signals.items():
            for fname, coll in families.items():
                V = coll.v_bound
                out.append(Scenario(f"n{n}-{sname}-{fname}-sharp", sig, coll, noise,
                                    AggregationConfig(8 * s2 * V, 0.0, eta, sigma_sq=s2, v_bound=V)))
                out.append(Scenario(f"n{n}-{sname}-{fname}-weak", sig, coll, noise,
                                    AggregationConfig(20 * s2 * V, 1.0, eta, sigma_sq=s2, v_bound=V)))
            for d in (0.0, 0.5, 1.0):
                out.append(Scenario(
                    f"n{n}-{sname}-proj-gauss{d:g}", sig, families["proj"], noise,
                    AggregationConfig(max(8.0, 5 * (1 + d)) * s2, d, eta,
                                      "gaussian_projection", sigma_sq=s2, v_bound=1.0),
                ))
    return out
