"""scikit-learn compatible front end for exponentially weighted aggregation."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ewa.aggregation import gibbs_weights
from ewa.estimators import make_collection
from ewa.risk import AggregationConfig, bound_constants


class EWAggregator(TransformerMixin, BaseEstimator):
    """Aggregate a collection of linear smoothers with penalized Gibbs weights.

    The design is fixed, so a single observation vector ``Y`` of length ``n``
    plays the role of the training data. ``fit`` computes Stein risks,
    penalties and weights; ``transform`` applies the fitted convex
    combination ``sum_t w_t P_t`` to new observation vectors.

    Parameters
    ----------
    collection : EstimatorCollection, default=None
        Estimators to aggregate. ``None`` builds nested cosine projections of
        dyadic ranks at fit time.
    beta : float, default=20.0
        Temperature.
    delta : float, default=1.0
        Interpolation between the sharp (0) and weak (1) regimes.
    sigma_sq : float, default=1.0
        Known sub-Gaussian noise parameter.
    penalty_rule : {"theorem1", "gaussian_projection", "custom"}, default="theorem1"
    kappa : float, default=None
        Penalty multiplier for ``penalty_rule="custom"``.
    sup_norm : float, default=0.0
        Upper bound on the signal's peak coefficient size; only enters the
        penalty when ``delta < 1``.
    eta : float, default=0.05

    Attributes
    ----------
    collection_ : EstimatorCollection
    risks_ : ndarray of shape (n_estimators,)
        Stein unbiased risk estimates.
    penalties_ : ndarray of shape (n_estimators,)
    weights_ : ndarray of shape (n_estimators,)
    fitted_ : ndarray of shape (n,)
        The aggregate ``f_EWA`` evaluated on the observation used in ``fit``.
    """

    def __init__(self, collection=None, beta=20.0, delta=1.0, sigma_sq=1.0,
                 penalty_rule="theorem1", kappa=None, sup_norm=0.0, eta=0.05):
        self.collection = collection
        self.beta = beta
        self.delta = delta
        self.sigma_sq = sigma_sq
        self.penalty_rule = penalty_rule
        self.kappa = kappa
        self.sup_norm = sup_norm
        self.eta = eta

    def _check_y(self, X, n=None):
        y = check_array(X, ensure_2d=False, dtype=np.float64)
        if y.ndim == 2:
            if y.shape[0] != 1:
                raise ValueError("fit expects a single observation vector")
            y = y[0]
        if n is not None and y.shape[0] != n:
            raise ValueError(f"observation has length {y.shape[0]}, expected {n}")
        return y

    def fit(self, X, y=None):
        """Fit weights on the observation vector ``X``; ``y`` is ignored."""
        obs = self._check_y(X)
        coll = self.collection
        if coll is None:
            coll = make_collection(obs.shape[0])
        obs = self._check_y(obs, coll.n)
        cfg = AggregationConfig(
            beta=self.beta, delta=self.delta, eta=self.eta,
            penalty_rule=self.penalty_rule, sigma_sq=self.sigma_sq,
            v_bound=coll.v_bound, kappa=self.kappa,
        )
        consts = bound_constants(coll, cfg, float(self.sup_norm))
        fits = coll.apply_all(obs)
        resid = np.sum((obs - fits) ** 2, axis=1)
        self.risks_ = resid + 2 * cfg.sigma_sq * coll.traces - coll.n * cfg.sigma_sq
        self.penalties_ = consts.pen
        w = gibbs_weights(self.risks_ + self.penalties_, cfg.beta, coll.prior)
        self.weights_ = w.weights
        self.log_weights_ = w.log_weights
        self.fitted_ = self.weights_ @ fits
        self.collection_ = coll
        self.config_ = cfg
        self.n_features_in_ = coll.n
        return self

    def transform(self, X):
        """Apply ``sum_t w_t P_t`` to each row of ``X``."""
        check_is_fitted(self, "weights_")
        Z = check_array(X, ensure_2d=False, dtype=np.float64)
        if Z.shape[-1] != self.n_features_in_:
            raise ValueError(
                f"X has {Z.shape[-1]} features, expected {self.n_features_in_}"
            )
        return np.tensordot(self.weights_, self.collection_.apply_all(Z), axes=1)

    def predict(self, X=None):
        """Aggregate estimate; the fitted one when ``X`` is omitted."""
        check_is_fitted(self, "fitted_")
        if X is None:
            return self.fitted_
        return self.transform(X)
