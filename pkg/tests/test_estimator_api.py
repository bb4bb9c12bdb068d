import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from ewa import EWAggregator
from ewa.aggregation import aggregate, gibbs_weights
from ewa.risk import AggregationConfig, min_penalty, sure


def _obs(seed=0, n=64):
    r = np.random.default_rng(seed)
    x = np.arange(1, n + 1) / n
    return 3 * np.sin(4 * np.pi * x) + r.normal(size=n)


def test_get_set_params():
    est = EWAggregator(beta=24.0)
    params = est.get_params()
    assert params["beta"] == 24.0 and params["delta"] == 1.0
    est.set_params(delta=0.5)
    assert clone(est).delta == 0.5


def test_fit_matches_functional_api(nested64):
    y = _obs()
    est = EWAggregator(collection=nested64, beta=20.0).fit(y)
    cfg = AggregationConfig(beta=20.0, v_bound=nested64.v_bound)
    r = np.array([sure(y, e, 1.0) for e in nested64])
    np.testing.assert_allclose(est.risks_, r, rtol=1e-12)
    pen = min_penalty(nested64, cfg, 0.0)
    w = gibbs_weights(r + pen, 20.0, nested64.prior).weights
    np.testing.assert_allclose(est.weights_, w, rtol=1e-10)
    np.testing.assert_allclose(est.predict(), aggregate(w, nested64, y), rtol=1e-10)


def test_default_collection():
    est = EWAggregator().fit(_obs(n=32))
    assert len(est.collection_) == 6
    assert est.fitted_.shape == (32,)


def test_transform_batch(nested64):
    est = EWAggregator(collection=nested64).fit(_obs(1))
    Z = np.random.default_rng(2).normal(size=(3, 64))
    out = est.transform(Z)
    assert out.shape == (3, 64)
    np.testing.assert_allclose(out[1], est.transform(Z[1]))
    np.testing.assert_allclose(est.fit_transform(_obs(1)), est.fitted_)


def test_not_fitted():
    with pytest.raises(NotFittedError):
        EWAggregator().predict()


def test_input_validation(nested64):
    with pytest.raises(ValueError):
        EWAggregator(collection=nested64).fit(np.ones(10))
    with pytest.raises(ValueError):
        EWAggregator(collection=nested64).fit(np.ones((2, 64)))
    with pytest.raises(ValueError):
        EWAggregator(beta=10.0).fit(_obs())
    est = EWAggregator(collection=nested64).fit(_obs())
    with pytest.raises(ValueError):
        est.transform(np.ones(5))
