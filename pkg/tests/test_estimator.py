import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from exactwkb.estimator import ExactWKBEstimator
from exactwkb.problems import builtin


def test_params_and_clone():
    est = ExactWKBEstimator(theta=0.1, xi_n=80)
    params = est.get_params()
    assert params["theta"] == 0.1 and params["xi_n"] == 80
    twin = clone(est.set_params(order=3))
    assert twin.get_params() == est.get_params()


def test_predict_before_fit():
    with pytest.raises(NotFittedError):
        ExactWKBEstimator().predict([[1.0, 0.1]])


def test_predict_constant_q():
    est = ExactWKBEstimator(xi_n=40).fit("constant_q")
    X = np.array([[0.2, 0.1], [0.4, 0.1], [0.3, 0.2]])
    out = est.predict(X)
    x, hb = X[:, 0], X[:, 1]
    assert np.allclose(out[:, 0], np.exp(-x / hb), rtol=1e-12)
    assert np.allclose(out[:, 1], np.exp(x / hb), rtol=1e-12)


def test_custom_problem_needs_x0():
    with pytest.raises(ValueError):
        ExactWKBEstimator().fit(builtin("airy"))
    with pytest.raises(TypeError):
        ExactWKBEstimator().fit(3.0)


def test_bad_columns():
    est = ExactWKBEstimator(xi_n=40).fit("constant_q")
    with pytest.raises(ValueError):
        est.predict([[0.1, 0.2, 0.3]])
