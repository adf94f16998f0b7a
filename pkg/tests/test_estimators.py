import math

import numpy as np
import pytest
from sklearn.base import clone

from slesigma.estimators import PhaseClassifier, StationaryDensityEstimator
from slesigma.model import SigmaError, validate_sigma
from slesigma.stationary import stationary_density


def test_density_estimator_matches_function():
    est = StationaryDensityEstimator(a=2.0, b=1.0, c=0.5).fit()
    d = stationary_density(validate_sigma(2, 1, 0.5))
    u = np.linspace(0, 3, 7)
    np.testing.assert_allclose(np.exp(est.score_samples(u.reshape(-1, 1))), d(u), rtol=1e-12)
    assert est.score(u) == pytest.approx(np.sum(np.log(d(u))))
    assert est.r_star_ == d.r_star


def test_density_estimator_sampling_and_params():
    est = StationaryDensityEstimator(a=5.0, b=1.0)
    assert est.get_params() == {"a": 5.0, "b": 1.0, "c": 0.0, "grid": 2048}
    est.fit()
    x = est.sample(1000, random_state=0)
    assert x.shape == (1000, 1) and x.min() >= 0 and x.max() < math.pi
    np.testing.assert_array_equal(x, est.sample(1000, random_state=0))
    other = clone(est).set_params(c=1.0)
    assert other.c == 1.0 and not hasattr(other, "density_")


def test_density_estimator_validates():
    with pytest.raises(SigmaError):
        StationaryDensityEstimator(a=1, b=1, c=2).fit()


def test_phase_classifier():
    X = np.array([[2, 2, 0], [7, 1, 0], [9, 1, 0], [2, 1, 0.5], [6, 0, 0]], dtype=float)
    clf = PhaseClassifier().fit(X)
    labels = clf.predict(X)
    assert list(labels[:3]) == ["thin", "swallowing", "hitting"]
    assert labels[4] == "swallowing"
    T = clf.transform(X)
    assert T.shape == (5, 2) and np.isnan(T[4]).all()
    assert abs(T[2, 1]) < 1e-9
    assert clf.score(X[:3], ["thin", "swallowing", "hitting"]) == 1.0
    with pytest.raises(ValueError):
        clf.fit(X[:, :2])
