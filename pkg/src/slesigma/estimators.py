"""scikit-learn style wrappers around the stationary density and the phase classifier."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from .model import validate_sigma
from .phases import LABELS, classify
from .stationary import DEFAULT_GRID, stationary_density


class StationaryDensityEstimator(BaseEstimator):
    """Angular stationary density for a fixed ``(a, b, c)``.

    Mirrors the interface of ``sklearn.neighbors.KernelDensity``: ``fit``
    builds the grid, ``score_samples`` returns log densities and ``sample``
    draws angles in ``[0, pi)``.  The density depends only on the
    hyper-parameters, so ``X`` is ignored by ``fit``.

    Examples
    --------
    >>> est = StationaryDensityEstimator(a=5.0, b=1.0, c=0.0).fit()
    >>> est.sample(3, random_state=0).shape
    (3, 1)
    """

    def __init__(self, a=1.0, b=1.0, c=0.0, grid=DEFAULT_GRID):
        self.a = a
        self.b = b
        self.c = c
        self.grid = grid

    def fit(self, X=None, y=None):
        self.sigma_ = validate_sigma(self.a, self.b, self.c)
        self.density_ = stationary_density(self.sigma_, self.grid)
        self.r_star_ = self.density_.r_star
        return self

    def score_samples(self, X):
        check_is_fitted(self, "density_")
        X = check_array(X, ensure_2d=False).reshape(-1)
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(self.density_(X), 0.0))

    def score(self, X, y=None):
        return float(np.sum(self.score_samples(X)))

    def sample(self, n_samples=1, random_state=None):
        check_is_fitted(self, "density_")
        rng = check_random_state(random_state)
        u, cdf = self.density_.cdf_half()
        return np.interp(rng.random_sample(n_samples), cdf, u).reshape(-1, 1)


class PhaseClassifier(ClassifierMixin, TransformerMixin, BaseEstimator):
    """Label rows ``(a, b, c)`` as thin / swallowing / hitting / dense.

    Nothing is learned: ``fit`` only checks the input and records the label
    set.  ``transform`` returns the phase integrals ``(I, II)`` per row (NaN
    where no angular density exists, i.e. ``a = 0`` or ``b = 0``).
    """

    def __init__(self, grid=DEFAULT_GRID, tol_zero=None):
        self.grid = grid
        self.tol_zero = tol_zero

    def fit(self, X, y=None):
        X = check_array(X)
        if X.shape[1] != 3:
            raise ValueError(f"expected 3 columns (a, b, c), got {X.shape[1]}")
        self.n_features_in_ = 3
        self.classes_ = np.array(LABELS, dtype=object)
        return self

    def _reports(self, X):
        check_is_fitted(self, "classes_")
        X = check_array(X)
        if X.shape[1] != 3:
            raise ValueError(f"expected 3 columns (a, b, c), got {X.shape[1]}")
        return [classify(validate_sigma(*row), self.tol_zero, self.grid) for row in X]

    def predict(self, X):
        return np.array([r.label for r in self._reports(X)], dtype=object)

    def transform(self, X):
        reps = self._reports(X)
        return np.array([[np.nan if r.I is None else r.I,
                          np.nan if r.II is None else r.II] for r in reps])

    def decision_function(self, X):
        return self.transform(X)
