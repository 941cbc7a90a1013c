"""Bayesian linear regression on random Fourier features.

The feature map is ``phi_x = cos(W x + b) / sqrt(m)`` with a fixed basis
``(W, b)`` and the predictive mean on training rows ``I`` is

    phi_*^T (Phi_I^T Phi_I + lam I)^-1 Phi_I^T y_I,

an ``m x m`` solve costing ``O(m^2 n + m^3)``.  The equivalent dual (kernel)
form is provided only as a small-instance cross-check.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ..errors import DimensionMismatch, FactorizationFailure


def draw_rff_basis(m: int, dim: int, rng: np.random.Generator, spectral_scale: float = 1.0):
    """Frequencies ``W ~ N(0, spectral_scale^2 I)`` (m x dim) and phases ``b ~ U(0, 2 pi)``."""
    w = spectral_scale * rng.standard_normal((m, dim))
    b = rng.uniform(0.0, 2 * math.pi, size=m)
    return w, b


def rff_features(X, w, b) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != w.shape[1]:
        raise DimensionMismatch(f"covariates have {X.shape[1]} columns, basis expects {w.shape[1]}")
    return np.cos(X @ w.T + b) / math.sqrt(len(b))


class RffRegressionModel:
    """Predictive means at ``X_test`` from a subset of ``(X, y)``.

    ``evaluate`` returns the vector of predictive means; training features
    are computed once up front.
    """

    functional_name = "predictive_mean"

    def __init__(self, X, y, w, b, lam: float, X_test):
        if not lam > 0:
            raise ValueError("noise variance lam must be positive")
        self.w, self.b, self.lam = np.asarray(w, dtype=float), np.asarray(b, dtype=float), float(lam)
        self.X = np.asarray(X, dtype=float).reshape(len(X), -1)
        self.y = np.asarray(y, dtype=float)
        self.X_test = np.asarray(X_test, dtype=float).reshape(len(X_test), -1)
        self.Phi = rff_features(self.X, self.w, self.b)
        self.Phi_test = rff_features(self.X_test, self.w, self.b)

    @classmethod
    def from_dataset(cls, dataset, m: int, lam: float, basis_seed: int, n_test: int = 1000, test_seed: int | None = None):
        """Fit with a freshly drawn basis (not the one that generated the labels)."""
        rng = np.random.default_rng(basis_seed)
        w, b = draw_rff_basis(m, dataset.D, rng)
        p = dataset.params
        test_rng = np.random.default_rng(basis_seed + 1 if test_seed is None else test_seed)
        X_test = test_rng.uniform(p.get("low", 0.0), p.get("high", 10.0), size=(n_test, dataset.D))
        return cls(dataset.covariates, dataset.labels, w, b, lam, X_test)

    @property
    def m(self) -> int:
        return len(self.b)

    @property
    def dataset_size(self) -> int:
        return len(self.y)

    def evaluate(self, indices, sub_seed=None):
        return rff_predictive_mean(self, indices)


def rff_feature_map(x, model: RffRegressionModel) -> np.ndarray:
    """``cos(w_i . x + b_i) / sqrt(m)`` for a single covariate vector."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (model.w.shape[1],):
        raise DimensionMismatch(f"covariate has shape {x.shape}, basis expects ({model.w.shape[1]},)")
    return rff_features(x[None, :], model.w, model.b)[0]


def rff_predictive_mean(model: RffRegressionModel, indices, test_points=None) -> np.ndarray:
    indices = np.asarray(indices, dtype=np.int64)
    if len(indices) == 0:
        raise ValueError("empty training subset")
    Phi = model.Phi[indices]
    Phi_test = model.Phi_test if test_points is None else rff_features(test_points, model.w, model.b)
    gram = Phi.T @ Phi
    gram[np.diag_indices_from(gram)] += model.lam
    try:
        factor = cho_factor(gram, lower=True, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise FactorizationFailure(str(exc)) from exc
    weights = cho_solve(factor, Phi.T @ model.y[indices])
    return Phi_test @ weights


def rff_dual_predictive_mean(model: RffRegressionModel, indices, test_points=None) -> np.ndarray:
    """``k_*^T (K + lam I)^-1 y`` with the finite-rank kernel ``phi_x^T phi_x'``."""
    indices = np.asarray(indices, dtype=np.int64)
    Phi = model.Phi[indices]
    Phi_test = model.Phi_test if test_points is None else rff_features(test_points, model.w, model.b)
    K = Phi @ Phi.T + model.lam * np.eye(len(indices))
    k_star = Phi_test @ Phi.T
    return k_star @ np.linalg.solve(K, model.y[indices])


def mse(pred, truth) -> float:
    return float(np.mean((np.asarray(pred) - np.asarray(truth)) ** 2))
