"""Scikit-learn style estimators wrapping the moment solvers.

These are thin conveniences: they validate array inputs, map an arbitrary
binary label pair onto the +1/-1 convention used internally, and expose the
fitted classifier through ``decision_function`` / ``predict``.  All solver
behavior lives in the underlying modules.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import BinaryDataset
from .kernels import KernelSpec, predict_kernel, score_kernel, solve_kernel
from .measures import MeasureSpec, parse_measure
from .moments import estimate_moments, regularize
from .mpm import solve_mpm
from .solver import (
    LinearModel,
    SolverOptions,
    bias_from_moments,
    problem_from_moments,
    solve,
)


def _binary_targets(y, pos_label):
    classes = np.unique(y)
    if classes.shape[0] != 2:
        raise ValueError(
            f"expected exactly two classes, got {classes.shape[0]}"
        )
    if pos_label is None:
        pos = classes[1]
    else:
        if pos_label not in classes:
            raise ValueError(f"pos_label {pos_label!r} not present in y")
        pos = pos_label
    neg = classes[0] if pos == classes[1] else classes[1]
    y_pm = np.where(y == pos, 1, -1)
    return classes, pos, neg, y_pm


def _resolve_measure(measure, beta):
    if isinstance(measure, str) and measure.strip().lower() == "fbeta":
        return MeasureSpec("fbeta", beta=None if beta is None else float(beta))
    spec = parse_measure(measure)
    if beta is not None and spec.kind == "fbeta":
        spec = MeasureSpec("fbeta", beta=float(beta))
    return spec


class MPMFClassifier(ClassifierMixin, BaseEstimator):
    """Linear minimax classifier optimizing a worst-case performance measure.

    Parameters
    ----------
    measure : str or MeasureSpec, default "f1"
        Performance measure to optimize; see ``mpmf.measures.parse_measure``.
    beta : float, optional
        Overrides the F-measure weight when ``measure`` is an F-measure.
    jitter : float, default 0.0
        Relative diagonal regularization added to both class covariances.
    grid_points : int, default 4096
        Resolution of the error-pair grid search.
    max_rounds : int, default 200
        Cap on alternating rounds.
    pos_label : optional
        Which label plays the positive class; defaults to the larger one.
    """

    def __init__(
        self,
        measure="f1",
        beta=None,
        jitter=0.0,
        grid_points=4096,
        max_rounds=200,
        pos_label=None,
    ):
        self.measure = measure
        self.beta = beta
        self.jitter = jitter
        self.grid_points = grid_points
        self.max_rounds = max_rounds
        self.pos_label = pos_label

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        classes, pos, neg, y_pm = _binary_targets(y, self.pos_label)
        self.classes_ = classes
        self._pos = pos
        self._neg = neg
        spec = _resolve_measure(self.measure, self.beta)
        moments = estimate_moments(BinaryDataset(X, y_pm))
        if self.jitter:
            moments = regularize(moments, self.jitter)
        options = SolverOptions(
            grid_points=self.grid_points, max_rounds=self.max_rounds
        )
        result = solve(problem_from_moments(moments, spec), options)
        b = bias_from_moments(moments, result.w, result.alpha_p)
        self.model_ = LinearModel(w=result.w, bias=b)
        self.result_ = result
        self.alpha_p_ = result.alpha_p
        self.alpha_n_ = result.alpha_n
        self.q_value_ = result.q_value
        self.coef_ = result.w.reshape(1, -1)
        self.intercept_ = np.array([-b])
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        return X @ self.model_.w - self.model_.bias

    def predict(self, X):
        s = self.decision_function(X)
        return np.where(s > 0.0, self._pos, self._neg)


class KernelMPMFClassifier(ClassifierMixin, BaseEstimator):
    """Kernelized variant; supports linear, rbf, and polynomial kernels.

    ``gamma=None`` on an rbf kernel resolves to the median heuristic on the
    subsampled support points.  ``subsample`` bounds the per-class support
    count (None keeps everything).
    """

    def __init__(
        self,
        measure="f1",
        beta=None,
        kernel="rbf",
        gamma=None,
        degree=3,
        coef0=0.0,
        subsample=200,
        random_state=0,
        grid_points=4096,
        max_rounds=200,
        pos_label=None,
    ):
        self.measure = measure
        self.beta = beta
        self.kernel = kernel
        self.gamma = gamma
        self.degree = degree
        self.coef0 = coef0
        self.subsample = subsample
        self.random_state = random_state
        self.grid_points = grid_points
        self.max_rounds = max_rounds
        self.pos_label = pos_label

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        classes, pos, neg, y_pm = _binary_targets(y, self.pos_label)
        self.classes_ = classes
        self._pos = pos
        self._neg = neg
        spec = _resolve_measure(self.measure, self.beta)
        kspec = KernelSpec(
            kind="polynomial" if self.kernel == "poly" else self.kernel,
            gamma=self.gamma,
            degree=self.degree,
            coef0=self.coef0,
        )
        options = SolverOptions(
            grid_points=self.grid_points, max_rounds=self.max_rounds
        )
        model, result = solve_kernel(
            kspec,
            BinaryDataset(X, y_pm),
            spec,
            options=options,
            subsample=self.subsample,
            seed=self.random_state,
        )
        self.model_ = model
        self.result_ = result
        self.alpha_p_ = result.alpha_p
        self.alpha_n_ = result.alpha_n
        self.q_value_ = result.q_value
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        return score_kernel(self.model_, X)

    def predict(self, X):
        s = self.decision_function(X)
        return np.where(s > 0.0, self._pos, self._neg)


class MPMClassifier(ClassifierMixin, BaseEstimator):
    """Accuracy-rate minimax baseline with the shared worst-case bound."""

    def __init__(self, max_steps=2000, tol=1e-12, jitter=0.0, pos_label=None):
        self.max_steps = max_steps
        self.tol = tol
        self.jitter = jitter
        self.pos_label = pos_label

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        classes, pos, neg, y_pm = _binary_targets(y, self.pos_label)
        self.classes_ = classes
        self._pos = pos
        self._neg = neg
        moments = estimate_moments(BinaryDataset(X, y_pm))
        if self.jitter:
            moments = regularize(moments, self.jitter)
        result = solve_mpm(moments, max_steps=self.max_steps, tol=self.tol)
        self.result_ = result
        self.model_ = LinearModel(w=result.w, bias=result.bias)
        self.alpha_star_ = result.alpha_star
        self.coef_ = np.asarray(result.w, dtype=float).reshape(1, -1)
        self.intercept_ = np.array([-result.bias])
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        return X @ self.model_.w - self.model_.bias

    def predict(self, X):
        s = self.decision_function(X)
        return np.where(s > 0.0, self._pos, self._neg)
