"""Kernelized moment classifiers built from centered Gram factors.

The feature-space problem never materializes: class moments enter the solver
through the Gram blocks of the training sample, centered per class and scaled
so the factor products act as the class covariance operators.  The solved
coefficient vector doubles as the dual weight vector of the prediction rule.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
from sklearn.metrics.pairwise import linear_kernel, polynomial_kernel, rbf_kernel

from .solver import (
    MomentProblem,
    QuadraticForm,
    SolverError,
    bias,
    solve,
)

KERNEL_KINDS = ("linear", "rbf", "polynomial")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its parameters.

    A ``gamma`` of None on an rbf kernel means "resolve from data" via the
    median heuristic at solve time; stored models always carry the resolved
    positive value.  Polynomial kernels use K(x, y) = (x'y + coef0)^degree.
    """

    kind: str
    gamma: float | None = None
    degree: int = 3
    coef0: float = 0.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.gamma is not None and not self.gamma > 0.0:
            raise ValueError("gamma must be positive when set")
        if self.kind == "polynomial":
            if int(self.degree) != self.degree or self.degree < 1:
                raise ValueError("degree must be a positive integer")
            object.__setattr__(self, "degree", int(self.degree))


def parse_kernel(text):
    """Parse a kernel string such as 'rbf', 'rbf:0.5', or 'poly:3:1.0'."""
    if isinstance(text, KernelSpec):
        return text
    parts = str(text).strip().lower().split(":")
    kind = parts[0]
    if kind == "poly":
        kind = "polynomial"
    if kind == "linear":
        if len(parts) > 1:
            raise ValueError("linear kernel takes no parameters")
        return KernelSpec("linear")
    if kind == "rbf":
        if len(parts) > 2:
            raise ValueError("rbf kernel takes at most one parameter (gamma)")
        gamma = float(parts[1]) if len(parts) == 2 else None
        return KernelSpec("rbf", gamma=gamma)
    if kind == "polynomial":
        if len(parts) > 3:
            raise ValueError("polynomial kernel takes degree and coef0")
        degree = int(parts[1]) if len(parts) >= 2 else 3
        coef0 = float(parts[2]) if len(parts) == 3 else 0.0
        return KernelSpec("polynomial", degree=degree, coef0=coef0)
    raise ValueError(f"unknown kernel kind {kind!r}")


def kernel_matrix(spec, X, Y):
    """Pairwise kernel values between the rows of X and the rows of Y."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if spec.kind == "linear":
        K = linear_kernel(X, Y)
    elif spec.kind == "rbf":
        if spec.gamma is None:
            raise ValueError("rbf kernel requires a resolved gamma")
        K = rbf_kernel(X, Y, gamma=spec.gamma)
    else:
        # fixed unit scaling; only degree and coef0 are model parameters
        K = polynomial_kernel(X, Y, degree=spec.degree, gamma=1.0, coef0=spec.coef0)
    if not np.isfinite(K).all():
        raise ValueError("kernel produced non-finite values")
    return K


def median_heuristic_gamma(X, seed=0, pairs=1000):
    """1 / median squared distance over a random sample of point pairs.

    Falls back to 1.0 when the sample median vanishes (duplicated points) or
    fewer than two points are available.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n < 2:
        return 1.0
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, size=pairs)
    j = rng.integers(0, n, size=pairs)
    keep = i != j
    if not keep.any():
        return 1.0
    diff = X[i[keep]] - X[j[keep]]
    med = float(np.median(np.sum(diff * diff, axis=1)))
    if not math.isfinite(med) or med <= 0.0:
        return 1.0
    return 1.0 / med


def gram(spec, X_pos, X_neg):
    """Positive and negative Gram blocks against the full support set.

    Columns follow the sample order positives-first, so K_P is
    N_P x (N_P + N_N) and K_N is N_N x (N_P + N_N).
    """
    X_pos = np.asarray(X_pos, dtype=float)
    X_neg = np.asarray(X_neg, dtype=float)
    if X_pos.shape[0] == 0 or X_neg.shape[0] == 0:
        raise ValueError("both classes must be nonempty")
    X_all = np.vstack([X_pos, X_neg])
    K_P = kernel_matrix(spec, X_pos, X_all)
    K_N = kernel_matrix(spec, X_neg, X_all)
    return K_P, K_N


def centered_factors(K_P, K_N):
    """Column-average vectors and the per-class centered, scaled factors.

    l_p is the mean over K_P's rows (one value per support column); L_P
    subtracts that row vector from every row of K_P and divides by sqrt(N_P),
    so L_P' L_P acts as the positive-class covariance operator in the span of
    the support set.  L_N likewise.
    """
    K_P = np.asarray(K_P, dtype=float)
    K_N = np.asarray(K_N, dtype=float)
    if K_P.shape[1] != K_N.shape[1]:
        raise ValueError("Gram blocks must share the support column count")
    l_p = K_P.mean(axis=0)
    l_n = K_N.mean(axis=0)
    L_P = (K_P - l_p[None, :]) / math.sqrt(K_P.shape[0])
    L_N = (K_N - l_n[None, :]) / math.sqrt(K_N.shape[0])
    return l_p, l_n, L_P, L_N


@dataclass(frozen=True)
class KernelModel:
    """Dual-form classifier: weights over support points plus a bias."""

    dual_weights: np.ndarray
    bias: float
    support_pos: np.ndarray
    support_neg: np.ndarray
    spec: KernelSpec

    def __post_init__(self):
        w = np.asarray(self.dual_weights, dtype=float)
        sp = np.asarray(self.support_pos, dtype=float)
        sn = np.asarray(self.support_neg, dtype=float)
        if sp.ndim != 2 or sn.ndim != 2 or sp.shape[1] != sn.shape[1]:
            raise ValueError("support matrices must be 2-d with equal width")
        if w.shape != (sp.shape[0] + sn.shape[0],):
            raise ValueError("dual weight count must match the support points")
        if abs(float(np.linalg.norm(w)) - 1.0) > 1e-10:
            raise ValueError("dual weights must have unit norm")
        object.__setattr__(self, "dual_weights", w)
        object.__setattr__(self, "support_pos", sp)
        object.__setattr__(self, "support_neg", sn)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def n_features(self):
        return self.support_pos.shape[1]

    def to_dict(self):
        return {
            "type": "kernel",
            "kernel": {
                "kind": self.spec.kind,
                "gamma": self.spec.gamma,
                "degree": self.spec.degree,
                "coef0": self.spec.coef0,
            },
            "dual_weights": self.dual_weights.tolist(),
            "bias": self.bias,
            "support_pos": self.support_pos.tolist(),
            "support_neg": self.support_neg.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("type") != "kernel":
            raise ValueError("not a kernel model document")
        k = doc["kernel"]
        spec = KernelSpec(
            kind=k["kind"], gamma=k["gamma"], degree=k["degree"], coef0=k["coef0"]
        )
        return cls(
            dual_weights=np.asarray(doc["dual_weights"], dtype=float),
            bias=float(doc["bias"]),
            support_pos=np.asarray(doc["support_pos"], dtype=float),
            support_neg=np.asarray(doc["support_neg"], dtype=float),
            spec=spec,
        )


def kernel_model_to_json(model):
    return json.dumps(model.to_dict(), indent=2, sort_keys=True)


def kernel_model_from_json(text):
    return KernelModel.from_dict(json.loads(text))


def _subsample(X, count, rng):
    # uniform without replacement; indices kept sorted for determinism
    if count is None or count >= X.shape[0]:
        return X
    idx = np.sort(rng.choice(X.shape[0], size=count, replace=False))
    return X[idx]


def solve_kernel(spec, train, measure, options=None, subsample=200, seed=0):
    """Fit the kernelized classifier on a +1/-1 dataset.

    Support points are a per-class subsample (default 200, None keeps all).
    The class proportion p comes from the full training set, not the
    subsample, so the measure objective sees the true imbalance.  Returns the
    fitted KernelModel together with the SolverResult, whose trace and error
    pair refer to the dual problem.
    """
    spec = parse_kernel(spec)
    X_pos = train.features[train.labels == 1]
    X_neg = train.features[train.labels == -1]
    if X_pos.shape[0] == 0 or X_neg.shape[0] == 0:
        raise ValueError("training data must contain both classes")
    p = X_pos.shape[0] / (X_pos.shape[0] + X_neg.shape[0])
    rng = np.random.default_rng(seed)
    X_pos = _subsample(X_pos, subsample, rng)
    X_neg = _subsample(X_neg, subsample, rng)
    if spec.kind == "rbf" and spec.gamma is None:
        resolved = median_heuristic_gamma(np.vstack([X_pos, X_neg]), seed=seed)
        spec = KernelSpec("rbf", gamma=resolved)
    K_P, K_N = gram(spec, X_pos, X_neg)
    l_p, l_n, L_P, L_N = centered_factors(K_P, K_N)
    if float(np.max(np.abs(l_p - l_n))) <= 1e-12:
        raise SolverError("minimal probability decision problem has no solution")
    problem = MomentProblem(
        mean_gap=l_p - l_n,
        form_p=QuadraticForm.from_factor(L_P),
        form_n=QuadraticForm.from_factor(L_N),
        p=p,
        spec=measure,
    )
    result = solve(problem, options)
    b = bias(l_p, problem.form_p, result.w, result.alpha_p)
    model = KernelModel(
        dual_weights=result.w,
        bias=b,
        support_pos=X_pos,
        support_neg=X_neg,
        spec=spec,
    )
    return model, result


def score_kernel(model, x):
    """Decision value sum_i w_i K(support_i, x) - bias.

    A single vector yields a float, a matrix one value per row.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(
            f"expected {model.n_features} features, got shape {x.shape}"
        )
    support = np.vstack([model.support_pos, model.support_neg])
    K = kernel_matrix(model.spec, X, support)
    s = K @ model.dual_weights - model.bias
    return float(s[0]) if single else s


def predict_kernel(model, x):
    """Label +1 where the score is strictly positive, -1 otherwise."""
    s = score_kernel(model, x)
    if np.isscalar(s):
        return 1 if s > 0.0 else -1
    return np.where(s > 0.0, 1, -1)
