"""Per-class first and second moments, the solver's only view of the data."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

_PROBE_COUNT = 100
_PROBE_TOL = -1e-10
_SYM_TOL = 1e-12


def _check_covariance(name, sigma):
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {sigma.shape}")
    scale = max(1.0, float(np.abs(sigma).max()))
    if float(np.abs(sigma - sigma.T).max()) > _SYM_TOL * scale:
        raise ValueError(f"{name} is not symmetric")
    rng = np.random.RandomState(0)
    probes = rng.normal(size=(_PROBE_COUNT, sigma.shape[0]))
    probes /= np.linalg.norm(probes, axis=1, keepdims=True)
    values = np.einsum("ij,jk,ik->i", probes, sigma, probes)
    if float(values.min()) < _PROBE_TOL * scale:
        raise ValueError(f"{name} fails the positive-semidefinite probe check")


@dataclass(frozen=True)
class ClassMoments:
    """Means and covariances of the two classes plus the positive prior."""

    mu_p: np.ndarray
    sigma_p: np.ndarray
    mu_n: np.ndarray
    sigma_n: np.ndarray
    p: float

    def __post_init__(self):
        for name in ("mu_p", "sigma_p", "mu_n", "sigma_n"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.mu_p.ndim != 1 or self.mu_n.shape != self.mu_p.shape:
            raise ValueError("means must be vectors of equal length")
        d = self.mu_p.shape[0]
        for name in ("sigma_p", "sigma_n"):
            sigma = getattr(self, name)
            _check_covariance(name, sigma)
            if sigma.shape[0] != d:
                raise ValueError(f"{name} dimension does not match the means")
        if not (0.0 < self.p < 1.0):
            raise ValueError(f"class prior p must lie in (0, 1), got {self.p}")

    @property
    def dim(self):
        return self.mu_p.shape[0]

    @property
    def mean_gap(self):
        return self.mu_p - self.mu_n


def estimate_moments(data):
    """Estimate ClassMoments from a BinaryDataset.

    Covariances are the unbiased (N-1 denominator) sample estimates, so each
    class needs at least two samples.  A zero mean gap is legal here but is
    logged, because the solver will reject it.
    """
    X = data.features
    pos = data.labels == 1
    n_pos = int(np.count_nonzero(pos))
    n_neg = X.shape[0] - n_pos
    if n_pos < 2 or n_neg < 2:
        raise ValueError(
            f"need at least two samples per class, got {n_pos} positive / {n_neg} negative"
        )
    mu_p, sigma_p = _mean_cov(X[pos])
    mu_n, sigma_n = _mean_cov(X[~pos])
    if np.array_equal(mu_p, mu_n):
        logger.warning("class means coincide; the solver will reject these moments")
    return ClassMoments(mu_p, sigma_p, mu_n, sigma_n, p=n_pos / (n_pos + n_neg))


def _mean_cov(X):
    mu = X.mean(axis=0)
    centered = X - mu
    sigma = centered.T @ centered / (X.shape[0] - 1)
    sigma = (sigma + sigma.T) / 2.0
    return mu, sigma


def regularize(moments, jitter):
    """Add jitter * (trace/dim) to each covariance diagonal.

    A zero covariance has zero trace and is left unchanged; jitter 0 is the
    identity.
    """
    if jitter < 0:
        raise ValueError("jitter must be nonnegative")
    if jitter == 0:
        return moments

    def bump(sigma):
        scale = float(np.trace(sigma)) / sigma.shape[0]
        return sigma + jitter * scale * np.eye(sigma.shape[0])

    return ClassMoments(
        moments.mu_p, bump(moments.sigma_p), moments.mu_n, bump(moments.sigma_n), moments.p
    )


def quadratic_form(sigma, w):
    """w' sigma w, clamped to 0 when rounding drives it barely negative."""
    sigma = np.asarray(sigma, dtype=float)
    w = np.asarray(w, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1] or w.shape != (sigma.shape[0],):
        raise ValueError(
            f"dimension mismatch: sigma {sigma.shape} versus w {w.shape}"
        )
    value = float(w @ (sigma @ w))
    if value >= 0.0:
        return value
    tol = 1e-12 * max(1.0, float(np.abs(sigma).max()) * float(w @ w))
    if value >= -tol:
        return 0.0
    raise ValueError(f"quadratic form is negative beyond rounding: {value}")


def moments_to_json(moments):
    """Serialize to a JSON document with plain nested lists."""
    return json.dumps(
        {
            "mu_p": moments.mu_p.tolist(),
            "sigma_p": moments.sigma_p.tolist(),
            "mu_n": moments.mu_n.tolist(),
            "sigma_n": moments.sigma_n.tolist(),
            "p": moments.p,
        },
        indent=2,
    )


def moments_from_json(text):
    doc = json.loads(text)
    try:
        return ClassMoments(
            doc["mu_p"], doc["sigma_p"], doc["mu_n"], doc["sigma_n"], float(doc["p"])
        )
    except KeyError as exc:
        raise ValueError(f"moments document is missing field {exc.args[0]!r}") from None


def eigen_alpha_floor(sigma, gap):
    """Diagnostic lower bound 1 / (1 + gap^2 / lambda_min(sigma)).

    ``gap`` is read as the mean-gap projection along the current direction.
    Returns 0 when sigma has no positive eigenvalue (bound is vacuous).
    """
    lam_min = float(np.linalg.eigvalsh(np.asarray(sigma, dtype=float))[0])
    if lam_min <= 0.0:
        return 0.0
    return 1.0 / (1.0 + gap * gap / lam_min)
