"""Moment estimation and serialization against numpy oracles."""

import numpy as np
import pytest

from mpmf import BinaryDataset, ClassMoments, estimate_moments, regularize
from mpmf.moments import (
    eigen_alpha_floor,
    moments_from_json,
    moments_to_json,
    quadratic_form,
)
from conftest import random_moments


def test_estimate_matches_numpy():
    rng = np.random.default_rng(0)
    for _ in range(10):
        n_pos = int(rng.integers(3, 40))
        n_neg = int(rng.integers(3, 40))
        dim = int(rng.integers(1, 6))
        Xp = rng.normal(size=(n_pos, dim))
        Xn = rng.normal(size=(n_neg, dim)) + 1.0
        data = BinaryDataset(
            features=np.vstack([Xp, Xn]),
            labels=np.concatenate([np.ones(n_pos, int), -np.ones(n_neg, int)]),
        )
        m = estimate_moments(data)
        np.testing.assert_allclose(m.mu_p, Xp.mean(axis=0), rtol=1e-12)
        np.testing.assert_allclose(m.mu_n, Xn.mean(axis=0), rtol=1e-12)
        np.testing.assert_allclose(
            m.sigma_p, np.cov(Xp, rowvar=False, ddof=1).reshape(dim, dim), atol=1e-12
        )
        np.testing.assert_allclose(
            m.sigma_n, np.cov(Xn, rowvar=False, ddof=1).reshape(dim, dim), atol=1e-12
        )
        assert m.p == n_pos / (n_pos + n_neg)
        np.testing.assert_array_equal(m.mean_gap, m.mu_p - m.mu_n)


def test_estimate_needs_two_per_class():
    X = np.arange(8.0).reshape(4, 2)
    data = BinaryDataset(features=X, labels=np.array([1, -1, -1, -1]))
    with pytest.raises(ValueError, match="two samples per class"):
        estimate_moments(data)


def test_regularize_trace_bump():
    m = random_moments(5)
    d = m.dim
    bumped = regularize(m, 0.5)
    expected_p = m.sigma_p + 0.5 * (np.trace(m.sigma_p) / d) * np.eye(d)
    np.testing.assert_allclose(bumped.sigma_p, expected_p, rtol=1e-12)
    np.testing.assert_array_equal(bumped.mu_p, m.mu_p)
    assert bumped.p == m.p
    assert regularize(m, 0.0) is m
    with pytest.raises(ValueError):
        regularize(m, -1e-3)


def test_json_round_trip():
    m = random_moments(6)
    again = moments_from_json(moments_to_json(m))
    np.testing.assert_array_equal(again.mu_p, m.mu_p)
    np.testing.assert_array_equal(again.sigma_p, m.sigma_p)
    np.testing.assert_array_equal(again.mu_n, m.mu_n)
    np.testing.assert_array_equal(again.sigma_n, m.sigma_n)
    assert again.p == m.p


def test_json_missing_field():
    with pytest.raises(ValueError, match="missing field"):
        moments_from_json('{"mu_p": [0.0]}')


def test_validation_rejects_bad_inputs():
    eye = np.eye(2)
    with pytest.raises(ValueError, match="not symmetric"):
        ClassMoments([0, 0], [[1.0, 0.5], [0.0, 1.0]], [1, 1], eye, 0.5)
    with pytest.raises(ValueError, match="positive-semidefinite"):
        ClassMoments([0, 0], [[1.0, 2.0], [2.0, 1.0]], [1, 1], eye, 0.5)
    with pytest.raises(ValueError):
        ClassMoments([0, 0], eye, [1, 1, 1], eye, 0.5)
    with pytest.raises(ValueError):
        ClassMoments([0, 0], eye, [1, 1], np.eye(3), 0.5)
    with pytest.raises(ValueError):
        ClassMoments([0, 0], eye, [1, 1], eye, 1.0)


def test_quadratic_form_values():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(3, 3))
    sigma = A @ A.T
    w = rng.normal(size=3)
    assert quadratic_form(sigma, w) == pytest.approx(float(w @ sigma @ w), rel=1e-12)
    # barely negative values clamp to zero, genuinely negative ones raise
    assert quadratic_form(np.diag([-1e-16, 0.0]), np.array([1.0, 0.0])) == 0.0
    with pytest.raises(ValueError, match="negative beyond rounding"):
        quadratic_form(np.diag([-1.0, 0.0]), np.array([1.0, 0.0]))
    with pytest.raises(ValueError, match="dimension mismatch"):
        quadratic_form(sigma, np.ones(2))


def test_eigen_alpha_floor():
    # isotropic covariance: the bound is 1 / (1 + gap^2 / s)
    assert eigen_alpha_floor(2.0 * np.eye(3), 4.0) == pytest.approx(1.0 / (1.0 + 8.0))
    assert eigen_alpha_floor(np.zeros((2, 2)), 1.0) == 0.0
