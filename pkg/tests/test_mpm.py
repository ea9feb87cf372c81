"""Accuracy-rate minimax baseline."""

import math

import numpy as np
import pytest

from mpmf import ClassMoments, SolverError, solve_mpm
from conftest import random_spd


def symmetric_moments(scale=1.0):
    return ClassMoments(
        mu_p=[1.0, 0.0],
        sigma_p=scale * np.eye(2),
        mu_n=[-1.0, 0.0],
        sigma_n=scale * np.eye(2),
        p=0.5,
    )


def test_symmetric_isotropic_solution():
    result = solve_mpm(symmetric_moments())
    np.testing.assert_allclose(result.w, [0.5, 0.0], atol=1e-6)
    assert result.h_value == pytest.approx(1.0, abs=1e-9)
    assert result.alpha_star == pytest.approx(0.5, abs=1e-9)
    assert result.bias == pytest.approx(0.0, abs=1e-9)


def test_direction_matches_whitened_gap_for_shared_covariance():
    # with equal class covariances the optimal direction is sigma^{-1} gap;
    # conditioning is kept moderate because the diminishing-step subgradient
    # resolves the direction slowly in narrow valleys (the value itself
    # converges much faster, see the next test)
    for trial in range(8):
        rng = np.random.default_rng(100 + trial)
        dim = int(rng.integers(2, 6))
        Q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
        sigma = Q @ np.diag(rng.uniform(0.5, 2.0, size=dim)) @ Q.T
        sigma = (sigma + sigma.T) / 2.0
        mu_n = rng.normal(size=dim)
        gap = rng.normal(size=dim)
        gap *= 2.0 / np.linalg.norm(gap)
        moments = ClassMoments(
            mu_p=mu_n + gap, sigma_p=sigma, mu_n=mu_n, sigma_n=sigma, p=0.5
        )
        result = solve_mpm(moments)
        expected = np.linalg.solve(sigma, gap)
        cosine = float(result.w @ expected) / (
            np.linalg.norm(result.w) * np.linalg.norm(expected)
        )
        assert math.acos(min(1.0, cosine)) <= 1e-3, trial


def test_value_matches_closed_form_for_shared_covariance():
    # h* = 2 / sqrt(gap' sigma^{-1} gap); holds well past the point where
    # the direction itself has settled
    rng = np.random.default_rng(0)
    for trial in range(5):
        dim = int(rng.integers(2, 6))
        sigma = random_spd(rng, dim)
        mu_n = rng.normal(size=dim)
        gap = rng.normal(size=dim)
        gap *= 2.0 / np.linalg.norm(gap)
        moments = ClassMoments(
            mu_p=mu_n + gap, sigma_p=sigma, mu_n=mu_n, sigma_n=sigma, p=0.5
        )
        result = solve_mpm(moments, max_steps=20000)
        h_star = 2.0 / math.sqrt(float(gap @ np.linalg.solve(sigma, gap)))
        assert result.h_value == pytest.approx(h_star, rel=1e-5), trial
        assert result.h_value >= h_star - 1e-12


def test_final_iterate_is_feasible():
    rng = np.random.default_rng(1)
    for trial in range(10):
        dim = int(rng.integers(2, 8))
        mu_n = rng.normal(size=dim)
        gap = rng.normal(size=dim)
        moments = ClassMoments(
            mu_p=mu_n + gap,
            sigma_p=random_spd(rng, dim),
            mu_n=mu_n,
            sigma_n=random_spd(rng, dim),
            p=0.5,
        )
        result = solve_mpm(moments)
        assert float(result.w @ moments.mean_gap) == pytest.approx(1.0, abs=1e-10)


def test_alpha_star_formula_and_inflation():
    base = solve_mpm(symmetric_moments())
    inflated = solve_mpm(symmetric_moments(scale=4.0))
    # kappa halves when both covariances scale by four
    assert inflated.h_value == pytest.approx(2.0, abs=1e-9)
    assert inflated.alpha_star == pytest.approx(0.2, abs=1e-9)
    assert inflated.alpha_star < base.alpha_star
    for result in (base, inflated):
        kappa_star = 1.0 / result.h_value
        expected = kappa_star**2 / (1.0 + kappa_star**2)
        assert result.alpha_star == pytest.approx(expected, rel=1e-12)


def test_worst_case_bound_holds_for_gaussians():
    # the shared alpha* bounds the accuracy on each class at the solved rule
    moments = symmetric_moments()
    result = solve_mpm(moments)
    rng = np.random.default_rng(2)
    Xp = rng.multivariate_normal(moments.mu_p, moments.sigma_p, size=20000)
    Xn = rng.multivariate_normal(moments.mu_n, moments.sigma_n, size=20000)
    acc_p = float(np.mean(Xp @ result.w - result.bias > 0))
    acc_n = float(np.mean(Xn @ result.w - result.bias <= 0))
    assert acc_p >= result.alpha_star - 0.02
    assert acc_n >= result.alpha_star - 0.02


def test_errors():
    with pytest.raises(ValueError, match="coincide"):
        solve_mpm(
            ClassMoments([0.0, 0.0], np.eye(2), [0.0, 0.0], np.eye(2), 0.5)
        )
    with pytest.raises(SolverError, match="jitter"):
        solve_mpm(
            ClassMoments([1.0, 0.0], np.zeros((2, 2)), [0.0, 0.0], np.zeros((2, 2)), 0.5)
        )


def test_result_to_dict():
    result = solve_mpm(symmetric_moments())
    doc = result.to_dict()
    assert doc["type"] == "linear"
    assert doc["alpha_star"] == pytest.approx(0.5, abs=1e-9)
    assert len(doc["w"]) == 2
