"""Shared generators for randomized tests.

Everything is seeded; the same seed always yields the same problem, so any
failure is reproducible from the reported seed alone.
"""

import numpy as np

from mpmf import ClassMoments, MeasureSpec
from mpmf.measures import KINDS


def random_spd(rng, dim, scale=1.0):
    """Random symmetric positive-definite matrix with eigenvalues >= 0.1."""
    A = rng.normal(size=(dim, dim))
    sigma = A @ A.T / dim + 0.1 * np.eye(dim)
    return scale * sigma


def random_moments(seed, max_dim=10):
    """Random well-scaled two-class moment set."""
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(2, max_dim + 1))
    mu_n = rng.normal(size=dim)
    gap = rng.normal(size=dim)
    gap *= rng.uniform(0.5, 5.0) / np.linalg.norm(gap)
    return ClassMoments(
        mu_p=mu_n + gap,
        sigma_p=random_spd(rng, dim, scale=rng.uniform(0.3, 3.0)),
        mu_n=mu_n,
        sigma_n=random_spd(rng, dim, scale=rng.uniform(0.3, 3.0)),
        p=float(rng.uniform(0.05, 0.95)),
    )


def random_measure(seed):
    """Uniformly random measure spec, with a random beta for the F family."""
    rng = np.random.default_rng(seed)
    kind = KINDS[int(rng.integers(0, len(KINDS)))]
    if kind == "fbeta":
        return MeasureSpec("fbeta", beta=float(rng.uniform(0.3, 4.0)))
    return MeasureSpec(kind)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Repeat the acceptance lines after the run, where capture cannot hide them."""
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not getattr(module, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in module.RESULTS:
        terminalreporter.write_line(line)
