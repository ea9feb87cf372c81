"""Accuracy-rate minimax baseline.

Minimizes h(w) = sqrt(w'S_P w) + sqrt(w'S_N w) over the affine slice
w'(mu_P - mu_N) = 1 by projected subgradient descent.  The optimal value
gives the shared worst-case accuracy alpha* = kappa*^2 / (1 + kappa*^2) with
kappa* = 1/h(w*), and the bias comes from the two class constraints holding
with equality.
"""

import math
from dataclasses import dataclass

import numpy as np

from .solver import SolverError


@dataclass(frozen=True)
class MpmResult:
    w: np.ndarray
    bias: float
    alpha_star: float
    h_value: float
    steps: int

    def to_dict(self):
        return {
            "type": "linear",
            "w": np.asarray(self.w, dtype=float).tolist(),
            "bias": float(self.bias),
            "alpha_star": float(self.alpha_star),
        }


def _h_and_subgrad(sigma_p, sigma_n, w):
    # vanishing form contributes 0 to the subgradient
    pv = sigma_p @ w
    nv = sigma_n @ w
    a = math.sqrt(max(float(w @ pv), 0.0))
    b = math.sqrt(max(float(w @ nv), 0.0))
    grad = np.zeros_like(w)
    if a > 0.0:
        grad += pv / a
    if b > 0.0:
        grad += nv / b
    return a + b, grad


def solve_mpm(moments, max_steps=2000, tol=1e-12):
    """Minimize the summed class deviations along the unit-gap slice.

    Starts at w0 = g / ||g||^2 (the minimum-norm feasible point), projects
    each subgradient onto the slice's tangent space, and backtracks the 1/k
    step until the objective does not increase.  Fifty consecutive rejected
    steps raise an error; otherwise the best iterate seen is returned once
    improvements stay below ``tol`` or ``max_steps`` is reached.
    """
    g = moments.mean_gap
    gap_sq = float(g @ g)
    if gap_sq == 0.0:
        raise ValueError("class means coincide; no direction separates them")
    sigma_p = moments.sigma_p
    sigma_n = moments.sigma_n
    w = g / gap_sq
    h, grad = _h_and_subgrad(sigma_p, sigma_n, w)
    if h <= 0.0:
        raise SolverError("both class forms vanish at the initial point; add jitter")
    rejected = 0
    stalled = 0
    steps = 0
    for k in range(1, max_steps + 1):
        v = grad - (float(grad @ g) / gap_sq) * g
        vnorm = float(np.linalg.norm(v))
        if vnorm <= 1e-14:
            break
        gamma = 1.0 / k
        accepted = False
        for _ in range(40):
            w_trial = w - gamma * v
            h_trial, grad_trial = _h_and_subgrad(sigma_p, sigma_n, w_trial)
            if h_trial <= h:
                accepted = True
                break
            gamma *= 0.5
        steps = k
        if not accepted:
            rejected += 1
            if rejected >= 50:
                raise SolverError("objective failed to decrease for 50 steps")
            continue
        rejected = 0
        if h - h_trial <= tol * max(1.0, h):
            stalled += 1
        else:
            stalled = 0
        w, h, grad = w_trial, h_trial, grad_trial
        if stalled >= 10:
            break
    kappa_star = 1.0 / h
    alpha_star = kappa_star * kappa_star / (1.0 + kappa_star * kappa_star)
    dev_p = math.sqrt(max(float(w @ sigma_p @ w), 0.0))
    b = float(w @ moments.mu_p) - kappa_star * dev_p
    return MpmResult(w=w, bias=b, alpha_star=alpha_star, h_value=h, steps=steps)
