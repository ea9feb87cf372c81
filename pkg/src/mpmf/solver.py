"""Alternating-descent solver for worst-case classifiers built from moments.

The engine consumes an abstract ``MomentProblem``: a mean-gap vector plus one
positive-semidefinite quadratic form per class.  The same engine therefore
serves the raw-moment linear path and the centered-Gram kernel path.

One round alternates two steps.  First, with the direction w fixed, the
worst-case error pair is found by a grid search over the positive-class
error, the negative-class error being eliminated through the margin
constraint

    pi(alpha_n) * sqrt(w'S_n w) + pi(alpha_p) * sqrt(w'S_p w) = w'(mu_p - mu_n),

where pi(a) = sqrt((1 - a) / a).  Second, with the worst-case levels fixed,
the direction is improved by gradient ascent on the concave surrogate

    f(w) = w'g - tau * sqrt(w'S_p w) - eta * sqrt(w'S_n w)

over the unit sphere, which raises the achievable negative-class confidence
ratio lambda.  The objective value never increases across these steps, and
the search stops once one full round improves it by less than ``q_tol``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .measures import MeasureSpec, q_grid, q_objective

_PROBE_COUNT = 100
_PROBE_TOL = -1e-10


class SolverError(RuntimeError):
    """The optimization could not run or produced no feasible candidate."""


def kappa(alpha):
    """sqrt(alpha / (1 - alpha)); the confidence ratio of level alpha."""
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return math.sqrt(alpha / (1.0 - alpha))


def pi(alpha):
    """sqrt((1 - alpha) / alpha); the reciprocal of kappa."""
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return math.sqrt((1.0 - alpha) / alpha)


class QuadraticForm:
    """PSD quadratic form backed by a covariance matrix or a factor L.

    With a factor the form is L'L and values are computed as ||L w||^2,
    which is exactly nonnegative.  An optional ridge adds r * ||w||^2.
    """

    __slots__ = ("matrix", "factor", "ridge", "dim")

    def __init__(self, matrix=None, factor=None, ridge=0.0):
        if (matrix is None) == (factor is None):
            raise ValueError("exactly one of matrix or factor is required")
        if ridge < 0:
            raise ValueError("ridge must be nonnegative")
        if matrix is not None:
            matrix = np.asarray(matrix, dtype=float)
            if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
                raise ValueError(f"matrix must be square, got shape {matrix.shape}")
            self.dim = matrix.shape[0]
        else:
            factor = np.asarray(factor, dtype=float)
            if factor.ndim != 2:
                raise ValueError("factor must be a 2-d array")
            self.dim = factor.shape[1]
        self.matrix = matrix
        self.factor = factor
        self.ridge = float(ridge)

    @classmethod
    def from_covariance(cls, sigma):
        return cls(matrix=sigma)

    @classmethod
    def from_factor(cls, L, ridge=0.0):
        return cls(factor=L, ridge=ridge)

    def _check(self, w):
        if w.shape != (self.dim,):
            raise ValueError(f"dimension mismatch: form is {self.dim}-d, w is {w.shape}")

    def raw_value(self, w):
        """Unclamped w'S w; used by the construction-time PSD probes."""
        w = np.asarray(w, dtype=float)
        self._check(w)
        if self.matrix is not None:
            base = float(w @ (self.matrix @ w))
        else:
            v = self.factor @ w
            base = float(v @ v)
        return base + self.ridge * float(w @ w)

    def value(self, w):
        """w'S w clamped at zero against rounding noise."""
        return max(self.raw_value(w), 0.0)

    def matvec(self, w):
        """S w, the gradient kernel of the form."""
        w = np.asarray(w, dtype=float)
        self._check(w)
        if self.matrix is not None:
            out = self.matrix @ w
        else:
            out = self.factor.T @ (self.factor @ w)
        if self.ridge:
            out = out + self.ridge * w
        return out


@dataclass(frozen=True)
class MomentProblem:
    """Everything the solver needs: gap vector, two forms, prior, measure."""

    mean_gap: np.ndarray
    form_p: QuadraticForm
    form_n: QuadraticForm
    p: float
    spec: MeasureSpec

    def __post_init__(self):
        gap = np.asarray(self.mean_gap, dtype=float)
        object.__setattr__(self, "mean_gap", gap)
        if gap.ndim != 1:
            raise ValueError("mean_gap must be a vector")
        if float(np.linalg.norm(gap)) == 0.0:
            raise ValueError("zero mean gap: the classes are indistinguishable to the solver")
        for name in ("form_p", "form_n"):
            form = getattr(self, name)
            if form.dim != gap.shape[0]:
                raise ValueError(f"{name} dimension does not match mean_gap")
        if not (0.0 < self.p < 1.0):
            raise ValueError(f"class prior p must lie in (0, 1), got {self.p}")
        rng = np.random.RandomState(1)
        probes = rng.normal(size=(_PROBE_COUNT, gap.shape[0]))
        probes /= np.linalg.norm(probes, axis=1, keepdims=True)
        for name in ("form_p", "form_n"):
            form = getattr(self, name)
            worst = min(form.raw_value(v) for v in probes)
            if worst < _PROBE_TOL:
                raise ValueError(f"{name} fails the positive-semidefinite probe check")

    @property
    def dim(self):
        return self.mean_gap.shape[0]


def problem_from_moments(moments, spec):
    """Wrap ClassMoments as a MomentProblem for the given measure."""
    return MomentProblem(
        mean_gap=moments.mean_gap,
        form_p=QuadraticForm.from_covariance(moments.sigma_p),
        form_n=QuadraticForm.from_covariance(moments.sigma_n),
        p=moments.p,
        spec=spec,
    )


@dataclass(frozen=True)
class SolverOptions:
    grid_points: int = 4096
    max_rounds: int = 200
    inner_max_steps: int = 1000
    q_tol: float = 1e-4
    grad_tol: float = 1e-4
    alpha_ceiling: float = 1.0 - 1e-6
    grid_step: float | None = None
    alpha_warm_start: bool = True

    def __post_init__(self):
        if self.grid_points < 2:
            raise ValueError("grid_points must be at least 2")
        if self.max_rounds < 1 or self.inner_max_steps < 1:
            raise ValueError("round and step limits must be positive")
        if self.q_tol < 0 or self.grad_tol < 0:
            raise ValueError("tolerances must be nonnegative")
        if not (0.0 < self.alpha_ceiling < 1.0):
            raise ValueError("alpha_ceiling must lie in (0, 1)")
        if self.grid_step is not None and not (0.0 < self.grid_step < 1.0):
            raise ValueError("grid_step must lie in (0, 1) when set")


@dataclass(frozen=True)
class TraceRecord:
    round: int
    alpha_p: float
    alpha_n: float
    q_before: float
    q_after: float
    lam: float
    inner_steps: int


@dataclass(frozen=True)
class SolverTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def to_csv(self):
        lines = ["round,alpha_p,alpha_n,q_before,q_after,lambda,inner_steps"]
        for r in self.records:
            lines.append(
                f"{r.round},{r.alpha_p!r},{r.alpha_n!r},{r.q_before!r},"
                f"{r.q_after!r},{r.lam!r},{r.inner_steps}"
            )
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SolverResult:
    w: np.ndarray
    alpha_p: float
    alpha_n: float
    q_value: float
    trace: SolverTrace
    converged: bool
    reason: str

    def to_dict(self):
        return {
            "w": self.w.tolist(),
            "alpha_p": self.alpha_p,
            "alpha_n": self.alpha_n,
            "q_value": self.q_value,
            "rounds": len(self.trace),
            "converged": self.converged,
            "reason": self.reason,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _objective(spec, p):
    """Internal grid objective.

    For fbeta the printed objective equals (1 - p) times a form that depends
    on beta and p only through tau = beta^2 p / (1 - p).  Optimizing that
    reduced form makes runs with equal tau identical bit for bit, which is
    the invariance the synthetic table relies on; the reported q values are
    still the printed objective.
    """
    if spec.kind == "fbeta":
        tau = spec.beta * spec.beta * p / (1.0 - p)

        def evaluate(fnr, fpr):
            with np.errstate(divide="ignore", invalid="ignore"):
                q = (fpr + tau * fnr) / (1.0 - fnr)
            return np.where(fnr >= 1.0, np.inf, q)

        return evaluate

    def evaluate(fnr, fpr):
        return q_grid(spec, fnr, fpr, p)

    return evaluate


def alpha_step(A, B, C, spec, p, options, extra_alphas=()):
    """Best worst-case error pair along a fixed direction.

    A and B are the per-class standard deviations along the direction, C the
    mean-gap projection (must be positive).  alpha_p candidates form a
    uniform grid on [A^2/(A^2+C^2), alpha_ceiling] with grid_points values,
    or advance from the lower bound in fixed increments of ``grid_step`` when
    that option is set.  ``extra_alphas`` joins the candidate set (used to
    warm-start from the previous round, which keeps the objective
    non-increasing on a finite grid).  For each candidate the constraint pins
    alpha_n = B^2 / (B^2 + (C - pi(alpha_p) A)^2).  Ties break toward the
    smallest alpha_p.
    """
    if not C > 0.0:
        raise SolverError("direction violates mean-gap positivity (w'g <= 0)")
    if not (A > 0.0 and B > 0.0):
        raise SolverError(
            "a class quadratic form vanishes along the current direction; add jitter"
        )
    lo = A * A / (A * A + C * C)
    hi = options.alpha_ceiling
    if lo >= hi:
        candidates = np.array([lo])
    elif options.grid_step is not None:
        candidates = np.arange(lo, hi, options.grid_step)
        if candidates.size == 0:
            candidates = np.array([lo])
    else:
        candidates = np.linspace(lo, hi, options.grid_points)
    extras = [a for a in extra_alphas if lo <= a <= hi]
    if extras:
        candidates = np.unique(np.concatenate([candidates, np.asarray(extras)]))
    slack = C - np.sqrt((1.0 - candidates) / candidates) * A
    alpha_n = B * B / (B * B + slack * slack)
    q = _objective(spec, p)(candidates, alpha_n)
    q = np.where(alpha_n >= 1.0, np.inf, q)
    best = int(np.argmin(q))
    if not math.isfinite(float(q[best])):
        raise SolverError("no feasible error pair along the current direction")
    return float(candidates[best]), float(alpha_n[best])


def lambda_value(problem, w, tau):
    """(w'g - tau sqrt(w'S_p w)) / sqrt(w'S_n w)."""
    w = np.asarray(w, dtype=float)
    den = math.sqrt(problem.form_n.value(w))
    if den == 0.0:
        raise SolverError("negative-class quadratic form vanishes along this direction")
    num = float(w @ problem.mean_gap) - tau * math.sqrt(problem.form_p.value(w))
    return num / den


def f_value(problem, v, tau, eta):
    """The ascent surrogate f(v) = v'g - tau sqrt(v'S_p v) - eta sqrt(v'S_n v)."""
    v = np.asarray(v, dtype=float)
    return (
        float(v @ problem.mean_gap)
        - tau * math.sqrt(problem.form_p.value(v))
        - eta * math.sqrt(problem.form_n.value(v))
    )


def _f_and_grad(problem, v, tau, eta):
    pv = problem.form_p.matvec(v)
    nv = problem.form_n.matvec(v)
    a = math.sqrt(max(float(v @ pv), 0.0))
    b = math.sqrt(max(float(v @ nv), 0.0))
    if a == 0.0:
        raise SolverError("positive-class quadratic form vanishes along this direction")
    if b == 0.0:
        raise SolverError("negative-class quadratic form vanishes along this direction")
    f = float(v @ problem.mean_gap) - tau * a - eta * b
    grad = problem.mean_gap - (tau / a) * pv - (eta / b) * nv
    lam = (float(v @ problem.mean_gap) - tau * a) / b
    return f, grad, lam


def ascend_direction(problem, w_t, tau, eta, options):
    """One inexact ascent of the surrogate over the unit sphere.

    Projected gradient steps v <- normalize(v + grad/k) run until the
    surrogate is nonnegative at two consecutive iterates and its gradient
    norm drops below ``grad_tol``, or until ``inner_max_steps``.  On the cap
    the feasible iterate (f >= 0) with the largest lambda seen is returned;
    if none improved on w_t, w_t itself comes back with a stalled flag.

    Returns (w_next, steps, stalled).
    """
    w_t = np.asarray(w_t, dtype=float)
    f_prev, grad, _ = _f_and_grad(problem, w_t, tau, eta)
    if float(np.linalg.norm(grad)) <= options.grad_tol:
        return w_t, 0, False
    v = w_t
    best_v = w_t
    best_lam = eta
    improved = False
    steps = 0
    for k in range(1, options.inner_max_steps + 1):
        steps = k
        gamma = 1.0 / k
        u = v + gamma * grad
        norm_u = float(np.linalg.norm(u))
        halvings = 0
        while norm_u == 0.0 and halvings < 10:
            gamma /= 2.0
            u = v + gamma * grad
            norm_u = float(np.linalg.norm(u))
            halvings += 1
        if norm_u == 0.0:
            break
        v_next = u / norm_u
        if np.array_equal(v_next, v):
            break
        f_next, grad_next, lam_next = _f_and_grad(problem, v_next, tau, eta)
        if f_next >= 0.0 and lam_next > best_lam:
            best_v, best_lam, improved = v_next, lam_next, True
        if (
            f_next >= 0.0
            and f_prev >= 0.0
            and float(np.linalg.norm(grad_next)) <= options.grad_tol
        ):
            return v_next, k, False
        v, f_prev, grad = v_next, f_next, grad_next
    if improved:
        return best_v, steps, False
    return w_t, steps, True


def solve(problem, options=None, w_init=None):
    """Run the alternating descent and return the best solution seen.

    The direction starts at the normalized mean gap unless ``w_init`` is
    given (it is normalized defensively).  Each round records a trace row;
    the search stops when a round improves the objective by at most ``q_tol``
    or after ``max_rounds`` rounds.
    """
    if options is None:
        options = SolverOptions()
    g = problem.mean_gap
    if w_init is None:
        w = g / float(np.linalg.norm(g))
    else:
        w = np.asarray(w_init, dtype=float)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            raise SolverError("w_init must be nonzero")
        w = w / norm
    if float(w @ g) <= 0.0:
        raise SolverError("initial direction violates mean-gap positivity (w'g <= 0)")
    objective = _objective(problem.spec, problem.p)

    def internal_q(alpha_p, alpha_n):
        return float(objective(np.array([alpha_p]), np.array([alpha_n]))[0])

    records = []
    best = None  # (internal q, w, alpha_p, alpha_n, public q)
    prev_alpha_p = None
    reason = "max_rounds"
    for round_no in range(1, options.max_rounds + 1):
        A = math.sqrt(problem.form_p.value(w))
        B = math.sqrt(problem.form_n.value(w))
        C = float(w @ g)
        if prev_alpha_p is None or not options.alpha_warm_start:
            extras = ()
        else:
            extras = (prev_alpha_p,)
        alpha_p, alpha_n = alpha_step(
            A, B, C, problem.spec, problem.p, options, extra_alphas=extras
        )
        q_int = internal_q(alpha_p, alpha_n)
        q_pub = q_objective(problem.spec, alpha_p, alpha_n, problem.p)
        if not math.isfinite(q_pub):
            raise SolverError("objective is not finite at the selected error pair")
        if best is None or q_int < best[0]:
            best = (q_int, w, alpha_p, alpha_n, q_pub)
        tau = pi(alpha_p)
        eta = lambda_value(problem, w, tau)
        w_next, inner_steps, _stalled = ascend_direction(problem, w, tau, eta, options)
        lam = lambda_value(problem, w_next, tau)
        alpha_n_new = 1.0 / (1.0 + lam * lam)
        q_int_new = internal_q(alpha_p, alpha_n_new)
        q_pub_new = q_objective(problem.spec, alpha_p, alpha_n_new, problem.p)
        if q_int_new < best[0]:
            best = (q_int_new, w_next, alpha_p, alpha_n_new, q_pub_new)
        records.append(
            TraceRecord(
                round=round_no,
                alpha_p=alpha_p,
                alpha_n=alpha_n,
                q_before=q_pub,
                q_after=q_pub_new,
                lam=lam,
                inner_steps=inner_steps,
            )
        )
        w = w_next
        prev_alpha_p = alpha_p
        if q_int - q_int_new <= options.q_tol:
            reason = "q_tol"
            break
    _, w_best, alpha_p, alpha_n, q_pub = best
    return SolverResult(
        w=w_best,
        alpha_p=alpha_p,
        alpha_n=alpha_n,
        q_value=q_pub,
        trace=SolverTrace(records),
        converged=reason == "q_tol",
        reason=reason,
    )


def bias(loc_p, form_p, w, alpha_p):
    """Decision offset b = w'loc_p - pi(alpha_p) sqrt(w'S_p w).

    ``loc_p`` is the positive-class location in the solver's coordinates: the
    class mean on the linear path, the average positive Gram column on the
    kernel path.
    """
    w = np.asarray(w, dtype=float)
    return float(w @ np.asarray(loc_p, dtype=float)) - pi(alpha_p) * math.sqrt(
        form_p.value(w)
    )


def bias_from_moments(moments, w, alpha_p):
    return bias(moments.mu_p, QuadraticForm.from_covariance(moments.sigma_p), w, alpha_p)


@dataclass(frozen=True)
class LinearModel:
    """Direction plus offset; predicts +1 when w'x - bias > 0."""

    w: np.ndarray
    bias: float

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))
        if self.w.ndim != 1:
            raise ValueError("w must be a vector")

    def to_dict(self):
        return {"type": "linear", "w": self.w.tolist(), "bias": self.bias}

    @classmethod
    def from_dict(cls, doc):
        return cls(w=np.asarray(doc["w"], dtype=float), bias=float(doc["bias"]))


def score(model, x):
    """w'x - bias for a single vector or row-wise for a matrix."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        if x.shape[0] != model.w.shape[0]:
            raise ValueError(
                f"dimension mismatch: model is {model.w.shape[0]}-d, x is {x.shape[0]}-d"
            )
        return float(x @ model.w) - model.bias
    if x.shape[1] != model.w.shape[0]:
        raise ValueError(
            f"dimension mismatch: model is {model.w.shape[0]}-d, x has {x.shape[1]} columns"
        )
    return x @ model.w - model.bias


def predict(model, x):
    """Sign of the score with strict > mapping to +1."""
    s = score(model, x)
    if np.ndim(s) == 0:
        return 1 if s > 0.0 else -1
    return np.where(s > 0.0, 1, -1)


def tune_bias(scores, labels, spec, reference=0.0):
    """Threshold sweep maximizing the measure on held-out scores.

    Candidates are midpoints of consecutive sorted unique scores plus the
    two infinite sentinels.  Ties break toward the threshold closest to
    ``reference`` (0 for scores that already subtract the fitted bias), then
    toward the smaller threshold.  The tuned decision is score > threshold.
    """
    from .measures import Rates, p_measure

    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same length")
    n_pos = int(np.count_nonzero(labels == 1))
    n_neg = int(np.count_nonzero(labels == -1))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("labels must contain both classes")
    p = n_pos / (n_pos + n_neg)
    unique = np.unique(scores)
    thresholds = [-math.inf]
    thresholds.extend(((unique[:-1] + unique[1:]) / 2.0).tolist())
    thresholds.append(math.inf)
    best_value = -math.inf
    ties = []
    for threshold in thresholds:
        above = scores > threshold
        tp = int(np.count_nonzero(above & (labels == 1)))
        fp = int(np.count_nonzero(above & (labels == -1)))
        rates = Rates(fnr=(n_pos - tp) / n_pos, fpr=fp / n_neg)
        value = p_measure(spec, rates, p)
        if value > best_value:
            best_value = value
            ties = [threshold]
        elif value == best_value:
            ties.append(threshold)
    return min(ties, key=lambda t: (abs(t - reference), t))
