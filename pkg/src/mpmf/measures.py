"""Performance-measure algebra for imbalanced binary classification.

Every supported measure comes in two equivalent faces: a score in terms of
the per-class hit rates (``p_measure``, larger is better) and a minimization
objective in terms of the per-class error rates (``q_objective``, smaller is
better).  The solver works on the second face; reporting uses the first.

Supported kinds: ``ar`` (accuracy rate), ``am`` (arithmetic mean of hit
rates), ``qm`` (quadratic mean complement), ``fbeta``, ``hm`` (harmonic
mean), ``gm`` (geometric mean), ``gtppr`` (geometric mean of recall and
precision), ``jac`` (Jaccard index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

KINDS = ("ar", "am", "qm", "fbeta", "hm", "gm", "gtppr", "jac")

# kinds whose minimization objective has a geometric-series expansion in fnr
SERIES_KINDS = frozenset({"fbeta", "hm", "gm", "gtppr", "jac"})


@dataclass(frozen=True)
class MeasureSpec:
    """Which measure to optimize.  ``beta`` is meaningful for ``fbeta`` only."""

    kind: str
    beta: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown measure kind {self.kind!r}")
        if self.kind == "fbeta":
            if self.beta is None:
                object.__setattr__(self, "beta", 1.0)
            if not (isinstance(self.beta, (int, float)) and self.beta > 0):
                raise ValueError("fbeta requires beta > 0")
        elif self.beta is not None:
            raise ValueError(f"beta only applies to fbeta, not {self.kind!r}")

    @property
    def name(self):
        if self.kind != "fbeta":
            return self.kind
        if self.beta == 1.0:
            return "f1"
        if self.beta == 2.0:
            return "f2"
        return f"fbeta:{self.beta:g}"


def parse_measure(text):
    """Parse a measure name such as ``f1``, ``am`` or ``fbeta:0.5``.

    Names are case-insensitive.  Raises ValueError on anything unknown.
    """
    if isinstance(text, MeasureSpec):
        return text
    name = str(text).strip().lower()
    if name == "f1":
        return MeasureSpec("fbeta", 1.0)
    if name == "f2":
        return MeasureSpec("fbeta", 2.0)
    if name.startswith("fbeta:"):
        try:
            beta = float(name.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad beta in measure string {text!r}") from None
        return MeasureSpec("fbeta", beta)
    if name in KINDS and name != "fbeta":
        return MeasureSpec(name)
    raise ValueError(
        f"unknown measure {text!r}; expected one of "
        "ar, am, qm, f1, f2, fbeta:<beta>, hm, gm, gtppr, jac"
    )


@dataclass(frozen=True)
class Rates:
    """Confusion rates.  Hit rates are derived so tpr + fnr = 1 exactly."""

    fnr: float
    fpr: float
    tp: int | None = None
    fp: int | None = None
    tn: int | None = None
    fn: int | None = None

    def __post_init__(self):
        for name in ("fnr", "fpr"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @property
    def tpr(self):
        return 1.0 - self.fnr

    @property
    def tnr(self):
        return 1.0 - self.fpr


def confusion_rates(predictions, labels):
    """Count a +1/-1 confusion table and return its Rates.

    Both classes must appear in ``labels``; otherwise one of the rates
    would be 0/0.
    """
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels must have the same length")
    for arr, what in ((predictions, "predictions"), (labels, "labels")):
        if not np.isin(arr, (-1, 1)).all():
            raise ValueError(f"{what} must take values in {{+1, -1}}")
    pos = labels == 1
    if not pos.any() or pos.all():
        raise ValueError("labels must contain both classes")
    tp = int(np.count_nonzero(pos & (predictions == 1)))
    fn = int(np.count_nonzero(pos)) - tp
    fp = int(np.count_nonzero(~pos & (predictions == 1)))
    tn = int(np.count_nonzero(~pos)) - fp
    return Rates(fnr=fn / (fn + tp), fpr=fp / (fp + tn), tp=tp, fp=fp, tn=tn, fn=fn)


def _check_p(p):
    if not (0.0 < p < 1.0):
        raise ValueError(f"class prior p must lie in (0, 1), got {p}")


def p_measure(spec, rates, p):
    """Value of the measure (larger is better) at the given rates.

    Ratios that degenerate to 0/0 (see ``degenerate``) are defined as 0.
    """
    _check_p(p)
    tpr, tnr = rates.tpr, rates.tnr
    fnr, fpr = rates.fnr, rates.fpr
    kind = spec.kind
    if kind == "ar":
        return p * tpr + (1.0 - p) * tnr
    if kind == "am":
        return (tpr + tnr) / 2.0
    if kind == "qm":
        return 1.0 - (fnr * fnr + fpr * fpr) / 2.0
    if kind == "fbeta":
        b2 = spec.beta * spec.beta
        num = (1.0 + b2) * p * tpr
        den = num + (1.0 - p) * fpr + b2 * p * fnr
        return 0.0 if den == 0.0 else num / den
    if kind == "hm":
        s = tpr + tnr
        return 0.0 if s == 0.0 else 2.0 * tpr * tnr / s
    if kind == "gm":
        return math.sqrt(tpr * tnr)
    if kind == "gtppr":
        predicted_pos = p * tpr + (1.0 - p) * fpr
        if predicted_pos == 0.0:
            return 0.0
        precision = p * tpr / predicted_pos
        return math.sqrt(tpr * precision)
    if kind == "jac":
        return p * tpr / (p * tpr + p * fnr + (1.0 - p) * fpr)
    raise AssertionError(kind)


def degenerate(spec, rates, p):
    """True when the measure at these rates involves a 0/0 constituent.

    For fbeta and gtppr that is an empty predicted-positive set (precision
    undefined); for hm it is tpr + tnr = 0.
    """
    _check_p(p)
    if spec.kind in ("fbeta", "gtppr"):
        return p * rates.tpr + (1.0 - p) * rates.fpr == 0.0
    if spec.kind == "hm":
        return rates.tpr + rates.tnr == 0.0
    return False


def q_grid(spec, fnr, fpr, p):
    """Vectorized minimization objective; divergent entries become +inf.

    Shared by the scalar ``q_objective`` and by the solver's grid search so
    both evaluate bit-identical expressions.
    """
    _check_p(p)
    fnr = np.asarray(fnr, dtype=float)
    fpr = np.asarray(fpr, dtype=float)
    kind = spec.kind
    if kind == "ar":
        return p * fnr + (1.0 - p) * fpr
    if kind == "am":
        return (fnr + fpr) / 2.0
    if kind == "qm":
        return (fnr * fnr + fpr * fpr) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind == "fbeta":
            b2 = spec.beta * spec.beta
            q = ((1.0 - p) * fpr + b2 * p * fnr) / (1.0 - fnr)
            return np.where(fnr >= 1.0, np.inf, q)
        if kind == "hm":
            q = 1.0 / (1.0 - fnr) + 1.0 / (1.0 - fpr)
            return np.where((fnr >= 1.0) | (fpr >= 1.0), np.inf, q)
        if kind == "gm":
            q = 1.0 / ((1.0 - fnr) * (1.0 - fpr))
            return np.where((fnr >= 1.0) | (fpr >= 1.0), np.inf, q)
        if kind == "gtppr":
            c = 1.0 - fnr
            q = p / c + (1.0 - p) * fpr / (c * c)
            return np.where(fnr >= 1.0, np.inf, q)
        if kind == "jac":
            q = (p * fnr + (1.0 - p) * fpr) / (1.0 - fnr)
            return np.where(fnr >= 1.0, np.inf, q)
    raise AssertionError(kind)


def q_objective(spec, fnr, fpr, p):
    """Minimization objective equivalent to the measure (smaller is better).

    Raises ValueError when the objective diverges: fnr = 1 for the series
    kinds, or fpr = 1 for hm and gm.
    """
    for name, v in (("fnr", fnr), ("fpr", fpr)):
        if not (0.0 <= v <= 1.0):
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    value = float(q_grid(spec, np.array([fnr]), np.array([fpr]), p)[0])
    if not math.isfinite(value):
        raise ValueError("objective diverges")
    return value


def evaluate(scores, labels, spec, p_override=None):
    """Threshold scores at zero (strict > maps to +1) and score the result.

    The class prior is taken from the labels unless ``p_override`` is given.
    Returns (value, rates, degenerate_flag).
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    predictions = np.where(scores > 0.0, 1, -1)
    rates = confusion_rates(predictions, labels)
    p = float(np.mean(labels == 1)) if p_override is None else float(p_override)
    return p_measure(spec, rates, p), rates, degenerate(spec, rates, p)
