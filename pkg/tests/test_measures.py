"""Measure algebra: both faces of every measure against independent math."""

import math

import numpy as np
import pytest
from sklearn.metrics import confusion_matrix

from mpmf.measures import (
    KINDS,
    MeasureSpec,
    Rates,
    confusion_rates,
    degenerate,
    evaluate,
    p_measure,
    parse_measure,
    q_grid,
    q_objective,
)

# hand-computed values at fnr=0.2, fpr=0.3, p=0.25 (tpr=0.8, tnr=0.7)
HAND_POINT = Rates(fnr=0.2, fpr=0.3)
HAND_P = 0.25
HAND_VALUES = {
    "ar": 0.25 * 0.8 + 0.75 * 0.7,
    "am": (0.8 + 0.7) / 2.0,
    "qm": 1.0 - (0.04 + 0.09) / 2.0,
    "f1": 0.4 / 0.675,
    "hm": 2.0 * 0.8 * 0.7 / 1.5,
    "gm": math.sqrt(0.56),
    "gtppr": math.sqrt(0.8 * (0.2 / 0.425)),
    "jac": 0.2 / 0.475,
}


def all_specs():
    specs = []
    for kind in KINDS:
        if kind == "fbeta":
            specs.extend(
                [MeasureSpec("fbeta", 1.0), MeasureSpec("fbeta", 2.0), MeasureSpec("fbeta", 0.5)]
            )
        else:
            specs.append(MeasureSpec(kind))
    return specs


# ---------------------------------------------------------------------------
# parsing and spec validation

def test_parse_measure_names():
    assert parse_measure("f1") == MeasureSpec("fbeta", 1.0)
    assert parse_measure("F2") == MeasureSpec("fbeta", 2.0)
    assert parse_measure(" fbeta:0.5 ") == MeasureSpec("fbeta", 0.5)
    assert parse_measure("am") == MeasureSpec("am")
    assert parse_measure("GTPPR") == MeasureSpec("gtppr")
    spec = MeasureSpec("jac")
    assert parse_measure(spec) is spec


@pytest.mark.parametrize("bad", ["", "fbeta", "f3", "fbeta:x", "accuracy", "f1 "[:-1] + "x"])
def test_parse_measure_rejects_unknown(bad):
    with pytest.raises(ValueError):
        parse_measure(bad)


def test_spec_validation():
    assert MeasureSpec("fbeta").beta == 1.0
    with pytest.raises(ValueError):
        MeasureSpec("nope")
    with pytest.raises(ValueError):
        MeasureSpec("fbeta", beta=0.0)
    with pytest.raises(ValueError):
        MeasureSpec("fbeta", beta=-2.0)
    with pytest.raises(ValueError):
        MeasureSpec("am", beta=1.0)


def test_spec_names():
    assert MeasureSpec("fbeta", 1.0).name == "f1"
    assert MeasureSpec("fbeta", 2.0).name == "f2"
    assert MeasureSpec("fbeta", 0.5).name == "fbeta:0.5"
    assert MeasureSpec("qm").name == "qm"


# ---------------------------------------------------------------------------
# confusion counting

def test_confusion_rates_against_sklearn():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(10, 200))
        labels = np.where(rng.random(n) < 0.4, 1, -1)
        if not (labels == 1).any() or (labels == 1).all():
            continue
        predictions = np.where(rng.random(n) < 0.5, 1, -1)
        rates = confusion_rates(predictions, labels)
        tn, fp, fn, tp = confusion_matrix(labels, predictions, labels=[-1, 1]).ravel()
        assert (rates.tp, rates.fp, rates.tn, rates.fn) == (tp, fp, tn, fn)
        assert rates.fnr == fn / (fn + tp)
        assert rates.fpr == fp / (fp + tn)


def test_confusion_rates_errors():
    with pytest.raises(ValueError):
        confusion_rates([1, -1], [1, -1, 1])
    with pytest.raises(ValueError):
        confusion_rates([1, 0], [1, -1])
    with pytest.raises(ValueError):
        confusion_rates([1, -1], [1, 2])
    with pytest.raises(ValueError):
        confusion_rates([1, -1], [1, 1])


def test_rates_validation_and_derived():
    r = Rates(fnr=0.25, fpr=0.5)
    assert r.tpr == 0.75 and r.tnr == 0.5
    with pytest.raises(ValueError):
        Rates(fnr=-0.1, fpr=0.0)
    with pytest.raises(ValueError):
        Rates(fnr=0.0, fpr=1.5)


# ---------------------------------------------------------------------------
# the score face

def test_p_measure_hand_values():
    for name, expected in HAND_VALUES.items():
        spec = parse_measure(name)
        value = p_measure(spec, HAND_POINT, HAND_P)
        assert value == pytest.approx(expected, rel=1e-12), name


def test_p_measure_perfect_classifier():
    perfect = Rates(fnr=0.0, fpr=0.0)
    for spec in all_specs():
        assert p_measure(spec, perfect, 0.3) == pytest.approx(1.0)


def test_p_measure_rejects_bad_prior():
    for p in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            p_measure(MeasureSpec("am"), HAND_POINT, p)


def test_degenerate_rates():
    nothing_positive = Rates(fnr=1.0, fpr=0.0)
    for name in ("f1", "gtppr"):
        spec = parse_measure(name)
        assert degenerate(spec, nothing_positive, 0.5)
        assert p_measure(spec, nothing_positive, 0.5) == 0.0
        assert not degenerate(spec, HAND_POINT, 0.5)
    all_wrong = Rates(fnr=1.0, fpr=1.0)
    assert degenerate(MeasureSpec("hm"), all_wrong, 0.5)
    assert p_measure(MeasureSpec("hm"), all_wrong, 0.5) == 0.0
    assert not degenerate(MeasureSpec("am"), all_wrong, 0.5)


# ---------------------------------------------------------------------------
# the objective face and the bridge between the faces

def bridge_value(spec, q, p):
    """Measure value recovered from the objective value alone."""
    kind = spec.kind
    if kind in ("ar", "am", "qm"):
        return 1.0 - q
    if kind == "fbeta":
        b2 = spec.beta * spec.beta
        return 1.0 / (1.0 + q / (p * (1.0 + b2)))
    if kind == "hm":
        return 2.0 / q
    if kind == "gm":
        return 1.0 / math.sqrt(q)
    if kind == "gtppr":
        return math.sqrt(p / q)
    if kind == "jac":
        return 1.0 / (1.0 + q / p)
    raise AssertionError(kind)


def test_score_and_objective_faces_agree():
    rng = np.random.default_rng(1)
    for spec in all_specs():
        for _ in range(200):
            fnr = float(rng.uniform(0.0, 0.95))
            fpr = float(rng.uniform(0.0, 0.95))
            p = float(rng.uniform(0.05, 0.95))
            rates = Rates(fnr=fnr, fpr=fpr)
            q = q_objective(spec, fnr, fpr, p)
            assert bridge_value(spec, q, p) == pytest.approx(
                p_measure(spec, rates, p), rel=1e-12, abs=1e-12
            ), spec.name


def series_objective(spec, fnr, fpr, p, terms=1000):
    """Objective via geometric-series expansions of the 1/(1-rate) factors."""
    inv_fnr = sum(fnr**k for k in range(terms))
    kind = spec.kind
    if kind == "fbeta":
        b2 = spec.beta * spec.beta
        return ((1.0 - p) * fpr + b2 * p * fnr) * inv_fnr
    if kind == "hm":
        inv_fpr = sum(fpr**k for k in range(terms))
        return inv_fnr + inv_fpr
    if kind == "gm":
        inv_fpr = sum(fpr**k for k in range(terms))
        return inv_fnr * inv_fpr
    if kind == "gtppr":
        return p * inv_fnr + (1.0 - p) * fpr * inv_fnr * inv_fnr
    if kind == "jac":
        return (p * fnr + (1.0 - p) * fpr) * inv_fnr
    raise AssertionError(kind)


def test_closed_forms_match_series():
    rng = np.random.default_rng(2)
    series_specs = [s for s in all_specs() if s.kind in ("fbeta", "hm", "gm", "gtppr", "jac")]
    for spec in series_specs:
        for _ in range(50):
            fnr = float(rng.uniform(0.0, 0.9))
            fpr = float(rng.uniform(0.0, 0.9))
            p = float(rng.uniform(0.05, 0.95))
            closed = q_objective(spec, fnr, fpr, p)
            series = series_objective(spec, fnr, fpr, p)
            assert closed == pytest.approx(series, abs=1e-8), spec.name


def test_q_objective_divergence():
    for name in ("f1", "hm", "gm", "gtppr", "jac"):
        with pytest.raises(ValueError):
            q_objective(parse_measure(name), 1.0, 0.2, 0.5)
    for name in ("hm", "gm"):
        with pytest.raises(ValueError):
            q_objective(parse_measure(name), 0.2, 1.0, 0.5)
    # decomposable kinds stay finite at the corner
    assert q_objective(MeasureSpec("ar"), 1.0, 1.0, 0.3) == pytest.approx(1.0)
    assert q_objective(MeasureSpec("am"), 1.0, 1.0, 0.3) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        q_objective(MeasureSpec("am"), 1.2, 0.0, 0.3)


def test_q_grid_matches_scalar_and_marks_divergence():
    rng = np.random.default_rng(3)
    fnr = rng.uniform(0.0, 0.99, size=64)
    fpr = rng.uniform(0.0, 0.99, size=64)
    for spec in all_specs():
        grid = q_grid(spec, fnr, fpr, 0.3)
        for i in range(64):
            assert grid[i] == q_objective(spec, float(fnr[i]), float(fpr[i]), 0.3)
    grid = q_grid(MeasureSpec("fbeta", 1.0), np.array([1.0, 0.5]), np.array([0.1, 0.1]), 0.3)
    assert math.isinf(grid[0]) and math.isfinite(grid[1])


# ---------------------------------------------------------------------------
# evaluate

def test_evaluate_thresholds_strictly():
    scores = np.array([-1.0, 0.0, 0.5, 2.0])
    labels = np.array([-1, -1, 1, 1])
    value, rates, flag = evaluate(scores, labels, MeasureSpec("fbeta", 1.0))
    # the zero score lands on the negative side
    assert rates.fnr == 0.0 and rates.fpr == 0.0
    assert value == pytest.approx(1.0)
    assert flag is False


def test_evaluate_prior_override():
    scores = np.array([1.0, 1.0, -1.0, -1.0])
    labels = np.array([1, -1, 1, -1])
    spec = MeasureSpec("fbeta", 1.0)
    value_default, rates, _ = evaluate(scores, labels, spec)
    value_override, _, _ = evaluate(scores, labels, spec, p_override=0.2)
    assert value_default == pytest.approx(p_measure(spec, rates, 0.5))
    assert value_override == pytest.approx(p_measure(spec, rates, 0.2))
