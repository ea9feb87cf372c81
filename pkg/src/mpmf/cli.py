"""Command line interface: train, predict, evaluate, reproduce, bench.

Output convention is machine-readable first: one JSON object per line on
stdout, artifact files under --out, and human-aligned tables only behind
--pretty.  Artifact writes are atomic (write to a temp file in the target
directory, then rename), and identical configuration plus seed yields
byte-identical artifacts.

Exit codes: 0 success, 2 usage or configuration error, 3 data/model
mismatch, 4 solver failure.
"""

import argparse
import json
import logging
import os
import sys
import tempfile
import time

import numpy as np

from .data import BinaryDataset, ParseError, binarize_one_vs_all, load_dataset, split
from .kernels import (
    KernelModel,
    KernelSpec,
    parse_kernel,
    score_kernel,
    solve_kernel,
)
from .measures import MeasureSpec, evaluate, parse_measure
from .moments import ClassMoments, estimate_moments, moments_from_json, regularize
from .solver import (
    LinearModel,
    SolverError,
    SolverOptions,
    bias_from_moments,
    problem_from_moments,
    score,
    solve,
    tune_bias,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_SOLVER = 4

COMMANDS = ("train", "predict", "evaluate", "reproduce-synthetic", "bench")

log = logging.getLogger("mpmf")


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# output helpers

def _ensure_dir(path):
    os.makedirs(path, exist_ok=True)


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(doc):
    print(json.dumps(doc, sort_keys=True))


def _pretty_table(rows, headers):
    widths = [len(h) for h in headers]
    text_rows = [[str(c) for c in row] for row in rows]
    for row in text_rows:
        widths = [max(w, len(c)) for w, c in zip(widths, row)]
    line = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    print(line)
    print("  ".join("-" * w for w in widths))
    for row in text_rows:
        print("  ".join(c.ljust(w) for c, w in zip(row, widths)))


def _csv(headers, rows):
    lines = [",".join(headers)]
    for row in rows:
        lines.append(",".join(_cell(c) for c in row))
    return "\n".join(lines) + "\n"


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


# ---------------------------------------------------------------------------
# config file handling

def _read_config(path):
    try:
        with open(path, "r") as handle:
            lines = handle.read().splitlines()
    except OSError as exc:
        raise CliError(EXIT_USAGE, f"cannot read config file: {exc}")
    values = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(
                EXIT_USAGE, f"config line {lineno} is not key=value: {raw!r}"
            )
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _apply_config(subparser, values):
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, raw in values.items():
        if key == "config":
            continue
        action = actions.get(key)
        if action is None:
            raise CliError(EXIT_USAGE, f"unknown config key {key!r}")
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            try:
                defaults[key] = action.type(raw)
            except (TypeError, ValueError):
                raise CliError(EXIT_USAGE, f"bad value for config key {key!r}: {raw!r}")
        else:
            defaults[key] = raw
    subparser.set_defaults(**defaults)


def _extract_config_path(argv):
    for i, token in enumerate(argv):
        if token == "--config":
            if i + 1 >= len(argv):
                raise CliError(EXIT_USAGE, "--config requires a path")
            return argv[i + 1]
        if token.startswith("--config="):
            return token.split("=", 1)[1]
    return None


# ---------------------------------------------------------------------------
# shared loading logic

def _solver_options(args, grid_step=None, warm_start=True):
    return SolverOptions(
        grid_points=args.grid_points,
        max_rounds=args.max_rounds,
        grid_step=grid_step,
        alpha_warm_start=warm_start,
    )


def _measure_list(args):
    specs = []
    for token in str(args.measure).split(","):
        token = token.strip()
        if not token:
            continue
        if token.lower() == "fbeta" and getattr(args, "beta", None) is not None:
            specs.append(MeasureSpec("fbeta", beta=args.beta))
        else:
            specs.append(parse_measure(token))
    if not specs:
        raise CliError(EXIT_USAGE, "no measure given")
    return specs


def _require_file(path, what):
    if path is None:
        raise CliError(EXIT_USAGE, f"missing required {what} path")
    if not os.path.isfile(path):
        raise CliError(EXIT_USAGE, f"{what} file not found: {path}")
    return path


def _load_binary(path, fmt, label_column, positive_label):
    data = load_dataset(path, fmt=fmt, label_column=label_column)
    if positive_label is not None:
        return binarize_one_vs_all(data, positive_label)
    labels = np.asarray(data.labels)
    if not np.isin(labels, (-1, 1)).all():
        raise CliError(
            EXIT_DATA,
            "labels are not +1/-1; pass --positive-label to binarize",
        )
    return BinaryDataset(data.features, labels)


def _align_features(features, model_dim, fmt):
    """Pad implicit trailing zeros for sparse input; reject width mismatch."""
    features = np.asarray(features, dtype=float)
    if features.shape[1] == model_dim:
        return features
    if features.shape[1] < model_dim and fmt != "csv":
        pad = np.zeros((features.shape[0], model_dim - features.shape[1]))
        return np.hstack([features, pad])
    raise CliError(
        EXIT_DATA,
        f"model expects {model_dim} features, data has {features.shape[1]}",
    )


def _load_model(path):
    with open(path, "r") as handle:
        doc = json.load(handle)
    kind = doc.get("type")
    if kind == "linear":
        return LinearModel.from_dict(doc)
    if kind == "kernel":
        return KernelModel.from_dict(doc)
    raise CliError(EXIT_DATA, f"unrecognized model type {kind!r} in {path}")


def _model_dim(model):
    if isinstance(model, LinearModel):
        return model.w.shape[0]
    return model.n_features


def _model_scores(model, features):
    if isinstance(model, LinearModel):
        return score(model, features)
    return score_kernel(model, features)


def _detected_format(path, fmt):
    if fmt is not None:
        return fmt
    return "csv" if path.lower().endswith(".csv") else "libsvm"


# ---------------------------------------------------------------------------
# commands

def cmd_train(args):
    if (args.data is None) == (args.moments is None):
        raise CliError(EXIT_USAGE, "train needs exactly one of --data or --moments")
    if args.moments is not None and args.kernel is not None:
        raise CliError(EXIT_USAGE, "--kernel requires sample data, not --moments")
    specs = _measure_list(args)
    if len(specs) != 1:
        raise CliError(EXIT_USAGE, "train takes a single measure")
    spec = specs[0]
    _ensure_dir(args.out)
    started = time.perf_counter()

    if args.moments is not None:
        path = _require_file(args.moments, "moments")
        with open(path, "r") as handle:
            moments = moments_from_json(handle.read())
        moments = regularize(moments, args.jitter)
        options = _solver_options(args)
        result = solve(problem_from_moments(moments, spec), options)
        b = bias_from_moments(moments, result.w, result.alpha_p)
        model_doc = LinearModel(w=result.w, bias=b).to_dict()
    else:
        path = _require_file(args.data, "data")
        train = _load_binary(
            path, args.format, args.label_column, args.positive_label
        )
        if args.kernel is not None:
            kspec = parse_kernel(args.kernel)
            if args.gamma is not None:
                kspec = KernelSpec(
                    kind=kspec.kind,
                    gamma=args.gamma,
                    degree=kspec.degree,
                    coef0=kspec.coef0,
                )
            options = _solver_options(args)
            model, result = solve_kernel(
                kspec,
                train,
                spec,
                options=options,
                subsample=args.subsample,
                seed=args.seed,
            )
            model_doc = model.to_dict()
        else:
            moments = regularize(estimate_moments(train), args.jitter)
            options = _solver_options(args)
            result = solve(problem_from_moments(moments, spec), options)
            b = bias_from_moments(moments, result.w, result.alpha_p)
            model_doc = LinearModel(w=result.w, bias=b).to_dict()

    model_doc["measure"] = spec.name
    model_doc["alpha_p"] = result.alpha_p
    model_doc["alpha_n"] = result.alpha_n
    model_doc["q_value"] = result.q_value
    _atomic_write(
        os.path.join(args.out, "model.json"),
        json.dumps(model_doc, indent=2, sort_keys=True) + "\n",
    )
    _atomic_write(os.path.join(args.out, "trace.csv"), result.trace.to_csv() + "\n")
    wall_ms = (time.perf_counter() - started) * 1000.0
    summary = {
        "command": "train",
        "measure": spec.name,
        "q_value": result.q_value,
        "alpha_p": result.alpha_p,
        "alpha_n": result.alpha_n,
        "rounds": len(result.trace),
        "wall_ms": round(wall_ms, 3),
    }
    if args.pretty:
        _pretty_table(
            [[spec.name, f"{result.q_value:.6f}", f"{result.alpha_p:.4f}",
              f"{result.alpha_n:.4f}", len(result.trace)]],
            ["measure", "q", "alpha_p", "alpha_n", "rounds"],
        )
    else:
        _emit(summary)
    return EXIT_OK


def cmd_predict(args):
    model = _load_model(_require_file(args.model, "model"))
    path = _require_file(args.data, "data")
    fmt = _detected_format(path, args.format)
    data = load_dataset(path, fmt=args.format, label_column=args.label_column)
    features = _align_features(data.features, _model_dim(model), fmt)
    scores = np.atleast_1d(_model_scores(model, features))
    labels = np.where(scores > 0.0, 1, -1)
    _ensure_dir(args.out)
    rows = [
        (i, float(s), int(l))
        for i, (s, l) in enumerate(zip(scores.tolist(), labels.tolist()))
    ]
    _atomic_write(
        os.path.join(args.out, "predictions.csv"),
        _csv(["index", "score", "label"], rows),
    )
    summary = {
        "command": "predict",
        "n": int(labels.shape[0]),
        "positive": int(np.count_nonzero(labels == 1)),
    }
    if args.pretty:
        _pretty_table([[summary["n"], summary["positive"]]], ["n", "positive"])
    else:
        _emit(summary)
    return EXIT_OK


def _measure_report(scores, labels, specs):
    report = {}
    for spec in specs:
        value, rates, degenerate = evaluate(scores, labels, spec)
        report[spec.name] = {
            "value": value,
            "fnr": rates.fnr,
            "fpr": rates.fpr,
            "degenerate": degenerate,
        }
    return report


def _fit_linear(train, spec, args):
    moments = regularize(estimate_moments(train), args.jitter)
    options = _solver_options(args)
    result = solve(problem_from_moments(moments, spec), options)
    b = bias_from_moments(moments, result.w, result.alpha_p)
    return LinearModel(w=result.w, bias=b)


def _fit_any(train, spec, args):
    if args.kernel is not None:
        kspec = parse_kernel(args.kernel)
        if args.gamma is not None:
            kspec = KernelSpec(
                kind=kspec.kind,
                gamma=args.gamma,
                degree=kspec.degree,
                coef0=kspec.coef0,
            )
        model, _ = solve_kernel(
            kspec,
            train,
            spec,
            options=_solver_options(args),
            subsample=args.subsample,
            seed=args.seed,
        )
        return model
    return _fit_linear(train, spec, args)


def cmd_evaluate(args):
    specs = _measure_list(args)
    _ensure_dir(args.out)

    if args.one_vs_all:
        train_path = _require_file(args.data, "data")
        test_path = _require_file(args.test, "test")
        train = load_dataset(train_path, fmt=args.format, label_column=args.label_column)
        test = load_dataset(test_path, fmt=args.format, label_column=args.label_column)
        if train.feature_dim != test.feature_dim:
            fmt = _detected_format(test_path, args.format)
            test_features = _align_features(test.features, train.feature_dim, fmt)
        else:
            test_features = test.features
        classes = sorted(int(c) for c in np.unique(train.labels))
        per_class = {}
        for cls in classes:
            btrain = binarize_one_vs_all(train, cls)
            btest_labels = np.where(np.asarray(test.labels) == cls, 1, -1)
            model = _fit_any(btrain, specs[0], args)
            scores = np.atleast_1d(_model_scores(model, test_features))
            per_class[str(cls)] = _measure_report(scores, btest_labels, specs)
        macro = {
            spec.name: float(
                np.mean([per_class[str(c)][spec.name]["value"] for c in classes])
            )
            for spec in specs
        }
        doc = {"mode": "one_vs_all", "per_class": per_class, "macro": macro}
    elif args.tune_bias is not None:
        if not (0.0 < args.tune_bias < 1.0):
            raise CliError(EXIT_USAGE, "--tune-bias takes a fraction in (0, 1)")
        data_path = _require_file(args.data, "data")
        test_path = _require_file(args.test, "test")
        full = _load_binary(data_path, args.format, args.label_column, args.positive_label)
        test = _load_binary(test_path, args.format, args.label_column, args.positive_label)
        fit_part, val_part = split(full, 1.0 - args.tune_bias, args.seed)
        model = _fit_any(fit_part, specs[0], args)
        fmt = _detected_format(test_path, args.format)
        dim = _model_dim(model)
        val_scores = np.atleast_1d(
            _model_scores(model, _align_features(val_part.features, dim, fmt))
        )
        shift = tune_bias(val_scores, val_part.labels, specs[0])
        test_features = _align_features(test.features, dim, fmt)
        raw_scores = np.atleast_1d(_model_scores(model, test_features))
        doc = {
            "mode": "tuned",
            "threshold_shift": float(shift),
            "raw": _measure_report(raw_scores, test.labels, specs),
            "tuned": _measure_report(raw_scores - shift, test.labels, specs),
        }
    else:
        model = _load_model(_require_file(args.model, "model"))
        test_path = _require_file(args.test, "test")
        test = _load_binary(test_path, args.format, args.label_column, args.positive_label)
        fmt = _detected_format(test_path, args.format)
        features = _align_features(test.features, _model_dim(model), fmt)
        scores = np.atleast_1d(_model_scores(model, features))
        doc = {"mode": "model", "measures": _measure_report(scores, test.labels, specs)}

    _atomic_write(
        os.path.join(args.out, "metrics.json"),
        json.dumps(doc, indent=2, sort_keys=True) + "\n",
    )
    if args.pretty:
        if doc.get("mode") == "one_vs_all":
            rows = [
                [cls] + [f"{doc['per_class'][cls][s.name]['value']:.4f}" for s in specs]
                for cls in doc["per_class"]
            ]
            rows.append(["macro"] + [f"{doc['macro'][s.name]:.4f}" for s in specs])
            _pretty_table(rows, ["class"] + [s.name for s in specs])
        else:
            section = doc["measures"] if doc.get("mode") == "model" else doc["tuned"]
            _pretty_table(
                [[name, f"{entry['value']:.4f}", f"{entry['fnr']:.4f}",
                  f"{entry['fpr']:.4f}"] for name, entry in section.items()],
                ["measure", "value", "fnr", "fpr"],
            )
    else:
        _emit({"command": "evaluate", **doc})
    return EXIT_OK


SYNTHETIC_MOMENTS = ClassMoments(
    mu_p=np.array([3.0, 1.0]),
    sigma_p=np.array([[1.0, 0.5], [0.5, 1.0]]),
    mu_n=np.array([-1.0, -2.0]),
    sigma_n=np.array([[1.0, 1.0 / 3.0], [1.0 / 3.0, 1.0]]),
    p=0.5,
)

SYNTHETIC_PS = (0.5, 0.4, 0.3, 0.2, 0.1, 0.05, 0.01)
SYNTHETIC_BETAS = (1.0, 3.0)

# The published error-pair table was produced by a coarse fixed-step search
# over alpha_p (step 0.01 from the per-round lower bound) with the last
# round's pair reported; this configuration reproduces it to print precision.
SYNTHETIC_OPTIONS = SolverOptions(grid_step=0.01, alpha_warm_start=False)


def synthetic_rows(options=SYNTHETIC_OPTIONS):
    """(p, beta, alpha_p, alpha_n) rows for the fixed two-Gaussian setup."""
    rows = []
    for beta in SYNTHETIC_BETAS:
        for p in SYNTHETIC_PS:
            moments = ClassMoments(
                mu_p=SYNTHETIC_MOMENTS.mu_p,
                sigma_p=SYNTHETIC_MOMENTS.sigma_p,
                mu_n=SYNTHETIC_MOMENTS.mu_n,
                sigma_n=SYNTHETIC_MOMENTS.sigma_n,
                p=p,
            )
            spec = MeasureSpec("fbeta", beta=beta)
            result = solve(problem_from_moments(moments, spec), options)
            last = result.trace.records[-1]
            alpha_n = 1.0 / (1.0 + last.lam * last.lam)
            rows.append((p, beta, last.alpha_p, alpha_n))
    return rows


def cmd_reproduce_synthetic(args):
    _ensure_dir(args.out)
    rows = synthetic_rows()
    _atomic_write(
        os.path.join(args.out, "synthetic.csv"),
        _csv(["p", "beta", "alpha_p", "alpha_n"], rows),
    )
    if args.pretty:
        _pretty_table(
            [[p, beta, f"{ap:.4f}", f"{an:.4f}"] for p, beta, ap, an in rows],
            ["p", "beta", "alpha_p", "alpha_n"],
        )
    else:
        for p, beta, ap, an in rows:
            _emit(
                {
                    "command": "reproduce-synthetic",
                    "p": p,
                    "beta": beta,
                    "alpha_p": ap,
                    "alpha_n": an,
                }
            )
    return EXIT_OK


def cmd_bench(args):
    specs = _measure_list(args)
    paths = args.data or []
    if not paths:
        raise CliError(EXIT_USAGE, "bench needs at least one --data path")
    for path in paths:
        _require_file(path, "data")
    _ensure_dir(args.out)
    rows = []
    for path in paths:
        train = _load_binary(path, args.format, args.label_column, args.positive_label)
        name = os.path.basename(path)
        for spec in specs:
            samples = []
            for _ in range(max(1, args.repeats)):
                started = time.perf_counter()
                _fit_any(train, spec, args)
                samples.append(time.perf_counter() - started)
            median = float(np.median(samples))
            low_confidence = args.repeats < 2
            rows.append((name, spec.name, median, args.repeats, low_confidence))
            _emit(
                {
                    "command": "bench",
                    "dataset": name,
                    "measure": spec.name,
                    "median_seconds": median,
                    "repeats": args.repeats,
                    "low_confidence": low_confidence,
                }
            )
    _atomic_write(
        os.path.join(args.out, "timings.csv"),
        _csv(["dataset", "measure", "median_seconds", "repeats", "low_confidence"], rows),
    )
    if args.pretty:
        _pretty_table(
            [[d, m, f"{s:.4f}", r, lc] for d, m, s, r, lc in rows],
            ["dataset", "measure", "median_s", "repeats", "low_confidence"],
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser assembly

def _add_common(sub):
    sub.add_argument("--config", help="key=value config file; flags override")
    sub.add_argument("--out", default="mpmf-out", help="artifact directory")
    sub.add_argument("--pretty", action="store_true", help="human tables on stdout")
    sub.add_argument("--seed", type=int, default=0)


def _add_data_flags(sub):
    sub.add_argument("--format", choices=("libsvm", "csv"))
    sub.add_argument("--label-column", type=int, default=0)
    sub.add_argument("--positive-label", type=int)


def _add_train_flags(sub):
    sub.add_argument("--measure", default="f1")
    sub.add_argument("--beta", type=float)
    sub.add_argument("--kernel")
    sub.add_argument("--gamma", type=float)
    sub.add_argument("--subsample", type=int, default=200)
    sub.add_argument("--jitter", type=float, default=1e-8)
    sub.add_argument("--grid-points", type=int, default=4096)
    sub.add_argument("--max-rounds", type=int, default=200)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mpmf",
        description="Minimax classifiers for non-decomposable performance measures",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    train = subs.add_parser("train", help="fit a model and write model.json + trace.csv")
    _add_common(train)
    _add_data_flags(train)
    _add_train_flags(train)
    train.add_argument("--data", help="training data file (libsvm or csv)")
    train.add_argument("--moments", help="class-moments JSON file instead of data")
    train.set_defaults(func=cmd_train)

    predict = subs.add_parser("predict", help="score a dataset with a trained model")
    _add_common(predict)
    _add_data_flags(predict)
    predict.add_argument("--model", required=True)
    predict.add_argument("--data", required=True)
    predict.set_defaults(func=cmd_predict)

    ev = subs.add_parser("evaluate", help="measure a model or protocol on test data")
    _add_common(ev)
    _add_data_flags(ev)
    _add_train_flags(ev)
    ev.add_argument("--model")
    ev.add_argument("--data", help="training data for --one-vs-all / --tune-bias")
    ev.add_argument("--test", help="test data file")
    ev.add_argument("--one-vs-all", action="store_true")
    ev.add_argument(
        "--tune-bias",
        type=float,
        help="validation fraction; reports raw and tuned metrics",
    )
    ev.set_defaults(func=cmd_evaluate)

    rep = subs.add_parser(
        "reproduce-synthetic",
        help="rerun the fixed two-Gaussian error-pair table",
    )
    _add_common(rep)
    rep.set_defaults(func=cmd_reproduce_synthetic)

    bench = subs.add_parser("bench", help="time training per measure per dataset")
    _add_common(bench)
    _add_data_flags(bench)
    _add_train_flags(bench)
    bench.add_argument("--data", action="append", help="dataset path (repeatable)")
    bench.add_argument("--repeats", type=int, default=3)
    bench.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    level = os.environ.get("MPMF_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    try:
        config_path = _extract_config_path(argv)
        if config_path is not None:
            command = next((t for t in argv if t in COMMANDS), None)
            if command is None:
                raise CliError(EXIT_USAGE, "config requires a command")
            sub = next(
                a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
            )
            _apply_config(sub.choices[command], _read_config(config_path))
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ParseError as exc:
        print(f"error: malformed data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def console_main():
    sys.exit(main())


if __name__ == "__main__":
    console_main()
