"""Minimax classifiers for non-decomposable performance measures.

Binary linear and kernelized classifiers learned from class means and
covariances alone, with worst-case guarantees on the false negative and
false positive rates.  The target measure (F-beta, arithmetic/geometric/
harmonic means of class accuracies, Jaccard, and friends) is optimized
directly through its worst-case rate pair rather than through a surrogate
loss.
"""

from .data import (
    BinaryDataset,
    Dataset,
    ParseError,
    binarize_one_vs_all,
    load_dataset,
    parse_csv,
    parse_sparse,
    split,
    to_sparse_text,
)
from .estimators import KernelMPMFClassifier, MPMClassifier, MPMFClassifier
from .kernels import (
    KernelModel,
    KernelSpec,
    centered_factors,
    gram,
    kernel_matrix,
    median_heuristic_gamma,
    parse_kernel,
    predict_kernel,
    score_kernel,
    solve_kernel,
)
from .measures import (
    KINDS,
    MeasureSpec,
    Rates,
    confusion_rates,
    evaluate,
    p_measure,
    parse_measure,
    q_grid,
    q_objective,
)
from .moments import (
    ClassMoments,
    estimate_moments,
    moments_from_json,
    moments_to_json,
    regularize,
)
from .mpm import MpmResult, solve_mpm
from .solver import (
    LinearModel,
    MomentProblem,
    QuadraticForm,
    SolverError,
    SolverOptions,
    SolverResult,
    SolverTrace,
    TraceRecord,
    bias,
    bias_from_moments,
    kappa,
    pi,
    predict,
    problem_from_moments,
    score,
    solve,
    tune_bias,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryDataset",
    "ClassMoments",
    "Dataset",
    "KernelMPMFClassifier",
    "KernelModel",
    "KernelSpec",
    "LinearModel",
    "KINDS",
    "MPMClassifier",
    "MPMFClassifier",
    "MeasureSpec",
    "MomentProblem",
    "MpmResult",
    "ParseError",
    "QuadraticForm",
    "Rates",
    "SolverError",
    "SolverOptions",
    "SolverResult",
    "SolverTrace",
    "TraceRecord",
    "bias",
    "bias_from_moments",
    "binarize_one_vs_all",
    "centered_factors",
    "confusion_rates",
    "estimate_moments",
    "evaluate",
    "gram",
    "kappa",
    "kernel_matrix",
    "load_dataset",
    "median_heuristic_gamma",
    "moments_from_json",
    "moments_to_json",
    "p_measure",
    "parse_csv",
    "parse_kernel",
    "parse_measure",
    "parse_sparse",
    "pi",
    "predict",
    "predict_kernel",
    "problem_from_moments",
    "q_grid",
    "q_objective",
    "regularize",
    "score",
    "score_kernel",
    "solve",
    "solve_kernel",
    "solve_mpm",
    "split",
    "to_sparse_text",
    "tune_bias",
]
