"""Pairwise kernel ridge regression with the generalized vec trick."""

__version__ = "0.1.0"

from .gvt import GvtProblem, count_ops, gvt_cost, gvt_matvec, gvt_op_count
from .kernels import (KERNEL_NAMES, PairwiseKernelSpec, PairwiseOperator, decompose,
                      gaussian_base_kernel, kernel_value, linear_base_kernel,
                      pairwise_matvec, tanimoto_base_kernel)
from .oracle import build_explicit, explicit_matvec
from .solver import Model, SymmetricOperator, fit_early_stopping, minres_solve, predict, ridge_fit
from .types import Dataset, PairSample, SideData, relabel_compact, validate_dataset

__all__ = [
    "GvtProblem", "count_ops", "gvt_cost", "gvt_matvec", "gvt_op_count",
    "KERNEL_NAMES", "PairwiseKernelSpec", "PairwiseOperator", "decompose",
    "gaussian_base_kernel", "kernel_value", "linear_base_kernel", "pairwise_matvec",
    "tanimoto_base_kernel", "build_explicit", "explicit_matvec", "Model",
    "SymmetricOperator", "fit_early_stopping", "minres_solve", "predict", "ridge_fit",
    "Dataset", "PairSample", "SideData", "relabel_compact", "validate_dataset",
]
