"""Explicit pairwise kernel matrices built straight from the kernel formulas.

This is the O(n_out * n_in) reference path. It never touches the term
decompositions in :mod:`pairgvt.kernels`, so agreement between the two is a
meaningful check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .kernels import check_samples, decompose
from .types import PairSample, as_matrix


@dataclass(frozen=True)
class ExplicitKernelMatrix:
    matrix: np.ndarray
    kernel: str
    out_sample: PairSample
    in_sample: PairSample

    @property
    def nbytes(self) -> int:
        return int(self.matrix.nbytes)


def explicit_matrix(name: str, D, T, out_sample: PairSample, in_sample: PairSample) -> np.ndarray:
    spec = decompose(name)
    D = as_matrix(D, "D")
    T = None if T is None else as_matrix(T, "T")
    T = check_samples(spec, D, T, out_sample, in_sample)
    a, a2 = out_sample.first_ids, out_sample.second_ids
    b, b2 = in_sample.first_ids, in_sample.second_ids
    key = spec.name
    if key in ("symmetric", "antisymmetric", "ranking", "mlpk"):
        k11 = D[np.ix_(a, b)]
        k22 = D[np.ix_(a2, b2)]
        k12 = D[np.ix_(a, b2)]
        k21 = D[np.ix_(a2, b)]
        if key == "symmetric":
            return k11 * k22 + k12 * k21
        if key == "antisymmetric":
            return k11 * k22 - k12 * k21
        r = k11 - k12 - k21 + k22
        return r if key == "ranking" else r * r
    kd = D[np.ix_(a, b)]
    kt = T[np.ix_(a2, b2)]
    if key == "linear":
        return kd + kt
    if key == "poly2d":
        return (kd + kt) ** 2
    if key == "kronecker":
        return kd * kt
    same_d = (a[:, None] == b[None, :])
    same_t = (a2[:, None] == b2[None, :])
    return kd * same_t + same_d * kt


def build_explicit(name: str, D, T: Optional[np.ndarray], out_sample: PairSample,
                   in_sample: PairSample) -> ExplicitKernelMatrix:
    M = explicit_matrix(name, D, T, out_sample, in_sample)
    return ExplicitKernelMatrix(M, decompose(name).name, out_sample, in_sample)


def explicit_matvec(K, v) -> np.ndarray:
    M = K.matrix if isinstance(K, ExplicitKernelMatrix) else as_matrix(K, "K")
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.size != M.shape[1]:
        raise ValueError(f"vector length {v.size} does not match {M.shape[1]} columns")
    return M @ v
