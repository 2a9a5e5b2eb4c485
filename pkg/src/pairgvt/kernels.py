"""Base kernels and pairwise kernels as sums of index-permuted Kronecker products.

A pairwise kernel between an *out* pair ``(a, a')`` and an *in* pair
``(b, b')`` is written as a sum of terms

    coefficient * L[sel(a, a'), sel(b, b')] * R[sel(a, a'), sel(b, b')]

where ``L`` and ``R`` are drug/target base kernels, all-ones or identity
matrices, and each ``sel`` picks the first or second element of a pair.
Swapping the selectors of a pair is the commutation operator; repeating one
element in both slots is the unification operator. Each term is one GVT call.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .gvt import GvtProblem, gvt_matvec
from .types import PairSample, as_matrix, relabel_compact


# --------------------------------------------------------------------------
# base kernels
# --------------------------------------------------------------------------

def linear_base_kernel(X, Xbar) -> np.ndarray:
    X, Xbar = as_matrix(X, "X"), as_matrix(Xbar, "Xbar")
    if X.shape[1] != Xbar.shape[1]:
        raise ValueError(f"feature dimensions differ: {X.shape[1]} != {Xbar.shape[1]}")
    return X @ Xbar.T


def gaussian_base_kernel(X, Xbar, gamma: float) -> np.ndarray:
    """``exp(-gamma * ||x - xbar||^2)`` for every row pair."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    X, Xbar = as_matrix(X, "X"), as_matrix(Xbar, "Xbar")
    if X.shape[1] != Xbar.shape[1]:
        raise ValueError(f"feature dimensions differ: {X.shape[1]} != {Xbar.shape[1]}")
    return np.exp(-gamma * cdist(X, Xbar, "sqeuclidean"))


def tanimoto_base_kernel(Bm, Bbar) -> np.ndarray:
    """MinMax similarity of binary vectors: shared set bits over bits set in either.

    Two all-zero vectors get similarity 1.
    """
    Bm, Bbar = as_matrix(Bm, "B"), as_matrix(Bbar, "Bbar")
    if Bm.shape[1] != Bbar.shape[1]:
        raise ValueError(f"feature dimensions differ: {Bm.shape[1]} != {Bbar.shape[1]}")
    for M in (Bm, Bbar):
        if not np.all((M == 0) | (M == 1)):
            raise ValueError("tanimoto kernel requires binary (0/1) features")
    inter = Bm @ Bbar.T
    union = Bm.sum(axis=1)[:, None] + Bbar.sum(axis=1)[None, :] - inter
    K = np.ones_like(inter)
    nz = union > 0
    K[nz] = inter[nz] / union[nz]
    return K


BASE_KERNELS = ("linear", "gaussian", "tanimoto")


def base_kernel(name: str, X, Xbar=None, gamma: Optional[float] = None) -> np.ndarray:
    Xbar = X if Xbar is None else Xbar
    if name == "linear":
        return linear_base_kernel(X, Xbar)
    if name == "gaussian":
        if gamma is None:
            raise ValueError("gaussian base kernel needs gamma")
        return gaussian_base_kernel(X, Xbar, gamma)
    if name == "tanimoto":
        return tanimoto_base_kernel(X, Xbar)
    raise ValueError(f"unknown base kernel {name!r}")


# --------------------------------------------------------------------------
# decomposition into Kronecker terms
# --------------------------------------------------------------------------

class FactorKind(enum.Enum):
    DRUG = "drug"
    TARGET = "target"
    ONES = "ones"
    IDENTITY = "identity"


class Sel(enum.Enum):
    """Element selector: which member of a pair indexes a factor."""

    FIRST = "first"
    SECOND = "second"


F, S = Sel.FIRST, Sel.SECOND
DRUG, TARGET, ONES, IDENTITY = FactorKind


@dataclass(frozen=True)
class KernelTerm:
    coefficient: float
    left_factor: FactorKind
    right_factor: FactorKind
    row_sel_left: Sel
    row_sel_right: Sel
    col_sel_left: Sel
    col_sel_right: Sel

    def permuted_rows(self) -> "KernelTerm":
        """Left-multiplication by the commutation operator."""
        return KernelTerm(self.coefficient, self.left_factor, self.right_factor,
                          self.row_sel_right, self.row_sel_left,
                          self.col_sel_left, self.col_sel_right)

    def permuted_cols(self) -> "KernelTerm":
        """Right-multiplication by the (transposed) commutation operator."""
        return KernelTerm(self.coefficient, self.left_factor, self.right_factor,
                          self.row_sel_left, self.row_sel_right,
                          self.col_sel_right, self.col_sel_left)

    def scaled(self, c: float) -> "KernelTerm":
        return KernelTerm(self.coefficient * c, self.left_factor, self.right_factor,
                          self.row_sel_left, self.row_sel_right,
                          self.col_sel_left, self.col_sel_right)


@dataclass(frozen=True)
class PairwiseKernelSpec:
    name: str
    terms: tuple[KernelTerm, ...]
    requires_homogeneous: bool


KERNEL_NAMES = ("linear", "poly2d", "kronecker", "cartesian",
                "symmetric", "antisymmetric", "ranking", "mlpk")
HOMOGENEOUS_KERNELS = frozenset({"symmetric", "antisymmetric", "ranking", "mlpk"})


def _kron(c, left, right):
    return KernelTerm(float(c), left, right, F, S, F, S)


def _unified(c, factor, row, col):
    """``factor`` kron ``factor`` with one element repeated on each side."""
    return KernelTerm(float(c), factor, factor, row, row, col, col)


def _build_terms(name: str) -> tuple[KernelTerm, ...]:
    if name == "kronecker":
        return (_kron(1, DRUG, TARGET),)
    if name == "linear":
        return (_kron(1, DRUG, ONES), _kron(1, ONES, TARGET))
    if name == "poly2d":
        return (_unified(1, DRUG, F, F),
                _kron(2, DRUG, TARGET),
                _unified(1, TARGET, S, S))
    if name == "cartesian":
        return (_kron(1, DRUG, IDENTITY), _kron(1, IDENTITY, TARGET))
    if name in ("symmetric", "antisymmetric"):
        base = _kron(1, DRUG, DRUG)
        sign = 1.0 if name == "symmetric" else -1.0
        return (base, base.permuted_rows().scaled(sign))
    if name == "ranking":
        base = _kron(1, DRUG, ONES)
        return (base,
                base.permuted_rows().scaled(-1),
                base.permuted_cols().scaled(-1),
                base.permuted_rows().permuted_cols())
    if name == "mlpk":
        dd = _kron(1, DRUG, DRUG)
        return (
            # squared single-kernel terms
            _unified(1, DRUG, F, F),
            _unified(1, DRUG, S, F),
            _unified(1, DRUG, F, S),
            _unified(1, DRUG, S, S),
            # cross terms
            dd.scaled(2),
            dd.permuted_rows().scaled(2),
            KernelTerm(-2.0, DRUG, DRUG, F, S, F, F),
            KernelTerm(-2.0, DRUG, DRUG, F, F, F, S),
            KernelTerm(-2.0, DRUG, DRUG, S, S, F, S),
            KernelTerm(-2.0, DRUG, DRUG, F, S, S, S),
        )
    raise ValueError(f"unknown pairwise kernel {name!r}; expected one of {KERNEL_NAMES}")


def decompose(name: str) -> PairwiseKernelSpec:
    """Term list of a named pairwise kernel."""
    key = name.lower().replace("-", "").replace("_", "")
    terms = _build_terms(key)
    return PairwiseKernelSpec(key, terms, key in HOMOGENEOUS_KERNELS)


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

def _resolve(kind: FactorKind, D: np.ndarray, T: np.ndarray,
             rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Dense block of a factor over the given object ids."""
    if kind is DRUG:
        return D[np.ix_(rows, cols)]
    if kind is TARGET:
        return T[np.ix_(rows, cols)]
    if kind is ONES:
        return np.ones((rows.size, cols.size))
    return (rows[:, None] == cols[None, :]).astype(np.float64)


def check_samples(spec: PairwiseKernelSpec, D: np.ndarray, T: Optional[np.ndarray],
                  *samples: PairSample) -> np.ndarray:
    """Validate homogeneity and id ranges; return the target-side matrix to use."""
    if spec.requires_homogeneous:
        if T is not None and T is not D:
            raise ValueError(f"{spec.name} kernel is homogeneous: pass no target kernel")
        for s in samples:
            if not s.homogeneous:
                raise ValueError(f"{spec.name} kernel requires homogeneous pair samples")
        T = D
    elif T is None:
        if not all(s.homogeneous for s in samples):
            raise ValueError("target kernel missing for heterogeneous samples")
        T = D
    for s in samples:
        if len(s) == 0:
            continue
        if s.first_ids.max() >= D.shape[0]:
            raise IndexError("drug id out of range of the drug kernel")
        if s.second_ids.max() >= T.shape[0]:
            raise IndexError("target id out of range of the target kernel")
    return T


class PairwiseOperator:
    """``R_out K R_in^T`` for a fixed kernel and pair samples, applied by GVT.

    Compact relabeling and factor blocks are prepared once so the operator can
    be applied repeatedly inside an iterative solver.
    """

    def __init__(self, spec: PairwiseKernelSpec, D, T, out_sample: PairSample,
                 in_sample: PairSample):
        D = as_matrix(D, "D")
        T = None if T is None else as_matrix(T, "T")
        T = check_samples(spec, D, T, out_sample, in_sample)
        self.spec = spec
        self.shape = (len(out_sample), len(in_sample))
        self.problems: list[tuple[float, GvtProblem]] = []
        for term in spec.terms:
            of, ou_f, _ = relabel_compact(out_sample.select(term.row_sel_left.value))
            os_, ou_s, _ = relabel_compact(out_sample.select(term.row_sel_right.value))
            if_, iu_f, _ = relabel_compact(in_sample.select(term.col_sel_left.value))
            is_, iu_s, _ = relabel_compact(in_sample.select(term.col_sel_right.value))
            A = _resolve(term.left_factor, D, T, ou_f, iu_f)
            B = _resolve(term.right_factor, D, T, ou_s, iu_s)
            self.problems.append((term.coefficient, GvtProblem(A, B, of, os_, if_, is_)))

    def matvec(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64).reshape(-1)
        if v.size != self.shape[1]:
            raise ValueError(f"vector length {v.size} does not match {self.shape[1]} pairs")
        u = np.zeros(self.shape[0])
        for coefficient, problem in self.problems:
            u += coefficient * gvt_matvec(problem, v)
        return u

    __call__ = matvec

    @property
    def storage_bytes(self) -> int:
        """Bytes held in the factor blocks (never the full pairwise matrix)."""
        return sum(p.A.nbytes + p.B.nbytes for _, p in self.problems)


def pairwise_matvec(spec: PairwiseKernelSpec, D, T, out_sample: PairSample,
                    in_sample: PairSample, v) -> np.ndarray:
    """One-shot ``R_out K R_in^T v``; build a :class:`PairwiseOperator` to reuse."""
    return PairwiseOperator(spec, D, T, out_sample, in_sample).matvec(v)


def kernel_value(name: str, D, T, pair_a: tuple[int, int], pair_b: tuple[int, int]) -> float:
    """Scalar pairwise kernel value from its closed-form definition."""
    key = decompose(name).name
    D = as_matrix(D, "D")
    T = D if T is None else as_matrix(T, "T")
    d, t = pair_a
    db, tb = pair_b
    if key in HOMOGENEOUS_KERNELS:
        k = D
        if key == "symmetric":
            return float(k[d, db] * k[t, tb] + k[d, tb] * k[t, db])
        if key == "antisymmetric":
            return float(k[d, db] * k[t, tb] - k[d, tb] * k[t, db])
        r = k[d, db] - k[d, tb] - k[t, db] + k[t, tb]
        return float(r if key == "ranking" else r * r)
    kd, kt = D[d, db], T[t, tb]
    if key == "linear":
        return float(kd + kt)
    if key == "poly2d":
        return float((kd + kt) ** 2)
    if key == "kronecker":
        return float(kd * kt)
    # cartesian
    return float(kd * (t == tb) + (d == db) * kt)
