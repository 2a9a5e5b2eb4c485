"""Generalized vec trick for doubly indexed Kronecker products.

Computes ``u = R_out (A kron B) R_in^T v`` without forming the
``n_out x n_in`` matrix, i.e.

    u[i] = sum_j A[out_first[i], in_first[j]] * B[out_second[i], in_second[j]] * v[j]

Two evaluation orders exist; their multiply-add counts are given by
:func:`gvt_cost`. Every call records its count so callers can audit the
complexity (see :func:`gvt_op_count` and :class:`OpTally`).
"""

from __future__ import annotations

import contextlib
import threading
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

# bounds the (chunk x width) gather temporaries
_CHUNK = 2048

_state = threading.local()


@dataclass(frozen=True)
class GvtProblem:
    """Index arrays are compact ids into the rows/cols of ``A`` and ``B``."""

    A: np.ndarray
    B: np.ndarray
    out_first: np.ndarray
    out_second: np.ndarray
    in_first: np.ndarray
    in_second: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.float64)
        B = np.asarray(self.B, dtype=np.float64)
        if A.ndim != 2 or B.ndim != 2:
            raise ValueError("A and B must be matrices")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        for name in ("out_first", "out_second", "in_first", "in_second"):
            object.__setattr__(self, name,
                               np.asarray(getattr(self, name), dtype=np.int64).reshape(-1))
        if self.out_first.size != self.out_second.size:
            raise ValueError("out index sequences differ in length")
        if self.in_first.size != self.in_second.size:
            raise ValueError("in index sequences differ in length")
        _check_bounds(self.out_first, A.shape[0], "out_first", "A rows")
        _check_bounds(self.in_first, A.shape[1], "in_first", "A columns")
        _check_bounds(self.out_second, B.shape[0], "out_second", "B rows")
        _check_bounds(self.in_second, B.shape[1], "in_second", "B columns")

    @property
    def n_out(self) -> int:
        return int(self.out_first.size)

    @property
    def n_in(self) -> int:
        return int(self.in_first.size)

    def costs(self) -> tuple[int, int]:
        m_out, m_in = self.A.shape
        q_out, q_in = self.B.shape
        return gvt_cost(self.n_out, m_out, q_out, self.n_in, m_in, q_in)


def _check_bounds(idx: np.ndarray, limit: int, name: str, what: str) -> None:
    if idx.size and (idx.min() < 0 or idx.max() >= limit):
        raise IndexError(f"{name} id out of bounds for {what} ({limit})")


def gvt_cost(n_out: int, m_out: int, q_out: int,
             n_in: int, m_in: int, q_in: int) -> tuple[int, int]:
    """Multiply-add counts of the two evaluation orders.

    Order 1 builds a ``q_out x m_in`` intermediate, order 2 a
    ``m_out x q_in`` one.
    """
    return q_out * n_in + m_in * n_out, m_out * n_in + q_in * n_out


def _half(A, B, out_first, out_second, in_first, in_second, v):
    """Order 1; order 2 is the same routine with the factor roles swapped."""
    q_out = B.shape[0]
    m_in = A.shape[1]
    n_in = in_first.size
    n_out = out_first.size
    # W^T[h, t] = sum_{j: in_first[j] = h} B[t, in_second[j]] v[j]
    Wt = np.zeros((m_in, q_out))
    Bt = B.T
    for s in range(0, n_in, _CHUNK):
        sl = slice(s, min(s + _CHUNK, n_in))
        S = sp.csr_matrix((v[sl], (in_first[sl], np.arange(sl.stop - sl.start))),
                          shape=(m_in, sl.stop - sl.start))
        Wt += S @ Bt[in_second[sl]]
    W = Wt.T
    u = np.empty(n_out)
    for s in range(0, n_out, _CHUNK):
        sl = slice(s, min(s + _CHUNK, n_out))
        u[sl] = np.einsum("ij,ij->i", A[out_first[sl]], W[out_second[sl]])
    return u


def gvt_matvec(p: GvtProblem, v, variant="auto") -> np.ndarray:
    """Return ``R_out (A kron B) R_in^T v`` using the generalized vec trick.

    ``variant`` is ``"auto"``, ``1`` or ``2``; ``"auto"`` takes the cheaper
    order according to :func:`gvt_cost`, preferring order 1 on ties.
    """
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.size != p.n_in:
        raise ValueError(f"vector length {v.size} does not match n_in={p.n_in}")
    c1, c2 = p.costs()
    if variant == "auto":
        variant = 1 if c1 <= c2 else 2
    if variant not in (1, 2):
        raise ValueError(f"unknown variant {variant!r}")
    if p.n_out == 0 or p.n_in == 0:
        # nothing to accumulate; no multiply-adds are issued
        _record(0)
        return np.zeros(p.n_out)
    if variant == 1:
        u = _half(p.A, p.B, p.out_first, p.out_second, p.in_first, p.in_second, v)
    else:
        u = _half(p.B, p.A, p.out_second, p.out_first, p.in_second, p.in_first, v)
    _record(c1 if variant == 1 else c2)
    return u


def _record(ops: int) -> None:
    _state.last = ops
    for tally in getattr(_state, "tallies", ()):
        tally.ops += ops
        tally.calls += 1


def gvt_op_count() -> int:
    """Multiply-adds performed by the most recent :func:`gvt_matvec` in this thread."""
    return getattr(_state, "last", 0)


@dataclass
class OpTally:
    ops: int = 0
    calls: int = 0


@contextlib.contextmanager
def count_ops():
    """Accumulate GVT multiply-adds issued by the current thread.

    >>> with count_ops() as tally:
    ...     _ = gvt_matvec(GvtProblem([[2.0]], [[3.0]], [0], [0], [0], [0]), [1.0])
    >>> tally.ops, tally.calls
    (2, 1)
    """
    tally = OpTally()
    stack = getattr(_state, "tallies", None)
    if stack is None:
        stack = _state.tallies = []
    stack.append(tally)
    try:
        yield tally
    finally:
        stack.remove(tally)
