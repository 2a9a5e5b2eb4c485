"""Kernel ridge regression ``(K + lambda I) a = y`` solved matrix-free with MINRES."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .kernels import PairwiseKernelSpec, PairwiseOperator, decompose
from .oracle import explicit_matrix
from .types import PairSample, as_matrix

log = logging.getLogger(__name__)

DEFAULT_LAMBDA = 1e-5
DEFAULT_PATIENCE = 10
DEFAULT_REL_TOL = 1e-8
# Lanczos breakdown threshold, relative to ||y||
BREAKDOWN_TOL = 1e-14


@dataclass(frozen=True)
class SymmetricOperator:
    dimension: int
    apply: Callable[[np.ndarray], np.ndarray]

    def __call__(self, v):
        return self.apply(v)

    @classmethod
    def from_matrix(cls, M) -> "SymmetricOperator":
        M = as_matrix(M)
        return cls(M.shape[0], lambda v: M @ v)


def symmetry_defect(op: SymmetricOperator, rng: np.random.Generator, trials: int = 3) -> float:
    """Largest relative gap between <Au, w> and <u, Aw> over random probes."""
    worst = 0.0
    for _ in range(trials):
        u = rng.standard_normal(op.dimension)
        w = rng.standard_normal(op.dimension)
        lhs, rhs = op(u) @ w, u @ op(w)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
    return worst


@dataclass
class MinresResult:
    x: np.ndarray
    residuals: list[float]
    iterations: int
    converged: bool
    breakdown: bool = False
    stopped_by_callback: bool = False


def minres_solve(op: SymmetricOperator, y, max_iter: Optional[int] = None,
                 rel_tol: float = DEFAULT_REL_TOL,
                 snapshot: Optional[Callable[[int, np.ndarray], object]] = None) -> MinresResult:
    """Minimal residual iteration from a zero initial guess.

    ``residuals[k]`` is ``||y - op(x_k)||`` as carried by the Lanczos
    recurrence (``residuals[0] = ||y||``). ``snapshot(k, x_k)`` is called after
    every iteration; a truthy return value stops the solve.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = op.dimension
    if y.size != n:
        raise ValueError(f"right-hand side has length {y.size}, operator dimension is {n}")
    max_iter = n if max_iter is None else int(max_iter)
    x = np.zeros(n)
    beta1 = float(np.linalg.norm(y))
    residuals = [beta1]
    if beta1 == 0.0 or max_iter <= 0:
        return MinresResult(x, residuals, 0, beta1 == 0.0)

    eps = np.finfo(np.float64).eps
    r1 = y.copy()
    r2 = y.copy()
    beta, oldb = beta1, 0.0
    dbar = epsln = 0.0
    phibar = beta1
    cs, sn = -1.0, 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    converged = breakdown = stopped = False
    itn = 0
    while itn < max_iter:
        itn += 1
        v = r2 / beta
        z = np.asarray(op(v), dtype=np.float64)
        if itn >= 2:
            z = z - (beta / oldb) * r1
        alpha = float(v @ z)
        z = z - (alpha / beta) * r2
        r1, r2 = r2, z
        oldb, beta = beta, float(np.linalg.norm(z))

        # apply previous rotation, then build the new one
        oldeps = epsln
        delta = cs * dbar + sn * alpha
        gbar = sn * dbar - cs * alpha
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(np.hypot(gbar, beta), eps)
        cs, sn = gbar / gamma, beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1, w2 = w2, w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w
        residuals.append(abs(phibar))

        if abs(phibar) <= rel_tol * beta1:
            converged = True
        if beta <= BREAKDOWN_TOL * beta1:
            breakdown = converged = True
        if snapshot is not None and snapshot(itn, x):
            stopped = True
            break
        if converged:
            break
    return MinresResult(x, residuals, itn, converged, breakdown, stopped)


@dataclass
class Model:
    """Dual coefficients of ``f(d, t) = sum_i a_i k((d_i, t_i), (d, t))``."""

    dual: np.ndarray
    train_sample: PairSample
    spec: PairwiseKernelSpec
    D: np.ndarray
    T: Optional[np.ndarray]
    lam: float
    iterations_used: int
    residuals: list[float] = field(default_factory=list)

    def predict(self, test_sample: PairSample) -> np.ndarray:
        return predict(self, test_sample)


def train_operator(spec: PairwiseKernelSpec, D, T, sample: PairSample, lam: float,
                   backend: str = "gvt") -> SymmetricOperator:
    """``K + lam I`` over ``sample``; ``backend="explicit"`` stores K densely."""
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    if backend == "gvt":
        K = PairwiseOperator(spec, D, T, sample, sample)
        return SymmetricOperator(len(sample), lambda v: K.matvec(v) + lam * v)
    if backend == "explicit":
        M = explicit_matrix(spec.name, D, T, sample, sample)
        return SymmetricOperator(len(sample), lambda v: M @ v + lam * v)
    raise ValueError(f"unknown backend {backend!r}")


def ridge_fit(train: PairSample, spec, D, T=None, lam: float = DEFAULT_LAMBDA,
              max_iter: Optional[int] = None, rel_tol: float = DEFAULT_REL_TOL,
              backend: str = "gvt",
              snapshot: Optional[Callable[[int, np.ndarray], object]] = None) -> Model:
    if isinstance(spec, str):
        spec = decompose(spec)
    if train.labels is None:
        raise ValueError("training sample has no labels")
    op = train_operator(spec, D, T, train, lam, backend)
    res = minres_solve(op, train.labels, max_iter=max_iter, rel_tol=rel_tol, snapshot=snapshot)
    return Model(res.x, train, spec, as_matrix(D), None if T is None else as_matrix(T),
                 lam, res.iterations, res.residuals)


def predict(model: Model, test_sample: PairSample) -> np.ndarray:
    op = PairwiseOperator(model.spec, model.D, model.T, test_sample, model.train_sample)
    return op.matvec(model.dual)


class EarlyStopper:
    """Track a validation score; signal a stop after ``patience`` iterations without
    strict improvement. Ties keep the earliest best iteration."""

    def __init__(self, patience: int = DEFAULT_PATIENCE):
        if patience < 1:
            raise ValueError("patience must be at least 1")
        self.patience = patience
        self.best_iteration = 0
        self.best_score = -np.inf
        self.stale = 0
        self.last_iteration = 0

    def update(self, iteration: int, score: float) -> bool:
        self.last_iteration = iteration
        if score > self.best_score:
            self.best_score = score
            self.best_iteration = iteration
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


def fit_early_stopping(inner: PairSample, validation: PairSample, spec, D, T=None,
                       lam: float = DEFAULT_LAMBDA, patience: int = DEFAULT_PATIENCE,
                       max_iter: Optional[int] = None) -> tuple[int, float]:
    """Number of MINRES iterations maximising validation AUC, and that AUC."""
    from .evaluation import auc, check_binary

    if isinstance(spec, str):
        spec = decompose(spec)
    if validation.labels is None:
        raise ValueError("validation sample has no labels")
    try:
        check_binary(validation.labels)
    except ValueError as exc:
        raise ValueError(f"degenerate validation labels: {exc}") from None
    cross = PairwiseOperator(spec, D, T, validation, inner)
    stopper = EarlyStopper(patience)

    def on_iteration(k, a):
        return stopper.update(k, auc(validation.labels, cross.matvec(a)))

    ridge_fit(inner, spec, D, T, lam, max_iter=max_iter, rel_tol=0.0, snapshot=on_iteration)
    log.debug("early stopping: best iteration %d (AUC %.4f) after %d iterations",
              stopper.best_iteration, stopper.best_score, stopper.last_iteration)
    return stopper.best_iteration, float(stopper.best_score)
