"""AUC, setting-aware train/test splits, cross-validation and synthetic data."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .gvt import count_ops
from .kernels import base_kernel, decompose
from .solver import (DEFAULT_LAMBDA, DEFAULT_PATIENCE, DEFAULT_REL_TOL,
                     fit_early_stopping, predict, ridge_fit)
from .types import Dataset, PairSample, SideData

log = logging.getLogger(__name__)

SETTINGS = (1, 2, 3, 4)


# --------------------------------------------------------------------------
# AUC
# --------------------------------------------------------------------------

def check_binary(labels) -> tuple[np.ndarray, float]:
    """Return ``(positive_mask, positive_value)``; the larger of two label values
    is the positive class."""
    labels = np.asarray(labels, dtype=np.float64).reshape(-1)
    values = np.unique(labels)
    if values.size != 2:
        raise ValueError(f"AUC needs exactly two label classes, got {values.size}")
    return labels == values[1], float(values[1])


def auc(labels, scores) -> float:
    """Probability that a random positive outscores a random negative (ties = 1/2).

    Computed as the normalized Mann-Whitney U statistic from mid-ranks.
    """
    pos, _ = check_binary(labels)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if scores.size != pos.size:
        raise ValueError("labels and scores differ in length")
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


# --------------------------------------------------------------------------
# splits
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitPlan:
    setting: int
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray
    ignored: np.ndarray
    seed: int
    fold_index: int = 0
    held_first: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    held_second: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def violations(self, sample: PairSample) -> list[str]:
        """Breaches of the partition and novelty rules of the setting."""
        out = []
        parts = (self.train, self.validation, self.test, self.ignored)
        joined = np.concatenate(parts)
        if joined.size != len(sample) or np.unique(joined).size != len(sample):
            out.append("sets do not partition the sample")
        seen = np.concatenate((self.train, self.validation))
        d_seen = set(sample.first_ids[seen].tolist())
        t_seen = set(sample.second_ids[seen].tolist())
        d_test = set(sample.first_ids[self.test].tolist()) | set(self.held_first.tolist())
        t_test = set(sample.second_ids[self.test].tolist()) | set(self.held_second.tolist())
        if self.setting in (2, 4) and t_seen & t_test:
            out.append("test target seen in training")
        if self.setting in (3, 4) and d_seen & d_test:
            out.append("test drug seen in training")
        if self.setting == 4:
            for i in self.ignored.tolist():
                in_d = sample.first_ids[i] in d_test
                in_t = sample.second_ids[i] in t_test
                if in_d == in_t:
                    out.append(f"ignored pair {i} does not share exactly one side with the test block")
                    break
        return out


def _groups(n_objects_ids: np.ndarray, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    shuffled = rng.permutation(n_objects_ids)
    return np.array_split(shuffled, k)


def _idx(mask: np.ndarray) -> np.ndarray:
    return np.flatnonzero(mask).astype(np.int64)


def split_setting(sample: PairSample, setting: int, fold_count: int, fold_index: int,
                  seed: int) -> SplitPlan:
    """Outer train/test split for one cross-validation fold.

    Settings: 1 splits pairs, 2 splits targets, 3 splits drugs, 4 splits drugs
    and targets into ``sqrt(fold_count)`` groups each; pairs mixing held-out and
    training objects are ignored.
    """
    if setting not in SETTINGS:
        raise ValueError(f"setting must be one of {SETTINGS}")
    if fold_count < 2:
        raise ValueError("fold_count must be at least 2")
    if not 0 <= fold_index < fold_count:
        raise ValueError(f"fold_index {fold_index} outside 0..{fold_count - 1}")
    rng = np.random.default_rng(seed)
    n = len(sample)
    empty = np.zeros(0, dtype=np.int64)
    if setting == 1:
        if n < fold_count:
            raise ValueError(f"fewer pairs ({n}) than folds ({fold_count})")
        test_mask = np.zeros(n, dtype=bool)
        test_mask[_groups(np.arange(n), fold_count, rng)[fold_index]] = True
        return SplitPlan(1, _idx(~test_mask), empty, _idx(test_mask), empty, seed, fold_index)
    if setting in (2, 3):
        ids = sample.second_ids if setting == 2 else sample.first_ids
        uniq = np.unique(ids)
        if uniq.size < fold_count:
            kind = "targets" if setting == 2 else "drugs"
            raise ValueError(f"fewer unique {kind} ({uniq.size}) than folds ({fold_count})")
        held = _groups(uniq, fold_count, rng)[fold_index]
        test_mask = np.isin(ids, held)
        kw = {"held_second" if setting == 2 else "held_first": np.sort(held)}
        return SplitPlan(setting, _idx(~test_mask), empty, _idx(test_mask), empty, seed,
                         fold_index, **kw)
    k = math.isqrt(fold_count)
    if k * k != fold_count:
        raise ValueError("setting 4 needs a perfect-square fold count")
    drugs, targets = np.unique(sample.first_ids), np.unique(sample.second_ids)
    if drugs.size < k or targets.size < k:
        raise ValueError(f"fewer unique drugs/targets than {k} groups")
    d_held = _groups(drugs, k, rng)[fold_index // k]
    t_held = _groups(targets, k, rng)[fold_index % k]
    in_d = np.isin(sample.first_ids, d_held)
    in_t = np.isin(sample.second_ids, t_held)
    return SplitPlan(4, _idx(~in_d & ~in_t), empty, _idx(in_d & in_t),
                     _idx(in_d ^ in_t), seed, fold_index, np.sort(d_held), np.sort(t_held))


def _take(count: int, fraction: float) -> int:
    if count < 2:
        raise ValueError(f"too few objects to split ({count})")
    return min(max(int(round(fraction * count)), 1), count - 1)


def inner_split(sample: PairSample, train: np.ndarray, setting: int, fraction: float = 0.75,
                seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Split training indices into (inner, validation) following the setting's novelty rule.

    Setting 4 splits drugs and targets independently; pairs mixing the two
    halves are dropped.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie strictly between 0 and 1")
    train = np.asarray(train, dtype=np.int64)
    rng = np.random.default_rng(seed)
    if setting == 1:
        perm = rng.permutation(train)
        k = _take(train.size, fraction)
        return np.sort(perm[:k]), np.sort(perm[k:])

    def halves(ids):
        uniq = np.unique(ids)
        perm = rng.permutation(uniq)
        keep = perm[:_take(uniq.size, fraction)]
        return np.isin(ids, keep)

    d = sample.first_ids[train]
    t = sample.second_ids[train]
    if setting == 2:
        mask = halves(t)
        return train[mask], train[~mask]
    if setting == 3:
        mask = halves(d)
        return train[mask], train[~mask]
    if setting == 4:
        md, mt = halves(d), halves(t)
        return train[md & mt], train[~md & ~mt]
    raise ValueError(f"setting must be one of {SETTINGS}")


# --------------------------------------------------------------------------
# cross-validation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BaseKernelConfig:
    name: str = "linear"
    gamma: Optional[float] = None


def kernel_matrices(ds: Dataset, config: BaseKernelConfig) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Base kernel matrices ``(D, T)``; ``T`` is None for homogeneous data."""

    def side(data: SideData) -> np.ndarray:
        if data.kind == "kernel":
            return data.values
        return base_kernel(config.name, data.values, gamma=config.gamma)

    D = side(ds.drug_side)
    if ds.homogeneous:
        return D, None
    return D, side(ds.target_side)


@dataclass
class FoldResult:
    fold: int
    auc: Optional[float]
    iterations: int
    train_ms: float
    gvt_ops: int
    validation_auc: Optional[float] = None
    n_train: int = 0
    n_test: int = 0
    error: Optional[str] = None


@dataclass
class CVReport:
    kernel: str
    setting: int
    folds: list[FoldResult] = field(default_factory=list)

    @property
    def aucs(self) -> np.ndarray:
        return np.array([f.auc for f in self.folds if f.auc is not None])

    @property
    def mean_auc(self) -> float:
        a = self.aucs
        return float(a.mean()) if a.size else float("nan")

    @property
    def std_auc(self) -> float:
        a = self.aucs
        return float(a.std()) if a.size else float("nan")

    def summary(self) -> dict:
        return {
            "kernel": self.kernel,
            "setting": self.setting,
            "folds_ok": int(self.aucs.size),
            "folds_failed": sum(f.error is not None for f in self.folds),
            "mean_auc": self.mean_auc,
            "std_auc": self.std_auc,
            "mean_iterations": float(np.mean([f.iterations for f in self.folds])) if self.folds else 0.0,
            "total_gvt_ops": int(sum(f.gvt_ops for f in self.folds)),
        }

    def records(self) -> list[dict]:
        return [asdict(f) for f in self.folds]


def run_fold(ds: Dataset, spec, D, T, setting: int, folds: int, fold: int, lam: float,
             patience: int, seed: int, max_iter: Optional[int] = None,
             rel_tol: float = DEFAULT_REL_TOL, inner_fraction: float = 0.75) -> FoldResult:
    """Early-stop on an inner/validation split, refit on the fold's training set, score the test set."""
    pairs = ds.pairs
    start = time.perf_counter()
    with count_ops() as tally:
        try:
            plan = split_setting(pairs, setting, folds, fold, seed)
            inner, val = inner_split(pairs, plan.train, setting, inner_fraction, seed + 1 + fold)
            train = pairs.subset(plan.train)
            best_it, val_auc = fit_early_stopping(
                pairs.subset(inner), pairs.subset(val), spec, D, T, lam, patience,
                max_iter=max_iter)
            model = ridge_fit(train, spec, D, T, lam, max_iter=max(best_it, 1),
                              rel_tol=rel_tol)
            test = pairs.subset(plan.test)
            score = auc(test.labels, predict(model, test))
        except ValueError as exc:
            log.warning("fold %d failed: %s", fold, exc)
            return FoldResult(fold, None, 0, (time.perf_counter() - start) * 1e3,
                              tally.ops, error=str(exc))
    return FoldResult(fold, score, model.iterations_used, (time.perf_counter() - start) * 1e3,
                      tally.ops, val_auc, len(train), len(test))


def cross_validate(ds: Dataset, kernel, base: BaseKernelConfig = BaseKernelConfig(),
                   setting: int = 1, folds: int = 9, lam: float = DEFAULT_LAMBDA,
                   patience: int = DEFAULT_PATIENCE, seed: int = 0,
                   max_iter: Optional[int] = None, rel_tol: float = DEFAULT_REL_TOL,
                   jobs: int = 1, kernels: Optional[tuple] = None) -> CVReport:
    """K-fold cross-validation under a setting; failed folds are reported, not raised.

    ``kernels`` may supply precomputed ``(D, T)`` base kernel matrices.
    """
    spec = decompose(kernel) if isinstance(kernel, str) else kernel
    D, T = kernels if kernels is not None else kernel_matrices(ds, base)
    args = (ds, spec, D, T, setting, folds)
    kw = dict(lam=lam, patience=patience, seed=seed, max_iter=max_iter, rel_tol=rel_tol)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(lambda f: run_fold(*args, f, **kw), range(folds)))
    else:
        results = [run_fold(*args, f, **kw) for f in range(folds)]
    return CVReport(spec.name, setting, results)


# --------------------------------------------------------------------------
# synthetic data
# --------------------------------------------------------------------------

def generate_synthetic(pattern: str, m: int, q: int, seed: int = 0) -> Dataset:
    """Complete ``m x q`` grid labelled by the parities of the drug and target ids.

    ``chessboard``: parity(d) XOR parity(t); ``tablecloth``: parity(d) OR
    parity(t). Object features are ``[1, parity]``. The seed only shuffles
    the pair order.
    """
    if m < 2 or q < 2:
        raise ValueError("need at least 2 drugs and 2 targets")
    d, t = np.meshgrid(np.arange(m), np.arange(q), indexing="ij")
    d, t = d.ravel(), t.ravel()
    pd, pt = d % 2, t % 2
    if pattern == "chessboard":
        y = pd ^ pt
    elif pattern == "tablecloth":
        y = (pd + pt >= 1).astype(np.int64)
    else:
        raise ValueError(f"unknown pattern {pattern!r}")
    order = np.random.default_rng(seed).permutation(d.size)
    pairs = PairSample(d[order], t[order], y[order].astype(np.float64))
    drug_x = np.column_stack([np.ones(m), np.arange(m) % 2])
    target_x = np.column_stack([np.ones(q), np.arange(q) % 2])
    return Dataset(pairs, m, q, SideData("features", drug_x), SideData("features", target_x),
                   name=pattern)


def generate_low_rank(m: int = 40, q: int = 40, rank: int = 3, density: float = 0.3,
                      noise: float = 0.5, seed: int = 0) -> Dataset:
    """Sparse binary interactions from a latent factor model.

    Object features are noisy views of the latent factors, so seen objects
    carry information that features of novel objects only partly recover.
    """
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((m, rank))
    V = rng.standard_normal((q, rank))
    bias_d = rng.standard_normal(m)
    bias_t = rng.standard_normal(q)
    n = int(round(density * m * q))
    cells = rng.choice(m * q, size=n, replace=False)
    d, t = cells // q, cells % q
    score = np.einsum("ij,ij->i", U[d], V[t]) + bias_d[d] + bias_t[t]
    y = (score > np.median(score)).astype(np.float64)
    drug_x = np.column_stack([U + noise * rng.standard_normal(U.shape), bias_d + noise * rng.standard_normal(m)])
    target_x = np.column_stack([V + noise * rng.standard_normal(V.shape), bias_t + noise * rng.standard_normal(q)])
    return Dataset(PairSample(d, t, y), m, q, SideData("features", drug_x),
                   SideData("features", target_x), name="lowrank")
