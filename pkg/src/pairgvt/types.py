"""Shared data types: pair samples, datasets and compact index relabeling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

SYMMETRY_RTOL = 1e-12


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Return ``values`` as a 2-d float64 array (copy only when needed)."""
    M = np.asarray(values, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {M.shape}")
    return M


def asymmetry(M: np.ndarray) -> float:
    """Largest scaled asymmetry ``|M[i,j]-M[j,i]| / max(1, |M[i,j]|)``."""
    if M.shape[0] != M.shape[1]:
        return np.inf
    if M.size == 0:
        return 0.0
    scale = np.maximum(1.0, np.abs(M))
    return float(np.max(np.abs(M - M.T) / scale))


def is_symmetric(M: np.ndarray, rtol: float = SYMMETRY_RTOL) -> bool:
    return asymmetry(M) <= rtol


def relabel_compact(ids) -> tuple[np.ndarray, np.ndarray, int]:
    """Map arbitrary integer ids onto ``0..k-1`` in first-occurrence order.

    Returns ``(compact_ids, unique_ids, k)`` with
    ``unique_ids[compact_ids] == ids``.
    """
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    if ids.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy(), 0
    uniq, first_pos, inverse = np.unique(ids, return_index=True, return_inverse=True)
    # np.unique sorts; reorder the labels by first occurrence
    order = np.argsort(first_pos, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    compact = rank[inverse.reshape(-1)].astype(np.int64)
    return compact, uniq[order].astype(np.int64), int(order.size)


@dataclass(frozen=True)
class PairSample:
    """A sequence of ``(first, second)`` object index pairs with optional labels.

    ``homogeneous`` means both id columns index the same object table.
    """

    first_ids: np.ndarray
    second_ids: np.ndarray
    labels: Optional[np.ndarray] = None
    homogeneous: bool = False

    def __post_init__(self):
        first = np.asarray(self.first_ids, dtype=np.int64).reshape(-1)
        second = np.asarray(self.second_ids, dtype=np.int64).reshape(-1)
        if first.shape != second.shape:
            raise ValueError(
                f"first_ids and second_ids differ in length: {first.size} != {second.size}"
            )
        if np.any(first < 0) or np.any(second < 0):
            raise ValueError("object ids must be non-negative")
        first.setflags(write=False)
        second.setflags(write=False)
        object.__setattr__(self, "first_ids", first)
        object.__setattr__(self, "second_ids", second)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.float64).reshape(-1)
            if labels.size != first.size:
                raise ValueError(
                    f"labels length {labels.size} does not match {first.size} pairs"
                )
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.first_ids.size)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[int, int]], labels=None,
                   homogeneous: bool = False) -> "PairSample":
        arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1], labels, homogeneous)

    def subset(self, index) -> "PairSample":
        index = np.asarray(index, dtype=np.int64)
        labels = None if self.labels is None else self.labels[index]
        return PairSample(self.first_ids[index], self.second_ids[index], labels,
                          self.homogeneous)

    def select(self, which: str) -> np.ndarray:
        """Ids picked by an element selector (``"first"`` or ``"second"``)."""
        if which == "first":
            return self.first_ids
        if which == "second":
            return self.second_ids
        raise ValueError(f"unknown element selector {which!r}")


@dataclass(frozen=True)
class SideData:
    """Per-object data for one side of the pairs.

    ``kind`` is ``"features"`` (objects x features) or ``"kernel"``
    (a precomputed square base kernel matrix).
    """

    kind: str
    values: np.ndarray
    ids: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.kind not in ("features", "kernel"):
            raise ValueError(f"unknown side data kind {self.kind!r}")
        object.__setattr__(self, "values", as_matrix(self.values, "side data"))

    @property
    def count(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class Dataset:
    pairs: PairSample
    drug_count: int
    target_count: int
    drug_side: SideData
    target_side: SideData
    name: str = field(default="dataset", compare=False)

    @property
    def homogeneous(self) -> bool:
        return self.pairs.homogeneous

    def subset(self, index) -> "Dataset":
        return Dataset(self.pairs.subset(index), self.drug_count, self.target_count,
                       self.drug_side, self.target_side, self.name)


def validate_dataset(ds: Dataset) -> list[str]:
    """Collect every structural problem in ``ds``; an empty list means ok."""
    problems: list[str] = []
    pairs = ds.pairs
    if len(pairs):
        if pairs.first_ids.max() >= ds.drug_count:
            problems.append("drug id out of range")
        if pairs.second_ids.max() >= ds.target_count:
            problems.append("target id out of range")
    if pairs.labels is None:
        problems.append("labels missing")
    elif pairs.labels.size != len(pairs):
        problems.append("label length mismatch")
    for side, count, label in ((ds.drug_side, ds.drug_count, "drug"),
                               (ds.target_side, ds.target_count, "target")):
        if side.count != count:
            problems.append(f"{label} count {count} does not match {label}-side rows {side.count}")
        if side.kind == "kernel":
            K = side.values
            if K.shape[0] != K.shape[1]:
                problems.append(f"{label} kernel is not square")
            elif not is_symmetric(K):
                problems.append(f"asymmetric kernel ({label} side)")
    if ds.homogeneous:
        same = ds.drug_side is ds.target_side or (
            ds.drug_side.kind == ds.target_side.kind
            and ds.drug_side.values.shape == ds.target_side.values.shape
            and np.array_equal(ds.drug_side.values, ds.target_side.values)
        )
        if not same:
            problems.append("homogeneous dataset requires a shared object table")
    return problems
