"""File formats: interaction/feature/kernel CSVs and the JSON experiment config."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .kernels import BASE_KERNELS, HOMOGENEOUS_KERNELS, KERNEL_NAMES, decompose
from .types import Dataset, PairSample, SideData, validate_dataset

INTERACTION_HEADER = ["drug_id", "target_id", "label"]


class ConfigError(ValueError):
    """Invalid experiment configuration or input files."""


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

def _rows(path) -> list[list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [row for row in csv.reader(fh) if row]


def read_interactions(path) -> tuple[list[str], list[str], np.ndarray]:
    rows = _rows(path)
    if not rows or [c.strip() for c in rows[0]] != INTERACTION_HEADER:
        raise ConfigError(f"{path}: header must be {','.join(INTERACTION_HEADER)}")
    drugs, targets, labels = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise ConfigError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
        drugs.append(row[0].strip())
        targets.append(row[1].strip())
        try:
            labels.append(float(row[2]))
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: label {row[2]!r} is not a number") from None
    return drugs, targets, np.array(labels, dtype=np.float64)


def read_features(path) -> tuple[list[str], np.ndarray]:
    rows = _rows(path)
    if not rows or rows[0][0].strip() != "id":
        raise ConfigError(f"{path}: first column must be 'id'")
    ids = [r[0].strip() for r in rows[1:]]
    try:
        X = np.array([[float(x) for x in r[1:]] for r in rows[1:]], dtype=np.float64)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric feature ({exc})") from None
    if X.ndim != 2 or (ids and X.shape[1] != len(rows[0]) - 1):
        raise ConfigError(f"{path}: ragged feature rows")
    return ids, X.reshape(len(ids), len(rows[0]) - 1)


def read_kernel(path) -> tuple[list[str], np.ndarray]:
    """Square kernel CSV; first row and first column hold the object ids."""
    rows = _rows(path)
    if not rows:
        raise ConfigError(f"{path}: empty kernel file")
    col_ids = [c.strip() for c in rows[0][1:]]
    row_ids = [r[0].strip() for r in rows[1:]]
    if col_ids != row_ids:
        raise ConfigError(f"{path}: row and column ids differ")
    try:
        K = np.array([[float(x) for x in r[1:]] for r in rows[1:]], dtype=np.float64)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric kernel entry ({exc})") from None
    return row_ids, K.reshape(len(row_ids), len(col_ids))


def _write(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerows(rows)


def _num(x: float) -> str:
    return repr(float(x)) if x != int(x) else str(int(x))


def write_interactions(path, drugs, targets, labels) -> None:
    _write(path, [INTERACTION_HEADER] + [[d, t, _num(y)] for d, t, y in zip(drugs, targets, labels)])


def write_features(path, ids, X) -> None:
    X = np.asarray(X)
    header = ["id"] + [f"f{j}" for j in range(X.shape[1])]
    _write(path, [header] + [[i] + [_num(v) for v in row] for i, row in zip(ids, X)])


def write_kernel(path, ids, K) -> None:
    _write(path, [[""] + list(ids)] + [[i] + [repr(float(v)) for v in row] for i, row in zip(ids, K)])


def write_dataset(ds: Dataset, outdir, drug_ids=None, target_ids=None) -> dict[str, Path]:
    """Write interactions plus side data (features or kernels) as CSV files."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    drug_ids = drug_ids or [f"d{i}" for i in range(ds.drug_count)]
    target_ids = target_ids or (drug_ids if ds.homogeneous else
                                [f"t{i}" for i in range(ds.target_count)])
    p = ds.pairs
    paths = {"interactions": out / "interactions.csv"}
    write_interactions(paths["interactions"], [drug_ids[i] for i in p.first_ids],
                       [target_ids[i] for i in p.second_ids], p.labels)
    sides = [("drugs", ds.drug_side, drug_ids)]
    if not ds.homogeneous:
        sides.append(("targets", ds.target_side, target_ids))
    for name, side, ids in sides:
        paths[name] = out / f"{name}.csv"
        if side.kind == "features":
            write_features(paths[name], ids, side.values)
        else:
            write_kernel(paths[name], ids, side.values)
    if ds.homogeneous:
        paths["targets"] = paths["drugs"]
    return paths


# --------------------------------------------------------------------------
# experiment config
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    interactions: str
    drug_side: str
    target_side: str
    side_kind: str = "features"
    base_kernel: str = "linear"
    gamma: Optional[float] = None
    kernel: str = "kronecker"
    setting: int = 1
    folds: int = 9
    lam: float = 1e-5
    patience: int = 10
    max_iter: Optional[int] = None
    rel_tol: float = 1e-8
    seed: int = 0
    output: Optional[str] = None

    @property
    def homogeneous_data(self) -> bool:
        return os.path.normpath(self.drug_side) == os.path.normpath(self.target_side)

    @classmethod
    def from_dict(cls, raw: dict, base_dir=None) -> "ExperimentConfig":
        raw = dict(raw)
        if "lambda" in raw:
            raw["lam"] = raw.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
        missing = [k for k in ("interactions", "drug_side", "target_side") if k not in raw]
        if missing:
            raise ConfigError(f"missing config fields: {', '.join(missing)}")
        if base_dir is not None:
            for k in ("interactions", "drug_side", "target_side", "output"):
                if raw.get(k) is not None and not os.path.isabs(raw[k]):
                    raw[k] = os.path.join(base_dir, raw[k])
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    def validate(self) -> None:
        if self.side_kind not in ("features", "kernel"):
            raise ConfigError(f"side_kind must be 'features' or 'kernel', got {self.side_kind!r}")
        if self.base_kernel not in BASE_KERNELS:
            raise ConfigError(f"base_kernel must be one of {BASE_KERNELS}")
        if (self.gamma is not None) != (self.base_kernel == "gaussian"):
            raise ConfigError("gamma is required for, and only for, the gaussian base kernel")
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigError("gamma must be positive")
        try:
            spec = decompose(self.kernel)
        except ValueError:
            raise ConfigError(f"kernel must be one of {KERNEL_NAMES}") from None
        if spec.name in HOMOGENEOUS_KERNELS and not self.homogeneous_data:
            raise ConfigError("homogeneous kernel requires shared object table")
        if self.setting not in (1, 2, 3, 4):
            raise ConfigError("setting must be 1, 2, 3 or 4")
        if self.folds < 2:
            raise ConfigError("folds must be at least 2")
        if self.lam < 0:
            raise ConfigError("lambda must be non-negative")
        if self.patience < 1:
            raise ConfigError("patience must be at least 1")
        if self.max_iter is not None and self.max_iter < 1:
            raise ConfigError("max_iter must be positive")


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return ExperimentConfig.from_dict(raw, base_dir=os.path.dirname(os.path.abspath(path)))


def _side(path, kind) -> tuple[list[str], SideData]:
    if kind == "features":
        ids, X = read_features(path)
    else:
        ids, X = read_kernel(path)
    return ids, SideData(kind, X, tuple(ids))


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    """Read the config's files and map string ids to dense indices."""
    try:
        drugs, targets, labels = read_interactions(cfg.interactions)
        d_ids, d_side = _side(cfg.drug_side, cfg.side_kind)
        if cfg.homogeneous_data:
            t_ids, t_side = d_ids, d_side
        else:
            t_ids, t_side = _side(cfg.target_side, cfg.side_kind)
    except OSError as exc:
        raise ConfigError(str(exc)) from None
    for ids, what in ((d_ids, "drug"), (t_ids, "target")):
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate {what} ids in side data")
    d_index = {s: i for i, s in enumerate(d_ids)}
    t_index = {s: i for i, s in enumerate(t_ids)}
    try:
        first = np.array([d_index[s] for s in drugs], dtype=np.int64)
        second = np.array([t_index[s] for s in targets], dtype=np.int64)
    except KeyError as exc:
        raise ConfigError(f"interaction id {exc.args[0]!r} has no side data") from None
    ds = Dataset(PairSample(first, second, labels, homogeneous=cfg.homogeneous_data),
                 len(d_ids), len(t_ids), d_side, t_side, name=Path(cfg.interactions).stem)
    problems = validate_dataset(ds)
    if problems:
        raise ConfigError("; ".join(problems))
    return ds
