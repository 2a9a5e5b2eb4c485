"""Command line: ``generate``, ``run`` and ``benchmark``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .evaluation import BaseKernelConfig, cross_validate, generate_synthetic, kernel_matrices
from .gvt import count_ops
from .io import ConfigError, ExperimentConfig, load_config, load_dataset, write_dataset
from .kernels import PairwiseOperator, decompose
from .solver import minres_solve, train_operator
from .types import relabel_compact

log = logging.getLogger("pairgvt")

MEMORY_BUDGET_ENV = "PAIRGVT_MEMORY_BUDGET"
DEFAULT_MEMORY_BUDGET = 2 * 1024 ** 3
BENCH_FIELDS = ["n", "m", "q", "backend", "matvec_ms", "fit_ms", "peak_kernel_bytes",
                "gvt_ops", "iterations", "dual_max_diff", "skipped"]


def _error(message: str, out=None) -> int:
    record = json.dumps({"type": "error", "message": message})
    print(record)
    if out is not None:
        try:
            Path(out).write_text(record + "\n", encoding="utf-8")
        except OSError:
            pass
    return 1


# --------------------------------------------------------------------------
# generate
# --------------------------------------------------------------------------

def cmd_generate(args) -> int:
    ds = generate_synthetic(args.pattern, args.drugs, args.targets, args.seed)
    try:
        paths = write_dataset(ds, args.out)
    except OSError as exc:
        return _error(f"cannot write to {args.out}: {exc}")
    log.info("wrote %d pairs to %s", len(ds.pairs), paths["interactions"])
    return 0


# --------------------------------------------------------------------------
# run
# --------------------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> list[dict]:
    """Cross-validate per the config; return the result records."""
    ds = load_dataset(cfg)
    if decompose(cfg.kernel).name == "cartesian" and cfg.setting != 1:
        log.warning("cartesian kernel cannot generalise to unseen objects (setting %d)",
                    cfg.setting)
    report = cross_validate(ds, cfg.kernel, BaseKernelConfig(cfg.base_kernel, cfg.gamma),
                            setting=cfg.setting, folds=cfg.folds, lam=cfg.lam,
                            patience=cfg.patience, seed=cfg.seed, max_iter=cfg.max_iter,
                            rel_tol=cfg.rel_tol, jobs=jobs)
    records = [{"type": "config", **cfg.to_dict()}]
    records += [{"type": "fold", **r} for r in report.records()]
    records.append({"type": "aggregate", **report.summary()})
    return records


def _dump(record: dict) -> str:
    return json.dumps(record, sort_keys=True, allow_nan=True)


def cmd_run(args) -> int:
    out = None
    try:
        cfg = load_config(args.config)
        out = args.out or cfg.output
        records = run_experiment(cfg, args.jobs)
    except ConfigError as exc:
        return _error(str(exc), out)
    text = "".join(_dump(r) + "\n" for r in records)
    if out:
        try:
            Path(out).parent.mkdir(parents=True, exist_ok=True)
            Path(out).write_text(text, encoding="utf-8")
        except OSError as exc:
            return _error(f"cannot write results: {exc}")
    else:
        sys.stdout.write(text)
    agg = records[-1]
    log.info("%s setting %d: AUC %.4f +- %.4f", agg["kernel"], agg["setting"],
             agg["mean_auc"], agg["std_auc"])
    return 0


# --------------------------------------------------------------------------
# benchmark
# --------------------------------------------------------------------------

def memory_budget() -> int:
    raw = os.environ.get(MEMORY_BUDGET_ENV)
    return int(raw) if raw else DEFAULT_MEMORY_BUDGET


def parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"sizes must be comma-separated integers: {text!r}")
    if not sizes or any(s < 1 for s in sizes) or sizes != sorted(set(sizes)):
        raise argparse.ArgumentTypeError("sizes must be positive and strictly ascending")
    return sizes


def benchmark(cfg: ExperimentConfig, sizes, backend: str = "both", budget=None,
              fit_iterations: int = 20) -> list[dict]:
    """Time one matvec and a fixed-iteration fit per size and backend.

    When both backends run, ``dual_max_diff`` compares the duals of solves run
    to convergence, so it measures backend agreement rather than the rounding
    sensitivity of a truncated Krylov iterate.
    """
    budget = memory_budget() if budget is None else budget
    ds = load_dataset(cfg)
    spec = decompose(cfg.kernel)
    D, T = kernel_matrices(ds, BaseKernelConfig(cfg.base_kernel, cfg.gamma))
    order = np.random.default_rng(cfg.seed).permutation(len(ds.pairs))
    backends = ["gvt", "explicit"] if backend == "both" else [backend]
    rows = []
    for n in sizes:
        if n > len(ds.pairs):
            raise ConfigError(f"size {n} exceeds the {len(ds.pairs)} available pairs")
        sample = ds.pairs.subset(np.sort(order[:n]))
        m = relabel_compact(sample.first_ids)[2]
        q = relabel_compact(sample.second_ids)[2]
        probe = np.random.default_rng(cfg.seed).standard_normal(n)
        duals = {}
        for b in backends:
            row = {"n": n, "m": m, "q": q, "backend": b, "matvec_ms": "", "fit_ms": "",
                   "gvt_ops": 0, "iterations": "", "dual_max_diff": "", "skipped": ""}
            if b == "gvt":
                row["peak_kernel_bytes"] = 8 * (m * m if ds.homogeneous else m * m + q * q)
            else:
                row["peak_kernel_bytes"] = 8 * n * n
                if row["peak_kernel_bytes"] > budget:
                    row["skipped"] = f"kernel needs {row['peak_kernel_bytes']} bytes > budget {budget}"
                    rows.append(row)
                    continue
            with count_ops() as tally:
                t0 = time.perf_counter()
                op = train_operator(spec, D, T, sample, cfg.lam, backend=b)
                op(probe)
                row["matvec_ms"] = (time.perf_counter() - t0) * 1e3
            row["gvt_ops"] = tally.ops
            t0 = time.perf_counter()
            res = minres_solve(op, sample.labels, max_iter=fit_iterations, rel_tol=cfg.rel_tol)
            row["fit_ms"] = (time.perf_counter() - t0) * 1e3
            row["iterations"] = res.iterations
            if len(backends) == 2:
                # compare converged duals; truncated iterates amplify rounding differences
                duals[b] = minres_solve(op, sample.labels, rel_tol=cfg.rel_tol).x
            rows.append(row)
        if len(duals) == 2:
            diff = float(np.max(np.abs(duals["gvt"] - duals["explicit"]), initial=0.0))
            for row in rows[-2:]:
                row["dual_max_diff"] = diff
    return rows


def cmd_benchmark(args) -> int:
    try:
        cfg = load_config(args.config)
        rows = benchmark(cfg, args.sizes, args.backend, fit_iterations=args.iterations)
    except ConfigError as exc:
        return _error(str(exc))
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=BENCH_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()
    if all(r["skipped"] for r in rows):
        log.error("memory budget exceeded for every size")
        return 1
    return 0


# --------------------------------------------------------------------------

def _at_least_two(text: str) -> int:
    v = int(text)
    if v < 2:
        raise argparse.ArgumentTypeError("must be at least 2")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pairgvt", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic chessboard/tablecloth dataset")
    g.add_argument("--pattern", choices=["chessboard", "tablecloth"], default="chessboard")
    g.add_argument("--drugs", type=_at_least_two, required=True)
    g.add_argument("--targets", type=_at_least_two, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default=".")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="cross-validate a pairwise kernel model")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="results file (overrides config 'output')")
    r.add_argument("--jobs", type=int, default=1, help="folds run concurrently")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("benchmark", help="compare GVT and explicit kernel backends")
    b.add_argument("--config", required=True)
    b.add_argument("--sizes", type=parse_sizes, required=True)
    b.add_argument("--backend", choices=["gvt", "explicit", "both"], default="both")
    b.add_argument("--iterations", type=int, default=20, help="MINRES iterations per fit")
    b.add_argument("--out", help="CSV output (default stdout)")
    b.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
