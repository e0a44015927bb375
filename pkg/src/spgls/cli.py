"""Command-line interface: ``spgls {gen,solve,cv,bench,attack}``.

Exit codes: 0 success, 2 argument error, 3 data error, 4 solver or
verification failure.  Parallel CV honours ``SPGLS_THREADS``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import solve_game
from .dataset import (
    Dataset,
    NormalizationParams,
    Quartile,
    gen_targets,
    kfold_split,
    load_csv,
    minmax_normalize,
    parse_attack,
    scale_labels,
    synth_regression,
    write_csv,
)
from .errors import DataError, SpglsError
from .evaluate import METHODS, cross_validate, dinkelbach_bisection
from .reform import build_matrices, build_spectral
from .solver import SolverConfig, solve_dual

EXIT_OK, EXIT_ARGS, EXIT_DATA, EXIT_SOLVER = 0, 2, 3, 4

BENCH_COLUMNS = ("m", "n", "bisect_seconds", "direct_seconds", "eig_seconds", "ratio")


class ArgumentError(ValueError):
    pass


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:count[:log]`` or a comma-separated list of positive values."""
    text = text.strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] != "log"):
                raise ArgumentError(f"bad grid {text!r}; use lo:hi:count[:log]")
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
            if not (0 < lo <= hi) or count < 1:
                raise ArgumentError(f"grid needs 0 < lo <= hi and count >= 1, got {text!r}")
            if len(parts) == 4:
                return np.geomspace(lo, hi, count)
            return np.linspace(lo, hi, count)
        vals = np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError as exc:
        raise ArgumentError(f"bad grid {text!r}: {exc}") from None
    if vals.size == 0 or np.any(~(vals > 0)) or np.any(~np.isfinite(vals)):
        raise ArgumentError(f"grid values must be positive and finite, got {text!r}")
    return vals


def _int_list(text: str) -> List[int]:
    try:
        out = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ArgumentError(f"expected comma-separated integers, got {text!r}") from None
    if not out or min(out) < 1:
        raise ArgumentError(f"expected positive integers, got {text!r}")
    return out


def _float_list(text: str) -> List[float]:
    try:
        out = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ArgumentError(f"expected comma-separated numbers, got {text!r}") from None
    if not out or min(out) <= 0:
        raise ArgumentError(f"expected positive numbers, got {text!r}")
    return out


@dataclass
class RunConfig:
    subcommand: str
    input: Optional[Path] = None
    out: Optional[Path] = None
    gamma: float = 0.01
    gamma_grid: Optional[np.ndarray] = None
    attack: Optional[str] = None
    seed: Optional[int] = 0
    tol: float = 1e-10
    max_iter: int = 200
    methods: tuple = ("spgls", "ols", "ridge")
    options: dict = field(default_factory=dict)

    def validate(self) -> None:
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ArgumentError(f"gamma must be positive, got {self.gamma}")
        if self.input is not None and not Path(self.input).is_file():
            raise DataError(f"input file not found: {self.input}")
        if self.out is not None and not Path(self.out).parent.exists():
            raise ArgumentError(f"output directory does not exist: {Path(self.out).parent}")
        for m in self.methods:
            if m not in METHODS:
                raise ArgumentError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
        if self.attack is not None:
            try:
                parse_attack(self.attack, self.seed)
            except ValueError as exc:
                raise ArgumentError(str(exc)) from None


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="spgls",
        description="Least-squares Stackelberg prediction game solver and experiment runner.",
    )
    sub = p.add_subparsers(dest="subcommand", required=True)

    g = sub.add_parser("gen", help="write a synthetic regression CSV")
    g.add_argument("--m", type=int, required=True, help="number of samples")
    g.add_argument("--n", type=int, required=True, help="number of features")
    g.add_argument("--noise", type=float, default=0.1, help="label noise standard deviation")
    g.add_argument("--seed", type=int, default=0, help="random seed")
    g.add_argument("--attack", default="quartile:0.25",
                   help="attack spec used to fill the z column (default quartile:0.25; "
                        "'none' keeps z = y)")
    g.add_argument("--out", type=Path, required=True, help="output CSV path")

    def data_flags(sp):
        sp.add_argument("--input", type=Path, required=True, help="input CSV with a header row")
        sp.add_argument("--y-column", default="y", help="label column (default y)")
        sp.add_argument("--z-column", default=None,
                        help="provider target column; defaults to 'z' when present, else y")
        sp.add_argument("--no-normalize", action="store_true",
                        help="skip min-max feature scaling and label scaling")
        sp.add_argument("--beta", type=float, default=1.0,
                        help="labels are divided by beta*max|y| (default 1)")

    s = sub.add_parser("solve", help="compute and verify the equilibrium for one gamma")
    data_flags(s)
    s.add_argument("--gamma", type=float, required=True, help="provider regularization gamma > 0")
    s.add_argument("--tol", type=float, default=1e-10, help="dual stationarity tolerance")
    s.add_argument("--max-iter", type=int, default=200, help="dual iteration cap")
    s.add_argument("--out", type=Path, help="equilibrium JSON path (stdout if omitted)")

    c = sub.add_parser("cv", help="k-fold cross-validated MSE over a gamma grid")
    data_flags(c)
    c.add_argument("--attack", help="attack spec applied to y to build z, e.g. quartile:0.25")
    c.add_argument("--gamma-grid", default="1e-3:0.75:40",
                   help="lo:hi:count[:log] or comma list (default 1e-3:0.75:40)")
    c.add_argument("--folds", type=int, default=10, help="number of folds (default 10)")
    c.add_argument("--seed", type=int, default=0, help="fold assignment seed")
    c.add_argument("--methods", default="spgls,ols,ridge",
                   help=f"comma list from {','.join(METHODS)}")
    c.add_argument("--no-test-attack", action="store_true",
                   help="score on unmodified test features instead of the best response")
    c.add_argument("--threads", type=int, default=None, help="worker threads (else SPGLS_THREADS)")
    c.add_argument("--out-csv", type=Path, help="CSV summary path")
    c.add_argument("--out-json", type=Path, help="JSON report path")

    b = sub.add_parser("bench", help="timing sweep: direct solve vs bisection vs eig")
    b.add_argument("--sizes", default="100,200,400", help="comma list of n values")
    b.add_argument("--ratios", default="0.5,1,2", help="comma list of p with m = p*n")
    b.add_argument("--gamma", type=float, default=0.01, help="gamma (default 0.01)")
    b.add_argument("--eps", type=float, default=1e-8, help="bisection tolerance")
    b.add_argument("--noise", type=float, default=0.1, help="label noise of the synthetic data")
    b.add_argument("--seed", type=int, default=0, help="random seed")
    b.add_argument("--out", type=Path, required=True, help="output CSV path")

    a = sub.add_parser("attack", help="apply an attack spec to the labels and write z")
    a.add_argument("--input", type=Path, required=True, help="input CSV")
    a.add_argument("--y-column", default="y", help="label column (default y)")
    a.add_argument("--spec", required=True,
                   help="threshold:T | offset:D[:clamp|:noclamp] | quartile:P | "
                        "noisy-threshold:T:S[:LO:HI] | uniform-threshold:T:H")
    a.add_argument("--seed", type=int, default=0, help="seed for randomized specs")
    a.add_argument("--out", type=Path, required=True, help="output CSV path")
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(ns.subcommand)
    cfg.input = getattr(ns, "input", None)
    cfg.out = getattr(ns, "out", None)
    cfg.seed = getattr(ns, "seed", 0)
    cfg.attack = getattr(ns, "attack", None) or getattr(ns, "spec", None)
    if cfg.attack is not None and cfg.attack.strip().lower() == "none":
        cfg.attack = None
    if ns.subcommand in ("solve", "bench"):
        cfg.gamma = ns.gamma
    if ns.subcommand == "solve":
        if not ns.tol > 0 or ns.max_iter < 1:
            raise ArgumentError("tol must be positive and max-iter at least 1")
        cfg.tol, cfg.max_iter = ns.tol, ns.max_iter
    if ns.subcommand in ("solve", "cv"):
        if not ns.beta > 0:
            raise ArgumentError(f"beta must be positive, got {ns.beta}")
    if ns.subcommand == "cv":
        cfg.gamma_grid = parse_grid(ns.gamma_grid)
        cfg.methods = tuple(m.strip() for m in ns.methods.split(",") if m.strip())
        if ns.folds < 2:
            raise ArgumentError("need at least 2 folds")
        for path in (ns.out_csv, ns.out_json):
            if path is not None and not path.parent.exists():
                raise ArgumentError(f"output directory does not exist: {path.parent}")
    if ns.subcommand == "gen" and (ns.m < 1 or ns.n < 1 or ns.noise < 0):
        raise ArgumentError("gen needs m, n >= 1 and noise >= 0")
    if ns.subcommand == "bench":
        _int_list(ns.sizes)
        _float_list(ns.ratios)
        if not ns.eps > 0:
            raise ArgumentError("eps must be positive")
    cfg.options = vars(ns)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# subcommands

def _load(cfg: RunConfig):
    o = cfg.options
    zcol = o.get("z_column")
    if zcol is None:
        with Path(cfg.input).open(newline="", encoding="utf-8") as fh:
            header = [h.strip() for h in next(csv.reader(fh), [])]
        zcol = "z" if "z" in header and o["y_column"] != "z" else None
    return load_csv(cfg.input, o["y_column"], zcol)


def _prepare(d: Dataset, cfg: RunConfig):
    if cfg.options.get("no_normalize"):
        return d, NormalizationParams()
    d, params = minmax_normalize(d)
    return scale_labels(d, cfg.options["beta"], params)


def _dump_json(obj, path: Optional[Path]) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path is None:
        print(text)
    else:
        Path(path).write_text(text + "\n", encoding="utf-8")


def run_gen(cfg: RunConfig) -> int:
    o = cfg.options
    d = synth_regression(o["m"], o["n"], o["noise"], cfg.seed)
    if cfg.attack:
        d = d.with_targets(gen_targets(d.y, parse_attack(cfg.attack, cfg.seed)))
    write_csv(d, cfg.out)
    return EXIT_OK


def run_attack(cfg: RunConfig) -> int:
    d = load_csv(cfg.input, cfg.options["y_column"])
    d = d.with_targets(gen_targets(d.y, parse_attack(cfg.attack, cfg.seed)))
    write_csv(d, cfg.out)
    return EXIT_OK


def run_solve(cfg: RunConfig) -> int:
    d, params = _prepare(_load(cfg), cfg)
    eq, report = solve_game(d, cfg.gamma, SolverConfig(cfg.tol, cfg.max_iter))
    out = eq.to_json()
    out["gamma"] = cfg.gamma
    out["verification"] = report.to_json()
    out["normalization"] = {
        "label_scale": params.label_scale,
        "features_scaled": params.col_min is not None,
    }
    _dump_json(out, cfg.out)
    if not report.passed:
        print(f"error: equilibrium failed verification: {report.to_json()}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def run_cv(cfg: RunConfig) -> int:
    o = cfg.options
    d = _load(cfg)
    if cfg.attack:
        d = d.with_targets(gen_targets(d.y, parse_attack(cfg.attack, cfg.seed)))
    d, params = _prepare(d, cfg)
    if o["folds"] > d.m:
        raise DataError(f"cannot split {d.m} samples into {o['folds']} folds")
    plan = kfold_split(d.m, o["folds"], cfg.seed)
    report = cross_validate(
        d, cfg.gamma_grid, cfg.methods, plan, params,
        SolverConfig(), attack_at_test=not o["no_test_attack"], threads=o["threads"],
    )
    if o["out_csv"] is not None:
        report.to_csv(o["out_csv"])
    if o["out_json"] is not None or o["out_csv"] is None:
        _dump_json(report.to_json(), o["out_json"])
    if report.errors:
        print(f"warning: {len(report.errors)} CV cells failed", file=sys.stderr)
    return EXIT_OK


def bench_instance(m: int, n: int, gamma: float = 0.01, eps: float = 1e-8,
                   noise: float = 0.1, seed=None) -> dict:
    """Time one synthetic instance.

    ``eig_seconds`` covers the eigendecomposition only, ``direct_seconds`` the
    dual solve and ``bisect_seconds`` the Dinkelbach bisection; matrix
    assembly is shared and excluded from all three.
    """
    d = synth_regression(m, n, noise, seed)
    d = d.with_targets(gen_targets(d.y, Quartile(0.25)))
    d, params = minmax_normalize(d)
    d, _ = scale_labels(d, 1.0, params)
    gm = build_matrices(d, gamma)
    timings = {}
    sf = build_spectral(gm, timings)
    t0 = time.perf_counter()
    sol = solve_dual(sf)
    direct = time.perf_counter() - t0
    t0 = time.perf_counter()
    q, _ = dinkelbach_bisection(sf, eps, y_norm_sq=float(d.y @ d.y))
    bisect = time.perf_counter() - t0
    return {
        "m": m,
        "n": n,
        "bisect_seconds": bisect,
        "direct_seconds": direct,
        "eig_seconds": timings["eig"],
        "ratio": bisect / direct if direct > 0 else math.inf,
        "mu_direct": sol.mu_star,
        "mu_bisect": q,
    }


def emit_bench_report(rows: Sequence[dict], path) -> None:
    """Write the timing table; ``ratio`` is recomputed as bisect/direct."""
    rows = list(rows)
    if not rows:
        raise ValueError("bench report needs at least one row")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(BENCH_COLUMNS)
        for r in rows:
            direct = float(r["direct_seconds"])
            ratio = float(r["bisect_seconds"]) / direct if direct > 0 else math.inf
            w.writerow([int(r["m"]), int(r["n"]), f"{float(r['bisect_seconds']):.6g}",
                        f"{direct:.6g}", f"{float(r['eig_seconds']):.6g}", f"{ratio:.6g}"])


def run_bench(cfg: RunConfig) -> int:
    o = cfg.options
    rows = []
    try:
        for n in _int_list(o["sizes"]):
            for p in _float_list(o["ratios"]):
                m = max(1, int(round(p * n)))
                rows.append(bench_instance(m, n, cfg.gamma, o["eps"], o["noise"], cfg.seed))
                emit_bench_report(rows, cfg.out)
                r = rows[-1]
                print(f"m={m} n={n} direct={r['direct_seconds']:.3g}s "
                      f"bisect={r['bisect_seconds']:.3g}s eig={r['eig_seconds']:.3g}s",
                      file=sys.stderr)
    finally:
        if rows:
            emit_bench_report(rows, cfg.out)
    return EXIT_OK


RUNNERS = {"gen": run_gen, "solve": run_solve, "cv": run_cv, "bench": run_bench, "attack": run_attack}


def run(cfg: RunConfig) -> int:
    return RUNNERS[cfg.subcommand](cfg)


def _fail(code: int, exc: BaseException) -> int:
    msg = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(msg), file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    try:
        cfg = config_from_args(ns)
        return run(cfg)
    except ArgumentError as exc:
        return _fail(EXIT_ARGS, exc)
    except (DataError, OSError) as exc:
        return _fail(EXIT_DATA, exc)
    except SpglsError as exc:
        return _fail(EXIT_SOLVER, exc)
    except ValueError as exc:
        return _fail(EXIT_ARGS, exc)


if __name__ == "__main__":
    sys.exit(main())
