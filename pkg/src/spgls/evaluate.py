"""Objective oracles, provider best response, baselines and the CV harness."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import linalg, optimize

from .dataset import Dataset, FoldPlan, NormalizationParams, kfold_split
from .errors import InconsistencyError, RankError, SpglsError
from .recovery import recover_primal
from .reform import SpectralForm, build_matrices, build_spectral
from .solver import (
    SocpSolution,
    SolverConfig,
    Status,
    is_hard_case,
    left_endpoint,
    mu_of_lambda,
    solve_dual,
)

METHODS = ("spgls", "bisect", "ols", "ridge")
RIDGE_GRID = np.logspace(-5, 3, 9)


# ---------------------------------------------------------------------------
# objective and provider response

def spg_objective(w, d: Dataset, gamma: float) -> float:
    w = np.asarray(w, dtype=float)
    t = float(w @ w) / gamma
    r = t * d.z + d.X @ w - d.y - t * d.y
    return float(r @ r) / (1.0 + t) ** 2


def best_response(X, w, z, gamma: float) -> np.ndarray:
    """Provider's modified data ``(z w' + gamma X)(w w' + gamma I)^-1``."""
    X = np.asarray(X, dtype=float)
    w = np.asarray(w, dtype=float)
    K = np.outer(w, w) + gamma * np.eye(w.size)
    rhs = np.outer(np.asarray(z, dtype=float), w) + gamma * X
    # K is symmetric, so X* = (K^-1 rhs')'
    return linalg.solve(K, rhs.T, assume_a="pos").T


def attacked_prediction(X, w, z, gamma: float) -> np.ndarray:
    """``X* w`` via Sherman-Morrison, without forming ``X*``."""
    w = np.asarray(w, dtype=float)
    t = float(w @ w) / gamma
    return (t * np.asarray(z, dtype=float) + np.asarray(X, dtype=float) @ w) / (1.0 + t)


# ---------------------------------------------------------------------------
# Dinkelbach bisection

def maximize_on_interval(fun, lo: float, hi: float, xtol: float = 1e-12):
    """Maximize a unimodal ``fun`` on ``[lo, hi]``; returns ``(x, fun(x))``.

    Bounded Brent search, plus the left endpoint, which bounded searches
    never evaluate exactly.
    """
    res = optimize.minimize_scalar(
        lambda x: -fun(x), bounds=(lo, hi), method="bounded",
        options={"xatol": xtol * (1.0 + abs(lo) + abs(hi)), "maxiter": 500},
    )
    candidates = [(float(res.x), -float(res.fun)), (lo, fun(lo))]
    return max(candidates, key=lambda p: p[1])


def dinkelbach_value(sf: SpectralForm, q: float):
    """``(F(q), argmax lambda)`` with ``F(q) = sup_lam c - 4q - lam - sum b_i^2/e_i(lam)``.

    ``g(lam) = 4 mu(lam)`` is concave and ``g(lam) <= c - lam``, so any
    maximizer lies left of ``c - g(lam_ref)`` for a feasible ``lam_ref``.
    """
    lam_left = left_endpoint(sf)

    def g(lam):
        return 4.0 * mu_of_lambda(sf, lam)

    ref = lam_left + 1.0
    g_ref = g(ref)
    hi = max(ref, sf.c - g_ref)
    lam, val = maximize_on_interval(g, lam_left, hi)
    return val - 4.0 * q, lam


def f_of_q(sf: SpectralForm, q: float) -> float:
    return dinkelbach_value(sf, q)[0]


def label_energy(sf: SpectralForm) -> float:
    """``y'y`` reconstructed from the spectral form."""
    g, n = sf.gamma, sf.n
    h = sf.H[n]
    abar_nn = float(h @ (sf.d * h))
    abar_nk = float(h @ sf.b)
    return max(0.25 * g * abar_nn - 0.5 * math.sqrt(g) * abar_nk + 0.25 * sf.c, 0.0)


@dataclass
class BisectionState:
    q_lo: float
    q_hi: float
    iterations: int = 0
    history: List[tuple] = field(default_factory=list)
    lam_hat: float = math.nan


def dinkelbach_bisection(sf: SpectralForm, eps: float = 1e-8, y_norm_sq: Optional[float] = None,
                         wide_bracket: bool = False):
    """Bisection on ``q`` for the root of the decreasing function ``F``.

    Starts from ``[0, y'y]``: ``F(0) >= 0`` since the objective is a square,
    and ``w = 0`` attains ``y'y``.  ``wide_bracket`` widens the upper end to
    ``2 y'y``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    ysq = label_energy(sf) if y_norm_sq is None else float(y_norm_sq)
    state = BisectionState(0.0, (2.0 if wide_bracket else 1.0) * ysq)
    f_lo, state.lam_hat = dinkelbach_value(sf, 0.0)
    if f_lo < -1e-10 * (1.0 + abs(sf.c)):
        raise InconsistencyError(f"F(0) = {f_lo:.3e} < 0: bisection bracket is inconsistent")
    while state.q_hi - state.q_lo > eps:
        q = 0.5 * (state.q_lo + state.q_hi)
        fq, lam = dinkelbach_value(sf, q)
        state.iterations += 1
        state.history.append((q, fq))
        if fq >= 0:
            state.q_lo, state.lam_hat = q, lam
        else:
            state.q_hi = q
    return 0.5 * (state.q_lo + state.q_hi), state


# ---------------------------------------------------------------------------
# baselines

def ridge_fit(X, y, eta: float = 0.0) -> np.ndarray:
    """``(X'X + eta I)^-1 X'y``; ``eta = 0`` is ordinary least squares."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    n = X.shape[1]
    if eta == 0 and np.linalg.matrix_rank(X) < n:
        raise RankError(f"least squares needs full column rank, X has rank < {n}")
    K = X.T @ X + eta * np.eye(n)
    try:
        return linalg.solve(K, X.T @ y, assume_a="pos")
    except linalg.LinAlgError as exc:
        raise RankError(f"regularized normal equations are singular: {exc}") from None


def fit_spgls(train: Dataset, gamma: float, cfg: Optional[SolverConfig] = None) -> np.ndarray:
    gm = build_matrices(train, gamma)
    sf = build_spectral(gm)
    sol = solve_dual(sf, cfg)
    return recover_primal(sf, sol, gm).w


def fit_bisect(train: Dataset, gamma: float, eps: float = 1e-8) -> np.ndarray:
    gm = build_matrices(train, gamma)
    sf = build_spectral(gm)
    q, state = dinkelbach_bisection(sf, eps, y_norm_sq=float(train.y @ train.y))
    status = Status.BOUNDARY if is_hard_case(sf) else Status.INTERIOR
    lam = left_endpoint(sf) if status == Status.BOUNDARY else state.lam_hat
    sol = SocpSolution(q, lam, np.zeros(sf.n + 1), status, state.iterations)
    return recover_primal(sf, sol, gm).w


# ---------------------------------------------------------------------------
# cross-validation

@dataclass
class CvReport:
    gamma_grid: np.ndarray
    methods: tuple
    mse: Dict[str, np.ndarray]          # method -> (n_gamma, k) fold MSEs, NaN on failure
    seconds: Dict[str, np.ndarray]      # method -> (n_gamma,) summed fit time
    errors: List[dict] = field(default_factory=list)
    ridge_eta: Optional[np.ndarray] = None

    def mean(self, method: str) -> np.ndarray:
        with np.errstate(all="ignore"):
            return np.nanmean(self.mse[method], axis=1)

    def std(self, method: str) -> np.ndarray:
        with np.errstate(all="ignore"):
            return np.nanstd(self.mse[method], axis=1)

    def rows(self):
        for gi, g in enumerate(self.gamma_grid):
            for m in self.methods:
                folds = self.mse[m][gi]
                ok = folds[~np.isnan(folds)]
                yield {
                    "gamma": float(g),
                    "method": m,
                    "mse_mean": float(ok.mean()) if ok.size else math.nan,
                    "mse_std": float(ok.std()) if ok.size else math.nan,
                    "n_failed": int(np.isnan(folds).sum()),
                    "seconds": float(self.seconds[m][gi]),
                }

    def to_csv(self, path) -> None:
        import csv

        fields = ["gamma", "method", "mse_mean", "mse_std", "n_failed", "seconds"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=fields)
            w.writeheader()
            for row in self.rows():
                w.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in row.items()})

    def to_json(self) -> dict:
        return {
            "gamma_grid": [float(g) for g in self.gamma_grid],
            "methods": list(self.methods),
            "mse": {m: self.mse[m].tolist() for m in self.methods},
            "ridge_eta": None if self.ridge_eta is None else self.ridge_eta.tolist(),
            "errors": self.errors,
            "timings": {m: self.seconds[m].tolist() for m in self.methods},
        }


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SPGLS_THREADS", "1")))
    except ValueError:
        return 1


def _mse(Xte, w, zte, yte, gamma, scale, attack):
    pred = attacked_prediction(Xte, w, zte, gamma) if attack else Xte @ w
    return float(np.mean((scale * pred - scale * yte) ** 2))


def cross_validate(
    d: Dataset,
    gamma_grid: Sequence[float],
    methods: Sequence[str] = ("spgls", "ols", "ridge"),
    plan: Optional[FoldPlan] = None,
    params: Optional[NormalizationParams] = None,
    cfg: Optional[SolverConfig] = None,
    ridge_grid: Sequence[float] = RIDGE_GRID,
    bisect_eps: float = 1e-8,
    attack_at_test: bool = True,
    threads: Optional[int] = None,
) -> CvReport:
    """K-fold MSE of each method's predictor against the provider's best response.

    The provider responds to each method's own ``w``; ``attack_at_test=False``
    scores unmodified test features instead.  MSEs are computed in original
    label units using ``params``.
    """
    gammas = np.sort(np.asarray(gamma_grid, dtype=float))
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {METHODS}")
    plan = plan or kfold_split(d.m, 10, 0)
    if plan.assignments.size != d.m:
        raise ValueError("fold plan does not match the dataset size")
    scale = params.label_scale if params is not None else 1.0
    k, ng = plan.k, gammas.size
    etas = np.asarray(ridge_grid, dtype=float)

    def cell(method, fold, gi):
        tr, te = plan.split(fold)
        train, test = d.subset(tr), d.subset(te)
        g = gammas[gi]
        t0 = time.perf_counter()
        try:
            if method == "spgls":
                ws = [fit_spgls(train, g, cfg)]
            elif method == "bisect":
                ws = [fit_bisect(train, g, bisect_eps)]
            elif method == "ols":
                ws = [ridge_fit(train.X, train.y, 0.0)]
            else:
                ws = [ridge_fit(train.X, train.y, eta) for eta in etas]
        except SpglsError as exc:
            return method, fold, gi, None, time.perf_counter() - t0, f"{type(exc).__name__}: {exc}"
        secs = time.perf_counter() - t0
        losses = [_mse(test.X, w, test.z, test.y, g, scale, attack_at_test) for w in ws]
        return method, fold, gi, losses, secs, None

    tasks = [(m, f, gi) for gi in range(ng) for m in methods for f in range(k)]
    nthreads = threads or _threads()
    if nthreads > 1:
        with ThreadPoolExecutor(nthreads) as pool:
            results = list(pool.map(lambda t: cell(*t), tasks))
    else:
        results = [cell(*t) for t in tasks]

    mse = {m: np.full((ng, k), np.nan) for m in methods}
    seconds = {m: np.zeros(ng) for m in methods}
    ridge_all = np.full((ng, k, etas.size), np.nan)
    errors = []
    for method, fold, gi, losses, secs, err in results:
        seconds[method][gi] += secs
        if err is not None:
            errors.append({"gamma": float(gammas[gi]), "method": method, "fold": fold, "error": err})
            continue
        if method == "ridge":
            ridge_all[gi, fold] = losses
        else:
            mse[method][gi, fold] = losses[0]

    ridge_eta = None
    if "ridge" in methods:
        with np.errstate(all="ignore"):
            cv = np.nanmean(ridge_all, axis=1)
        best = np.array([np.nanargmin(row) if np.any(~np.isnan(row)) else 0 for row in cv])
        ridge_eta = etas[best]
        for gi in range(ng):
            mse["ridge"][gi] = ridge_all[gi, :, best[gi]]
    return CvReport(gammas, tuple(methods), mse, seconds, errors, ridge_eta)
