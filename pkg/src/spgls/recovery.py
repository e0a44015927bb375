"""Equilibrium recovery from the dual optimum or from a dual certificate matrix."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from .errors import (
    DegenerateDualError,
    InconsistencyError,
    RecoveryError,
    UnattainedEquilibriumError,
)
from .reform import GameMatrices, SpectralForm, eig_sym, to_original
from .solver import SocpSolution, Status, abs_tol, check_lmi, squared_coupling

# relative size below which the homogenizing coordinate counts as zero: the
# loose value applies when mu* sits at the |w| -> inf limit |z - y|^2, the
# floor when mu* is strictly below it (the minimum is then attained)
_HOMOG_TOL = 1e-9
_HOMOG_FLOOR = 1e-15


@dataclass(frozen=True)
class Equilibrium:
    w: np.ndarray
    alpha: float
    mu_star: float
    lambda_star: float
    objective_value: float
    residual_constraint: float
    residual_objective: float
    status: str = Status.INTERIOR.value
    timings: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "mu": self.mu_star,
            "lambda": self.lambda_star,
            "alpha": self.alpha,
            "w": [float(v) for v in self.w],
            "objective": self.objective_value,
            "residuals": {
                "constraint": self.residual_constraint,
                "objective": self.residual_objective,
            },
            "status": self.status,
            "timings": dict(self.timings),
        }


@dataclass(frozen=True)
class VerificationReport:
    objective_value: float
    residual_objective: float
    residual_constraint: float
    min_eig: float
    objective_ok: bool
    constraint_ok: bool
    lmi_ok: bool

    @property
    def passed(self) -> bool:
        return self.objective_ok and self.constraint_ok and self.lmi_ok

    def to_json(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


@dataclass(frozen=True)
class Rank1Certificate:
    factors: List[np.ndarray]
    source_rank: int

    def matrix(self) -> np.ndarray:
        return sum(np.outer(p, p) for p in self.factors)


def objective_from_matrix(A: np.ndarray, w, gamma: float) -> float:
    """Fractional objective at ``w`` evaluated through ``A``."""
    w = np.asarray(w, dtype=float)
    a = float(w @ w) / gamma
    v = np.r_[w, a, 1.0]
    return float(v @ A @ v) / (1.0 + a) ** 2


def _equilibrium(w, alpha, gm, mu, lam, status, data=None) -> Equilibrium:
    obj = _objective(w, gm, data)
    return Equilibrium(
        w=np.asarray(w, dtype=float),
        alpha=float(alpha),
        mu_star=float(mu),
        lambda_star=float(lam),
        objective_value=obj,
        residual_constraint=abs(float(alpha) - float(w @ w) / gm.gamma),
        residual_objective=abs(obj - mu),
        status=status,
    )


def _objective(w, gm, data):
    if data is not None:
        from .evaluate import spg_objective

        return spg_objective(w, data, gm.gamma)
    return objective_from_matrix(gm.A, w, gm.gamma)


def _homogeneous(sf: SpectralForm, ytil: np.ndarray) -> np.ndarray:
    """``V1 V2 ytil`` with the last coordinate computed without cancellation.

    That coordinate is ``1 - h.y/sqrt(gamma)`` (``h`` = row ``n`` of ``H``),
    which is tiny when ``|w|`` is large.  On the constraint set
    ``|y|^2 = gamma`` it equals ``|y - sqrt(gamma) h|^2 / (2 gamma)``, a sum
    of squares.  ``y`` is first scaled onto that set; the scaling is at the
    level of the stationarity tolerance.
    """
    k, g = sf.n + 1, sf.gamma
    y = np.array(ytil[:k], dtype=float)
    if ytil[k] != 1.0:
        return to_original(sf, ytil)
    S = float(y @ y)
    if not (S > 0 and abs(S - g) <= 1e-6 * g):
        return to_original(sf, ytil)
    y *= math.sqrt(g / S)
    v = to_original(sf, np.r_[y, 1.0])
    h = sf.H[sf.n]
    r = y - math.sqrt(g) * h
    v[k] = float(r @ r) / (2.0 * g)
    return v


def recover_primal(sf: SpectralForm, sol: SocpSolution, gm: GameMatrices, data=None) -> Equilibrium:
    """Null vector of the optimal LMI, normalized to ``(w, alpha, 1)``.

    In the boundary case the null space contains a free direction inside the
    bottom eigenspace; its length is fixed by ``v' C v = 0`` and both signs
    are tried.
    """
    if sol.status == Status.UNATTAINED:
        raise UnattainedEquilibriumError("solution is flagged as unattained")
    k, g, lam = sf.n + 1, sf.gamma, sol.lambda_star
    e = sf.d + lam / g
    blocked = e <= abs_tol(sf)
    nz = (squared_coupling(sf) > 0) & ~blocked

    base = np.zeros(k + 1)
    base[:k][nz] = -sf.b[nz] / e[nz]
    base[k] = 1.0

    directions = [np.zeros(k + 1)]
    J = np.flatnonzero(blocked)
    if sol.status == Status.BOUNDARY and J.size:
        theta2 = g - float(base[:k] @ base[:k])
        if theta2 < -1e-10 * g:
            raise InconsistencyError(
                f"free null-space component has negative squared length {theta2:.3e}"
            )
        theta = math.sqrt(max(theta2, 0.0))
        # Rotate the bottom eigenspace so the free direction moves the
        # homogenizing coordinate as much as possible.
        q = np.zeros(k + 1)
        row = sf.H[sf.n, J]
        if np.linalg.norm(row) > 1e-8:
            q[:k][J] = row / np.linalg.norm(row)
        else:
            q[J[0]] = 1.0
        directions = [theta * q, -theta * q] if theta > 0 else [q * 0.0]

    limit = float(gm.A[sf.n, sf.n])
    y_energy = float(gm.A[sf.n + 1, sf.n + 1])
    at_limit = sol.mu_star >= limit - (1e-9 * limit + 1e-15 * (1.0 + y_energy))
    cutoff = _HOMOG_TOL if at_limit else _HOMOG_FLOOR
    fallback = None
    for step in directions:
        v = _homogeneous(sf, base + step)
        if abs(v[k]) <= cutoff * np.linalg.norm(v):
            continue
        v = v / v[k]
        eq = _equilibrium(v[: sf.n], v[sf.n], gm, sol.mu_star, lam, sol.status.value, data)
        if fallback is None:
            fallback = eq
        if verify_equilibrium(eq, gm, data).passed:
            return eq
    if fallback is None:
        if not at_limit:
            raise RecoveryError(
                f"optimal value {sol.mu_star:.6g} lies below the |w| -> inf limit {limit:.6g}, "
                "but the minimizer is too large to resolve in double precision"
            )
        raise UnattainedEquilibriumError(
            f"optimal value {sol.mu_star:.6g} is an infimum: every null vector has a "
            "vanishing homogenizing coordinate"
        )
    return fallback


def verify_equilibrium(eq: Equilibrium, gm: GameMatrices, data=None) -> VerificationReport:
    """Check the constraint, the objective against ``mu*`` and the LMI certificate."""
    w = np.asarray(eq.w, dtype=float)
    obj = _objective(w, gm, data)
    res_obj = abs(obj - eq.mu_star)
    res_con = abs(eq.alpha - float(w @ w) / gm.gamma)
    min_eig = check_lmi(gm, eq.mu_star, eq.lambda_star)
    return VerificationReport(
        objective_value=obj,
        residual_objective=res_obj,
        residual_constraint=res_con,
        min_eig=min_eig,
        objective_ok=bool(res_obj <= 1e-6 * (1.0 + abs(eq.mu_star))),
        constraint_ok=bool(res_con <= 1e-8 * (1.0 + abs(eq.alpha)) and eq.alpha >= -1e-12),
        lmi_ok=bool(min_eig >= -1e-8 * np.linalg.norm(gm.A)),
    )


# ---------------------------------------------------------------------------
# rank-one decomposition

def _quad(G, p, q=None):
    return float(p @ G @ (p if q is None else q))


def neutral_rotation(pi: np.ndarray, pj: np.ndarray, G: np.ndarray):
    """One update on a pair with ``pi' G pi > 0 > pj' G pj``.

    Returns ``(new_i, new_j)`` with ``new_i' G new_i = 0`` and
    ``new_i new_i' + new_j new_j' = pi pi' + pj pj'``.
    """
    a, bq, cq = _quad(G, pi), _quad(G, pi, pj), _quad(G, pj)
    if not (a > 0 > cq):
        raise ValueError("rotation needs a G-positive and a G-negative factor")
    disc = bq * bq - a * cq
    # the root without cancellation
    t = -(bq + math.copysign(math.sqrt(disc), bq)) / a
    r = math.sqrt(1.0 + t * t)
    return (t * pi + pj) / r, (pi - t * pj) / r


def rank1_decompose(W: np.ndarray, G: np.ndarray, inner_tol: float = 1e-8) -> Rank1Certificate:
    """Split PSD ``W`` into rank-one terms ``p p'`` with ``p' G p = 0``.

    Starts from the scaled eigenvectors of ``W`` and repeatedly pairs a
    positive factor ``p_i`` with a negative one ``p_j``: with ``t`` a root of
    ``(Gp_i.p_i) t^2 + 2 (Gp_i.p_j) t + Gp_j.p_j = 0`` the rotation::

        p_i <- (t p_i + p_j) / sqrt(1 + t^2)
        p_j <- (p_i - t p_j) / sqrt(1 + t^2)

    makes the new ``p_i`` neutral and keeps ``p_i p_i' + p_j p_j'`` fixed.
    Terminates after at most ``rank - 1`` rotations.
    """
    W = np.asarray(W, dtype=float)
    G = np.asarray(G, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or G.shape != W.shape:
        raise ValueError("W and G must be square matrices of the same order")
    G = 0.5 * (G + G.T)
    wn = np.linalg.norm(W)
    gn = np.linalg.norm(G)
    vals, vecs = eig_sym(W)
    if vals.size and vals[0] < -1e-10 * max(wn, 1e-300):
        raise ValueError(f"W is not positive semidefinite (min eigenvalue {vals[0]:.3e})")
    inner = float(np.sum(G * W))
    if abs(inner) > inner_tol * gn * wn:
        raise ValueError(f"<G, W> = {inner:.3e} is not zero")

    keep = vals > 1e-12 * max(vals[-1] if vals.size else 0.0, 0.0)
    factors = [vecs[:, i] * math.sqrt(vals[i]) for i in np.flatnonzero(keep)]
    rank = len(factors)

    def sign(p):
        q = _quad(G, p)
        tol = 1e-13 * gn * float(p @ p)
        return 0 if abs(q) <= tol else (1 if q > 0 else -1)

    active = [i for i in range(rank) if sign(factors[i]) != 0]
    while True:
        pos = [i for i in active if sign(factors[i]) > 0]
        neg = [i for i in active if sign(factors[i]) < 0]
        if not pos or not neg:
            break
        i, j = pos[0], neg[0]
        factors[i], factors[j] = neutral_rotation(factors[i], factors[j], G)
        active.remove(i)
        if sign(factors[j]) == 0:
            active.remove(j)
    return Rank1Certificate(factors, rank)


def recover_from_dual_matrix(
    What: np.ndarray, gm: GameMatrices, mu_star: float, lambda_star: float, data=None
) -> Equilibrium:
    """Extract ``w`` from an optimal dual matrix via the rank-one decomposition."""
    What = np.asarray(What, dtype=float)
    k = gm.n + 1
    if What.shape != gm.A.shape:
        raise ValueError(f"dual matrix has shape {What.shape}, expected {gm.A.shape}")
    What = 0.5 * (What + What.T)
    wn = np.linalg.norm(What)
    rtol = 1e-6
    if eig_sym(What)[0][0] < -rtol * wn:
        raise ValueError("dual matrix is not positive semidefinite")
    if abs(np.sum(gm.B * What) - 1.0) > rtol:
        raise ValueError("dual matrix violates <B, W> = 1")
    if abs(np.sum(gm.C * What)) > rtol * max(wn, 1.0):
        raise ValueError("dual matrix violates <C, W> = 0")
    if What[k, k] <= 1e-10 * np.trace(What):
        raise DegenerateDualError(
            "dual matrix has a vanishing last diagonal entry; X'(y - z) = 0 is implied"
        )
    M = gm.lmi(mu_star, lambda_star)
    if abs(np.sum(M * What)) > rtol * max(np.linalg.norm(M) * wn, 1.0):
        raise ValueError("dual matrix is not complementary to the given (mu, lambda)")

    Wbar = What / What[k, k]
    cert = rank1_decompose(Wbar, gm.C, inner_tol=rtol)
    order = sorted(cert.factors, key=lambda p: -abs(p[k]) / np.linalg.norm(p))
    fallback = None
    for p in order:
        if abs(p[k]) <= 1e-12 * np.linalg.norm(p):
            continue
        v = p / p[k]
        eq = _equilibrium(v[: gm.n], v[gm.n], gm, mu_star, lambda_star, "dual-matrix", data)
        if verify_equilibrium(eq, gm, data).passed:
            return eq
        if fallback is None:
            fallback = eq
    if fallback is None:
        raise RecoveryError("no rank-one factor has a nonzero homogenizing coordinate")
    return fallback
