"""Rotated-cone program in the reduced coordinates, solved through its 1-D dual.

With ``e_i(lam) = d_i + lam/gamma`` the cone program is::

    max  mu
    s.t. e_i(lam) >= 0,
         c - 4 mu - lam - sum_i s_i >= 0,
         s_i e_i(lam) >= b_i^2.

Each ``s_i`` appears in one cone and one linear row, so at the optimum
``s_i = b_i^2 / e_i(lam)`` and the problem collapses to maximizing the
concave function ``mu(lam) = (c - lam - sum_i b_i^2 / e_i(lam)) / 4`` over
``lam >= -gamma * d_min``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConvergenceError
from .reform import GameMatrices, SpectralForm, eig_sym


class Status(str, enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    UNATTAINED = "unattained"


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 200
    bracket_growth: float = 2.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.bracket_growth > 1:
            raise ValueError("bracket_growth must exceed 1")


@dataclass(frozen=True)
class SocpSolution:
    mu_star: float
    lambda_star: float
    s_star: np.ndarray
    status: Status
    iterations: int
    certificate_min_eig: float = math.nan


def abs_tol(sf: SpectralForm) -> float:
    return 1e-12 * (1.0 + float(np.max(np.abs(sf.d), initial=0.0)))


def squared_coupling(sf: SpectralForm) -> np.ndarray:
    """``b_i^2`` with entries below ``1e-10 * max|b|`` treated as exact zeros."""
    b = np.asarray(sf.b)
    bmax = float(np.max(np.abs(b), initial=0.0))
    b2 = b * b
    b2[np.abs(b) <= 1e-10 * bmax] = 0.0
    return b2


def mu_of_lambda(sf: SpectralForm, lam: float) -> float:
    """Dual objective ``mu(lam)``; ``-inf`` where the LMI cannot hold."""
    e = sf.d + lam / sf.gamma
    tol = abs_tol(sf)
    b2 = squared_coupling(sf)
    if np.any(e < -tol):
        return -math.inf
    blocked = e <= tol
    if np.any(b2[blocked] > 0):
        return -math.inf
    free = ~blocked
    # 0/0 = 0 on blocked indices
    return (sf.c - lam - float(np.sum(b2[free] / e[free]))) / 4.0


def dmu_of_lambda(sf: SpectralForm, lam: float) -> float:
    """Derivative of ``mu(lam)`` on the open domain."""
    e = sf.d + lam / sf.gamma
    b2 = squared_coupling(sf)
    nz = b2 > 0
    return (-1.0 + float(np.sum(b2[nz] / e[nz] ** 2)) / sf.gamma) / 4.0


def left_endpoint(sf: SpectralForm) -> float:
    return -sf.gamma * float(sf.d[0])


def bottom_indices(sf: SpectralForm) -> np.ndarray:
    """Indices whose eigenvalue coincides with ``d_min`` up to ``abs_tol``."""
    return np.flatnonzero(sf.d <= sf.d[0] + abs_tol(sf))


def is_hard_case(sf: SpectralForm) -> bool:
    """True when the maximizer sits at the left endpoint of the domain.

    That requires the coupling ``b`` to vanish on the bottom eigenspace and
    the one-sided derivative at the endpoint to be nonpositive.
    """
    b2 = squared_coupling(sf)
    J = bottom_indices(sf)
    if np.any(b2[J] > 0):
        return False
    mask = np.ones(sf.d.size, bool)
    mask[J] = False
    gap = sf.d[mask] - sf.d[0]
    slope_sum = float(np.sum(b2[mask] / gap ** 2)) if gap.size else 0.0
    return slope_sum <= sf.gamma


def _eliminated_s(sf: SpectralForm, lam: float) -> np.ndarray:
    e = sf.d + lam / sf.gamma
    b2 = squared_coupling(sf)
    s = np.zeros_like(e)
    nz = b2 > 0
    s[nz] = b2[nz] / e[nz]
    return s


def solve_dual(sf: SpectralForm, cfg: Optional[SolverConfig] = None) -> SocpSolution:
    """Maximize ``mu(lam)``.

    Stationarity ``sum_i b_i^2 / e_i(lam)^2 = gamma`` is solved by Newton's
    method on ``psi(lam) = 1/sqrt(S(lam)) - 1/sqrt(gamma)`` (nearly linear
    next to a pole), safeguarded by bisection inside a sign bracket.
    """
    cfg = cfg or SolverConfig()
    g = sf.gamma
    lam_left = left_endpoint(sf)

    if is_hard_case(sf):
        return SocpSolution(
            mu_of_lambda(sf, lam_left), lam_left, _eliminated_s(sf, lam_left),
            Status.BOUNDARY, 0,
        )

    b2 = squared_coupling(sf)
    nz = b2 > 0
    bq, dq = b2[nz], sf.d[nz]

    def S(lam):
        return float(np.sum(bq / (dq + lam / g) ** 2))

    def psi_and_slope(lam):
        e = dq + lam / g
        s = float(np.sum(bq / e ** 2))
        ds = -2.0 / g * float(np.sum(bq / e ** 3))
        return 1.0 / math.sqrt(s) - 1.0 / math.sqrt(g), -0.5 * ds / s ** 1.5

    # S decreases from +inf at the pole to 0, so S - gamma changes sign once.
    lo, step = lam_left, 1.0
    hi = lam_left + step
    it = 0
    while S(hi) > g:
        it += 1
        if it > cfg.max_iter:
            raise ConvergenceError("could not bracket the dual maximizer", (lo, hi))
        lo = hi
        step *= cfg.bracket_growth
        hi = lam_left + step

    lam = hi
    while True:
        it += 1
        if it > cfg.max_iter:
            raise ConvergenceError("dual Newton iteration did not converge", (lo, hi))
        psi, slope = psi_and_slope(lam)
        if psi == 0.0:
            break
        if psi < 0:
            lo = max(lo, lam)
        else:
            hi = min(hi, lam)
        if abs(S(lam) - g) <= cfg.tol * g or hi - lo <= cfg.tol * (1.0 + abs(lam)):
            break
        nxt = lam - psi / slope if slope > 0 else math.nan
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        lam = nxt

    # A few unguarded Newton steps drive |S - gamma| to rounding level; the
    # recovered constraint residual scales with it when |w| is large.
    for _ in range(4):
        psi, slope = psi_and_slope(lam)
        if psi == 0.0 or not slope > 0:
            break
        nxt = lam - psi / slope
        if not (nxt + g * dq.min() > 0) or abs(S(nxt) - g) >= abs(S(lam) - g):
            break
        lam = nxt
        it += 1

    return SocpSolution(mu_of_lambda(sf, lam), lam, _eliminated_s(sf, lam), Status.INTERIOR, it)


def check_lmi(gm: GameMatrices, mu: float, lam: float) -> float:
    """Smallest eigenvalue of ``A - mu B + lam C`` in the original coordinates."""
    values, _ = eig_sym(gm.lmi(mu, lam))
    return float(values[0])


def certify(sol: SocpSolution, gm: GameMatrices) -> SocpSolution:
    return replace(sol, certificate_min_eig=check_lmi(gm, sol.mu_star, sol.lambda_star))


# ---------------------------------------------------------------------------
# plain-text conic export
#
#   rsocp K                        K = n + 1 cones
#   vars mu lambda s1 ... sK
#   obj max mu
#   lin  a0 a_mu a_lambda a_s1 ... a_sK     meaning a0 + a . x >= 0
#   rcone i d_i b_i gamma                   meaning s_i (d_i + lambda/gamma) >= b_i^2

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def export_conic(sf: SpectralForm, path) -> None:
    k = sf.n + 1
    lines = [f"rsocp {k}", "vars mu lambda " + " ".join(f"s{i + 1}" for i in range(k)), "obj max mu"]
    for i in range(k):
        row = [sf.d[i], 0.0, 1.0 / sf.gamma] + [0.0] * k
        lines.append("lin " + " ".join(_fmt(v) for v in row))
    lines.append("lin " + " ".join(_fmt(v) for v in [sf.c, -4.0, -1.0] + [-1.0] * k))
    for i in range(k):
        lines.append(f"rcone {i + 1} {_fmt(sf.d[i])} {_fmt(sf.b[i])} {_fmt(sf.gamma)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class ConicProblem:
    lin: np.ndarray   # rows [a0, a_mu, a_lambda, a_s...]
    cones: np.ndarray  # rows [d_i, b_i, gamma]


def read_conic(path) -> ConicProblem:
    lin, cones, k = [], [], None
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        tok = raw.split()
        if not tok:
            continue
        if tok[0] == "rsocp":
            k = int(tok[1])
        elif tok[0] == "lin":
            lin.append([float(t) for t in tok[1:]])
        elif tok[0] == "rcone":
            cones.append([float(t) for t in tok[2:]])
        elif tok[0] not in ("vars", "obj"):
            raise ValueError(f"unknown record {tok[0]!r}")
    if k is None or len(cones) != k:
        raise ValueError("malformed conic file")
    return ConicProblem(np.array(lin), np.array(cones))
