"""Game matrices and their reduction to diagonal-plus-border spectral form.

The LMI ``A - mu B + lam C >= 0`` is transformed by two congruences.  The
first, ``V1``, depends only on ``gamma`` and diagonalizes ``B`` and ``C``
simultaneously; the second is the eigenbasis ``H`` of the leading
``(n+1)``-block of ``V1' A V1``.  Afterwards the LMI reads::

    [ D + (lam/gamma) I        b           ]
    [ b'                c - 4 mu - lam     ]  >= 0,    D = diag(d).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import Dataset
from .errors import DataError, InconsistencyError, NumericError


@dataclass(frozen=True)
class GameMatrices:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    gamma: float
    m: int = 0

    @property
    def n(self) -> int:
        return self.A.shape[0] - 2

    def lmi(self, mu: float, lam: float) -> np.ndarray:
        return self.A - mu * self.B + lam * self.C


@dataclass(frozen=True)
class SpectralForm:
    d: np.ndarray
    b: np.ndarray
    c: float
    H: np.ndarray
    gamma: float
    n: int
    m: int


def b_matrix(n: int) -> np.ndarray:
    B = np.zeros((n + 2, n + 2))
    B[n:, n:] = 1.0
    return B


def c_matrix(n: int, gamma: float) -> np.ndarray:
    C = np.zeros((n + 2, n + 2))
    C[np.arange(n), np.arange(n)] = 1.0 / gamma
    C[n, n + 1] = C[n + 1, n] = -0.5
    return C


def build_matrices(data: Dataset, gamma: float) -> GameMatrices:
    """Assemble ``A``, ``B``, ``C`` blockwise without forming ``[X | z-y | -y]``."""
    if not (gamma > 0 and math.isfinite(gamma)):
        raise DataError(f"gamma must be positive and finite, got {gamma}")
    X, y, z = data.X, data.y, data.z
    n = data.n
    r = z - y
    A = np.empty((n + 2, n + 2))
    A[:n, :n] = X.T @ X
    A[:n, n] = X.T @ r
    A[:n, n + 1] = -(X.T @ y)
    A[n, n] = r @ r
    A[n, n + 1] = -(r @ y)
    A[n + 1, n + 1] = y @ y
    A = np.triu(A) + np.triu(A, 1).T
    if not np.all(np.isfinite(A)):
        raise NumericError("non-finite entries in the game matrix A")
    return GameMatrices(A, b_matrix(n), c_matrix(n, gamma), float(gamma), data.m)


def v1_matrix(n: int, gamma: float) -> np.ndarray:
    """First congruence; only its trailing 2x2 block differs from the identity."""
    V = np.eye(n + 2)
    s = 1.0 / math.sqrt(gamma)
    V[n:, n:] = [[s, 1.0], [-s, 1.0]]
    return V


def _apply_v1(M: np.ndarray, gamma: float) -> np.ndarray:
    # V1' M V1 touching only the last two rows and columns: O(n) work.
    n = M.shape[0] - 2
    blk = v1_matrix(0, gamma)
    out = np.array(M, dtype=float, copy=True)
    out[:, n:] = out[:, n:] @ blk
    out[n:, :] = blk.T @ out[n:, :]
    return out


def congruence_v1(gm: GameMatrices, rtol: float = 8 * np.finfo(float).eps):
    """Return ``(Abar, Bbar, Cbar)``.

    ``Bbar`` and ``Cbar`` are computed, checked against their closed forms
    ``diag(0, ..., 0, 4)`` and ``diag(I/gamma, -1)``, and the exact closed
    forms are returned.
    """
    n, g = gm.n, gm.gamma
    Abar = _apply_v1(gm.A, g)
    Abar = 0.5 * (Abar + Abar.T)

    Bbar = np.zeros((n + 2, n + 2))
    Bbar[-1, -1] = 4.0
    Cbar = np.diag(np.r_[np.full(n + 1, 1.0 / g), -1.0])
    for name, got, want in (
        ("Bbar", _apply_v1(gm.B, g), Bbar),
        ("Cbar", _apply_v1(gm.C, g), Cbar),
    ):
        scale = np.max(np.abs(want))
        if np.max(np.abs(got - want)) > rtol * scale:
            raise InconsistencyError(f"{name} lost its diagonal pattern under V1")
    return Abar, Bbar, Cbar


def eig_sym(M: np.ndarray):
    """Ascending eigenvalues and orthonormal eigenvectors of a symmetric matrix.

    Each eigenvector's first non-negligible entry is made nonnegative so the
    result is deterministic.
    """
    M = np.asarray(M, dtype=float)
    M = 0.5 * (M + M.T)
    try:
        values, vectors = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition of order {M.shape[0]} failed: {exc}") from None
    if not (np.all(np.isfinite(values)) and np.all(np.isfinite(vectors))):
        raise NumericError(f"eigendecomposition of order {M.shape[0]} returned non-finite values")
    if vectors.size:
        mag = np.abs(vectors)
        lead = np.argmax(mag > 1e-12 * mag.max(axis=0), axis=0)
        signs = np.sign(vectors[lead, np.arange(vectors.shape[1])])
        signs[signs == 0] = 1.0
        vectors = vectors * signs
    return values, vectors


def build_spectral(gm: GameMatrices, timings: Optional[dict] = None) -> SpectralForm:
    """Reduce the game matrices to ``(d, b, c, H)``.

    When ``timings`` is given, the eigendecomposition wall time is stored
    under ``"eig"``.
    """
    n = gm.n
    Abar, _, _ = congruence_v1(gm)
    t0 = time.perf_counter()
    d, H = eig_sym(Abar[: n + 1, : n + 1])
    if timings is not None:
        timings["eig"] = time.perf_counter() - t0
    b = H.T @ Abar[: n + 1, n + 1]
    c = float(Abar[n + 1, n + 1])
    for arr in (d, H, b):
        arr.setflags(write=False)
    return SpectralForm(d, b, c, H, gm.gamma, n, gm.m)


def reduced_lmi(sf: SpectralForm, mu: float, lam: float) -> np.ndarray:
    """``Atilde - mu Btilde + lam Ctilde`` assembled from the spectral form."""
    k = sf.n + 1
    M = np.zeros((k + 1, k + 1))
    M[np.arange(k), np.arange(k)] = sf.d + lam / sf.gamma
    M[:k, k] = M[k, :k] = sf.b
    M[k, k] = sf.c - 4.0 * mu - lam
    return M


def to_original(sf: SpectralForm, ytil: np.ndarray) -> np.ndarray:
    """Map reduced coordinates back: ``v = V1 V2 ytil``."""
    k = sf.n + 1
    u = np.empty(k + 1)
    u[:k] = sf.H @ ytil[:k]
    u[k] = ytil[k]
    s = 1.0 / math.sqrt(sf.gamma)
    v = u.copy()
    v[sf.n] = s * u[sf.n] + u[k]
    v[k] = -s * u[sf.n] + u[k]
    return v
