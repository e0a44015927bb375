"""Data ingestion, normalization, provider target generation and splitting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import DataError, ScalingError


def _frozen(a, ndim):
    arr = np.array(a, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise DataError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Features ``X`` (m x n), learner labels ``y`` and provider targets ``z``."""

    X: np.ndarray
    y: np.ndarray
    z: np.ndarray
    feature_names: Optional[tuple] = None

    def __post_init__(self):
        X = _frozen(self.X, 2)
        y = _frozen(self.y, 1)
        z = _frozen(self.z, 1)
        m, n = X.shape
        if m < 1 or n < 1:
            raise DataError(f"dataset needs m >= 1 and n >= 1, got {X.shape}")
        if y.shape[0] != m or z.shape[0] != m:
            raise DataError(
                f"row count mismatch: X has {m} rows, y {y.shape[0]}, z {z.shape[0]}"
            )
        for name, arr in (("X", X), ("y", y), ("z", z)):
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{name} contains NaN or Inf")
        names = self.feature_names
        if names is not None:
            names = tuple(str(s) for s in names)
            if len(names) != n:
                raise DataError(f"{len(names)} feature names for {n} columns")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "feature_names", names)

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.X[rows], self.y[rows], self.z[rows], self.feature_names)

    def with_targets(self, z) -> "Dataset":
        return replace(self, z=z)


# ---------------------------------------------------------------------------
# attack specifications

@dataclass(frozen=True)
class Threshold:
    t: float


@dataclass(frozen=True)
class Offset:
    delta: float
    clamp_at_zero: bool = True


@dataclass(frozen=True)
class Quartile:
    p: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"quantile level must lie in (0, 1), got {self.p}")


@dataclass(frozen=True)
class NoisyThreshold:
    """Per-sample threshold ``t + N(0, sigma^2)`` clipped to the given bounds."""

    t: float
    sigma: float
    lower_bound: float = -math.inf
    upper_bound: float = math.inf
    seed: Optional[int] = None

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.lower_bound > self.upper_bound:
            raise ValueError("lower_bound exceeds upper_bound")


@dataclass(frozen=True)
class UniformThreshold:
    """Per-sample threshold ``t + U(-halfwidth, halfwidth)``."""

    t: float
    halfwidth: float
    seed: Optional[int] = None

    def __post_init__(self):
        if self.halfwidth < 0:
            raise ValueError("halfwidth must be nonnegative")


AttackSpec = Union[Threshold, Offset, Quartile, NoisyThreshold, UniformThreshold]


def parse_attack(text: str, seed: Optional[int] = None) -> AttackSpec:
    """Parse compact attack strings such as ``threshold:6`` or ``offset:-5:clamp``.

    Accepted forms::

        threshold:T
        offset:DELTA[:clamp|:noclamp]        (default clamp)
        quartile:P
        noisy-threshold:T:SIGMA[:LO:HI]
        uniform-threshold:T:HALFWIDTH
    """
    parts = text.strip().split(":")
    kind, args = parts[0].lower(), parts[1:]
    try:
        if kind == "threshold" and len(args) == 1:
            return Threshold(float(args[0]))
        if kind == "offset" and len(args) in (1, 2):
            clamp = True
            if len(args) == 2:
                if args[1] not in ("clamp", "noclamp"):
                    raise ValueError(f"unknown offset flag {args[1]!r}")
                clamp = args[1] == "clamp"
            return Offset(float(args[0]), clamp)
        if kind == "quartile" and len(args) == 1:
            return Quartile(float(args[0]))
        if kind == "noisy-threshold" and len(args) in (2, 4):
            lo, hi = (-math.inf, math.inf) if len(args) == 2 else map(float, args[2:])
            return NoisyThreshold(float(args[0]), float(args[1]), lo, hi, seed)
        if kind == "uniform-threshold" and len(args) == 2:
            return UniformThreshold(float(args[0]), float(args[1]), seed)
    except ValueError as exc:
        raise ValueError(f"bad attack spec {text!r}: {exc}") from None
    raise ValueError(f"bad attack spec {text!r}")


def gen_targets(y, spec: AttackSpec) -> np.ndarray:
    """Provider target labels for learner labels ``y`` under ``spec``."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("y must be a nonempty vector")
    if isinstance(spec, Threshold):
        return np.maximum(y, spec.t)
    if isinstance(spec, Offset):
        z = y + spec.delta
        return np.maximum(z, 0.0) if spec.clamp_at_zero else z
    if isinstance(spec, Quartile):
        # linear interpolation between order statistics, h = (m - 1) p
        return np.maximum(y, np.quantile(y, spec.p, method="linear"))
    if isinstance(spec, NoisyThreshold):
        rng = np.random.default_rng(spec.seed)
        t = spec.t + spec.sigma * rng.standard_normal(y.size)
        return np.maximum(y, np.clip(t, spec.lower_bound, spec.upper_bound))
    if isinstance(spec, UniformThreshold):
        rng = np.random.default_rng(spec.seed)
        t = spec.t + rng.uniform(-spec.halfwidth, spec.halfwidth, y.size)
        return np.maximum(y, t)
    raise TypeError(f"unknown attack spec {spec!r}")


# ---------------------------------------------------------------------------
# normalization

@dataclass(frozen=True)
class NormalizationParams:
    col_min: Optional[np.ndarray] = None
    col_max: Optional[np.ndarray] = None
    beta: float = 1.0
    y_inf_norm: float = 1.0

    @property
    def label_scale(self) -> float:
        return self.beta * self.y_inf_norm

    def unscale(self, values):
        """Map scaled labels or predictions back to original units."""
        return np.asarray(values, dtype=float) * self.label_scale


def minmax_normalize(d: Dataset, params: Optional[NormalizationParams] = None):
    """Scale each column to [0, 1]; constant columns become zero."""
    lo = d.X.min(axis=0)
    hi = d.X.max(axis=0)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    X = np.where(span > 0, (d.X - lo) / safe, 0.0)
    base = params or NormalizationParams()
    return replace(d, X=X), replace(base, col_min=lo, col_max=hi)


def scale_labels(d: Dataset, beta: float = 1.0, params: Optional[NormalizationParams] = None):
    """Divide ``y`` and ``z`` by ``beta * max|y|``."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    y_inf = float(np.max(np.abs(d.y)))
    if y_inf == 0.0:
        raise ScalingError("cannot scale labels: y is identically zero")
    s = beta * y_inf
    base = params or NormalizationParams()
    return replace(d, y=d.y / s, z=d.z / s), replace(base, beta=float(beta), y_inf_norm=y_inf)


# ---------------------------------------------------------------------------
# splitting and synthetic data

@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        a = np.array(self.assignments, dtype=int)
        a.setflags(write=False)
        object.__setattr__(self, "assignments", a)

    def split(self, fold: int):
        """(train_indices, test_indices) for one fold."""
        test = np.flatnonzero(self.assignments == fold)
        train = np.flatnonzero(self.assignments != fold)
        return train, test

    def sizes(self):
        return np.bincount(self.assignments, minlength=self.k)


def kfold_split(m: int, k: int, seed: Optional[int] = None) -> FoldPlan:
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    if k > m:
        raise ValueError(f"cannot split {m} samples into {k} folds")
    perm = np.random.default_rng(seed).permutation(m)
    assignments = np.empty(m, dtype=int)
    assignments[perm] = np.arange(m) % k
    return FoldPlan(k, assignments, seed)


def synth_regression(m: int, n: int, noise_sigma: float = 0.1, seed=None, return_coef=False):
    """Gaussian design with a standard-normal hidden coefficient vector.

    ``z`` starts equal to ``y``; apply :func:`gen_targets` afterwards.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((m, n))
    coef = rng.standard_normal(n)
    y = X @ coef
    if noise_sigma > 0:
        y = y + noise_sigma * rng.standard_normal(m)
    d = Dataset(X, y, y, tuple(f"x{j + 1}" for j in range(n)))
    return (d, coef) if return_coef else d


# ---------------------------------------------------------------------------
# CSV I/O

def load_csv(path, y_column: str = "y", z_column: Optional[str] = None) -> Dataset:
    """Read a headered numeric CSV; every non-label column is a feature."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    for col in (y_column, z_column):
        if col is not None and col not in header:
            raise DataError(f"{path}: missing column {col!r} (have {header})")
    width = len(header)
    values = np.empty((len(rows) - 1, width))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise DataError(f"{path}: line {i} has {len(row)} fields, header has {width}")
        for j, cell in enumerate(row):
            try:
                values[i - 2, j] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric value {cell!r} at line {i}, column {header[j]!r}"
                ) from None
    if values.shape[0] == 0:
        raise DataError(f"{path}: no data rows")
    yi = header.index(y_column)
    zi = header.index(z_column) if z_column is not None else None
    feat = [j for j in range(width) if j not in (yi, zi)]
    if not feat:
        raise DataError(f"{path}: no feature columns")
    y = values[:, yi]
    z = values[:, zi] if zi is not None else y
    return Dataset(values[:, feat], y, z, tuple(header[j] for j in feat))


def write_csv(d: Dataset, path, y_column: str = "y", z_column: str = "z") -> None:
    names = d.feature_names or tuple(f"x{j + 1}" for j in range(d.n))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*names, y_column, z_column])
        for xi, yi, zi in zip(d.X, d.y, d.z):
            w.writerow([repr(float(v)) for v in (*xi, yi, zi)])
