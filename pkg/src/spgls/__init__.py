"""Global equilibria of the least-squares Stackelberg prediction game."""

from __future__ import annotations

import time
from typing import Optional, Tuple

from .dataset import (
    Dataset,
    NoisyThreshold,
    NormalizationParams,
    Offset,
    Quartile,
    Threshold,
    UniformThreshold,
    gen_targets,
    kfold_split,
    load_csv,
    minmax_normalize,
    parse_attack,
    scale_labels,
    synth_regression,
    write_csv,
)
from .errors import (
    ConvergenceError,
    DataError,
    DegenerateDualError,
    InconsistencyError,
    NumericError,
    RankError,
    RecoveryError,
    ScalingError,
    SpglsError,
    UnattainedEquilibriumError,
)
from .evaluate import (
    attacked_prediction,
    best_response,
    cross_validate,
    dinkelbach_bisection,
    f_of_q,
    ridge_fit,
    spg_objective,
)
from .recovery import (
    Equilibrium,
    VerificationReport,
    rank1_decompose,
    recover_from_dual_matrix,
    recover_primal,
    verify_equilibrium,
)
from .reform import GameMatrices, SpectralForm, build_matrices, build_spectral, congruence_v1
from .solver import SocpSolution, SolverConfig, Status, certify, export_conic, solve_dual

__version__ = "0.1.0"


def solve_game(
    data: Dataset, gamma: float, cfg: Optional[SolverConfig] = None
) -> Tuple[Equilibrium, VerificationReport]:
    """Full pipeline: matrices, spectral form, dual solve, recovery, verification."""
    timings = {}
    t0 = time.perf_counter()
    gm = build_matrices(data, gamma)
    timings["build"] = time.perf_counter() - t0
    sf = build_spectral(gm, timings)
    t0 = time.perf_counter()
    sol = solve_dual(sf, cfg)
    timings["solve"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    eq = recover_primal(sf, sol, gm, data)
    timings["recover"] = time.perf_counter() - t0
    report = verify_equilibrium(eq, gm, data)
    eq.timings.update(timings)
    return eq, report


__all__ = [name for name in dir() if not name.startswith("_") and name not in ("annotations", "time")]
