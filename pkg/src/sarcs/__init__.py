"""Critical compression rate of constrained reconstruction for
pausing-autoregressive time series.

Two independent routes to the same number: a Monte Carlo fixed point over
the scalar order parameters (``solve_alpha_c``) and direct reconstruction
experiments with row deletion plus extrapolation in 1/n
(``estimate_alpha_c_at_n``, ``extrapolate``).  ``baseline_alpha_c`` gives
the closed-form memoryless reference.
"""

from .chain import (ChainProblem, LimitChainProblem, at_metric,
                    certificate_gap, count_blocks, count_blocks_segmented,
                    limit_certificate_gap, solve_chain, solve_limit_chain,
                    tv_prox)
from .exceptions import (ConditioningError, ExperimentError, ParameterError,
                         SchemaError, ShapeError, SolverFailure, TrialAborted)
from .experiment import (ExtrapolationFit, LevelEstimate, TrialRecord,
                         estimate_alpha_c_at_n, extrapolate, level_from_pcs,
                         run_trial)
from .recon import (Certificate, ReconstructionProblem, ReconstructionResult,
                    RowDeletionSolver, SolverSettings, WarmState,
                    cumulative_transform, diff_objective,
                    difference_transform, recovery_success, solve_l1_diff,
                    solve_measurements)
from .replica import (McMoments, ReplicaConfig, ReplicaFixedPoint,
                      StabilityReport, baseline_alpha_c, baseline_moments,
                      mc_moments, solve_alpha_c, stability_report)
from .sar import (SarParams, generate_signal, generate_signal_parts,
                  increment_density, pause_mask, rng_for, second_moment)

__version__ = "0.1.0"

__all__ = [
    "ChainProblem", "LimitChainProblem", "at_metric", "certificate_gap",
    "count_blocks", "count_blocks_segmented", "limit_certificate_gap",
    "solve_chain", "solve_limit_chain", "tv_prox",
    "ConditioningError", "ExperimentError", "ParameterError", "SchemaError",
    "ShapeError", "SolverFailure", "TrialAborted",
    "ExtrapolationFit", "LevelEstimate", "TrialRecord",
    "estimate_alpha_c_at_n", "extrapolate", "level_from_pcs", "run_trial",
    "Certificate", "ReconstructionProblem", "ReconstructionResult",
    "RowDeletionSolver", "SolverSettings", "WarmState",
    "cumulative_transform", "diff_objective", "difference_transform",
    "recovery_success", "solve_l1_diff", "solve_measurements",
    "McMoments", "ReplicaConfig", "ReplicaFixedPoint", "StabilityReport",
    "baseline_alpha_c", "baseline_moments", "mc_moments", "solve_alpha_c",
    "stability_report",
    "SarParams", "generate_signal", "generate_signal_parts",
    "increment_density", "pause_mask", "rng_for", "second_moment",
    "__version__",
]
