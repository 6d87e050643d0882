"""Momentum-modified optimizers, their coefficient schedules, and an engine
that certifies, by exact coefficient mappings and seeded dual simulation,
that they instantiate one general accelerated-SGD update."""

from .backend import BACKEND
from .equivalence import (AccelCoefficients, LegacyForm, SingularMappingError,
                          TrajectoryDiff, compare_trajectories,
                          map_ademamix_to_simplified, map_legacy,
                          map_schedule_free, reconstruct_sf_average)
from .harness import (RunRecord, RunSpec, SweepSpec, batch_size_study, run,
                      spec_hash, sweep)
from .optimizers import (ALGORITHMS, NonFiniteUpdateError, OptimizerConfig,
                         OptimizerState, StepReport, eval_point, init_state,
                         query_point, step)
from .problems import (GradSample, Problem, finite_diff_check, full_gradient,
                       full_loss, logistic, mlp, noisy_least_squares,
                       quadratic, sample_gradient)
from .schedules import (AlphaSchedule, AveragingSchedule, LearningRateSchedule,
                        MomentumSchedule, alpha_at, averaging_coeff, lr_at,
                        momentum_at)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "AccelCoefficients", "AlphaSchedule", "AveragingSchedule",
    "BACKEND", "GradSample", "LearningRateSchedule", "LegacyForm",
    "MomentumSchedule", "NonFiniteUpdateError", "OptimizerConfig",
    "OptimizerState", "Problem", "RunRecord", "RunSpec", "SingularMappingError",
    "StepReport", "SweepSpec", "TrajectoryDiff", "alpha_at", "averaging_coeff",
    "batch_size_study", "compare_trajectories", "eval_point",
    "finite_diff_check", "full_gradient", "full_loss", "init_state",
    "logistic", "lr_at", "map_ademamix_to_simplified", "map_legacy",
    "map_schedule_free", "mlp", "momentum_at", "noisy_least_squares",
    "quadratic", "query_point", "reconstruct_sf_average", "run",
    "sample_gradient", "spec_hash", "step", "sweep",
]
