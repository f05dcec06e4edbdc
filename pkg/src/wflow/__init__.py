"""Randomly initialized gradient descent for Gaussian phase retrieval.

Measurement model and solver plus the analysis toolkit around them: the
two-dimensional state-evolution recursion, leave-one-out and random-sign
companion sequences, Monte Carlo concentration verifiers, and a CSV-producing
experiment harness.
"""

__version__ = "0.1.0"

from .model import (DesignEnsemble, Decomposition, Signal, SignFlipVector,
                    GAUSSIAN, RADEMACHER, decompose, flip_first_entry,
                    generate_design, measure, stream)
from .objective import (ResidualBreakdown, UnsupportedConventionError,
                        fluctuation, gradient, hessian, hessian_matvec, loss,
                        population_gradient, population_loss)
from .solver import (DivergenceError, RunConfig, TrajectoryRecord,
                     data_dependent_init, dist, random_init, run,
                     run_population)
from .state_evolution import (DegenerateStepError, SEPoint, SETrace,
                              StageTimes, apply_perturbations,
                              extract_perturbations, population_run,
                              population_step, stage_times)
from .auxiliary import (AuxiliaryBundle, DifferenceCurves, difference_curves,
                        incoherence_profile, loo_gradient, run_bundle)
from .verification import (ConcentrationReport, check_design_maxima,
                           check_hessian_concentration, check_local_smoothness,
                           check_polynomial_concentration, polynomial_deviation,
                           power_iteration, second_moment_deviation,
                           spectral_norm)
from .harness import ExperimentSpec, replay_sidecar, run_experiment
