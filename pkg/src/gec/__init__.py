"""Generalized expectation consistency.

Inference for p(x) proportional to exp(-f1(x) - f2(x)) by alternating MAP or
MMSE estimation on each factor with diagonalized precision updates.
"""
from . import kernels
from .diag import Diagonalizer, apply_diagonalizer
from .engine import (GecConfig, GecSide, GecState, IterRecord, RunTrace, contraction_bound,
                     fixed_point_residuals, gec_half_step, run_first_order, run_gec, run_two_stage_map,
                     second_order_map)
from .errors import (AccuracyError, ConfigError, CurvatureError, DivergenceError, DomainError,
                     EquivalenceError, GecError, InvariantViolation, QuadratureError, SolverError)
from .oracles import (admm_reference, belief_moments, exact_gaussian_posterior, gec_admm_equivalence,
                      generic_map_solve, grid_mmse, grid_moments)
from .penalties import (LinearConstraintPenalty, Penalty, QuadraticPenalty, SeparablePenalty,
                        map_sensitivity_diag, mmse_cov_diag, mmse_mean, prox_map)
from .problems import (GlmInstance, ProblemSpec, SlrInstance, build_glm_penalties, build_slr_penalties,
                       generate_matrix, synthesize_data)
from .scalar import BernoulliGaussian, Gaussian, Laplace, LogCosh, Probit, make_prior
from .spectral import (SpectralModel, free_curvature, predicted_curvature, r_transform, replica_fixed_point,
                       stieltjes, stieltjes_inverse)

__version__ = "0.1.0"
