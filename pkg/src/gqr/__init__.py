"""Group-Lasso quantile regression with certified solutions and simulation-based tuning."""

from .design import DesignError, GroupPartition, GroupedDesign, build_design, rescale_to_identity, sqrt_psd
from .objective import (CheckLoss, PenaltySpec, check_loss, group_soft_threshold, knight_decomposition,
                        objective_value, prox_check)
from .solver import (QuantileFit, SocpProblem, SolverOptions, dual_certificate, fit, fit_l1,
                     fit_unpenalized, lambda_max)
from .tuning import PivotConfig, TuningResult, pivot_draw, select_lambda, theta_schedule
from .additive import AdditiveModel, BasisSpec, build_basis, expand_design, fit_additive, l2_error, predict_g
from .simulation import (ExperimentReport, Model1Config, Model2Config, cone_diagnostic, gen_model1,
                         gen_model2, metrics, run_experiment)
from .diagnostics import ConeSampleConfig, estimate_restricted_eigs, omega0_check, theoretical_lambda

__version__ = "0.1.0"
