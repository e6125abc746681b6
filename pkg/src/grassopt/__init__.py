"""Inexact Riemannian gradient descent on the Grassmann manifold, applied to
channelized Gaussian discrimination with Jeffrey's divergence."""

from .errors import (
    ConfigError, ContractViolation, CovarianceError, DimensionError, DivergedError,
    GrassoptError, InsufficientSamplesError, LineSearchStall, NumericalError, OracleFailure,
    RunError, SingularChannelError,
)
from .grassmann import (
    GrassmannPoint, TangentVector, exp_map, inner, norm, principal_angles, project_tangent,
    random_point, random_tangent, subspace_distance,
)
from .objective import (
    ClassStats, Objective, ObjectiveConfig, channelize, jeffreys, jeffreys_grad_ambient,
    neg_objective, rayleigh_objective,
)
from .oracle import AdditiveSchedule, Exact, PerturbPolicy, RelativeBounded, SurrogateStats
from .optimizer import (
    Constant, CorollaryI, CorollaryII, FixedStepConfig, LineSearchConfig, Trace,
    backtrack_bound, min_grad_so_far, rigd_ls_run, rigd_run,
)
from .simulate import GRID_PRESETS, GridSpec, estimated_stats, sample_images, shrink, true_stats
from .evaluate import auc, fd_gradient_check, fukunaga_koontz, log_likelihood_ratio, rate_fit

__version__ = "0.1.0"
