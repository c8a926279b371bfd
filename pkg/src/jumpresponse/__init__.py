"""Response prediction for stochastic dynamics under finite jump perturbations.

The package estimates how ensemble averages of a diffusion process react to
state jumps — applied once at a known time, drawn from a jump law, or arriving
at state/time-dependent random times — using only unperturbed trajectories,
and cross-checks those estimates against closed-form linear-model results and
direct Monte Carlo of the perturbed dynamics.
"""

from .curves import Component, Energy, Identity, Quadratic, ResponseCurve, TestFunction
from .ensemble import (
    EnsembleConfig,
    mc_det_jump_response,
    mc_random_jump_response,
    mc_random_time_response,
)
from .errors import (
    BlowupError,
    DimensionMismatchError,
    EstimatorError,
    JumpResponseError,
    NotSPDError,
    SingularMapError,
    ValidationError,
)
from .estimators import (
    accuracy_diagnostic,
    autocorrelation,
    convolve_response,
    det_jump_response,
    estimate_tcorr,
    random_jump_response,
    response_operator,
)
from .fileio import read_curve, read_trajectory, write_curve, write_trajectory
from .jump_integrals import (
    JumpIntegralSpec,
    jump_integral_discrete,
    jump_integral_gaussian,
    jump_integral_gaussian_bump,
    jump_integral_mixture,
    jump_integral_quadrature,
)
from .model import (
    AffineJumpMap,
    BumpMixture,
    CollisionJumpSpec,
    ConstantProfile,
    ConstantShape,
    DiscreteJumpLaw,
    GaussianBump,
    GaussianDensity,
    GaussianMixture,
    IntensityModel,
    Moments,
    PiecewiseLinearProfile,
    Trajectory,
    apply_jump,
    collision_transform,
    estimate_moments,
    eval_density,
    fit_gaussian_mixture,
    fit_quasi_gaussian,
    invert_jump,
    law_mean,
)
from .oracle import (
    OUParams,
    gaussian_product_moments,
    leading_order_gap,
    matrix_exponential,
    ou_exact_perturbed_mean,
    ou_mean_response_det,
    ou_mean_response_random,
    ou_response_operator,
    solve_lyapunov,
)
from .sde import (
    DoubleWell,
    JumpEvent,
    Lorenz96,
    OUModel,
    as_seedseq,
    euler_step,
    next_jump_time,
    ou_transition_kernel,
    sample_stationary,
    simulate_ou_exact,
    simulate_perturbed,
    simulate_unperturbed,
)

__version__ = "0.1.0"

__all__ = [
    "AffineJumpMap",
    "BlowupError",
    "BumpMixture",
    "CollisionJumpSpec",
    "Component",
    "ConstantProfile",
    "ConstantShape",
    "DimensionMismatchError",
    "DiscreteJumpLaw",
    "DoubleWell",
    "Energy",
    "EnsembleConfig",
    "EstimatorError",
    "GaussianBump",
    "GaussianDensity",
    "GaussianMixture",
    "Identity",
    "IntensityModel",
    "JumpEvent",
    "JumpIntegralSpec",
    "JumpResponseError",
    "Lorenz96",
    "Moments",
    "NotSPDError",
    "OUModel",
    "OUParams",
    "PiecewiseLinearProfile",
    "Quadratic",
    "ResponseCurve",
    "SingularMapError",
    "TestFunction",
    "Trajectory",
    "ValidationError",
    "accuracy_diagnostic",
    "apply_jump",
    "as_seedseq",
    "autocorrelation",
    "collision_transform",
    "convolve_response",
    "det_jump_response",
    "estimate_moments",
    "estimate_tcorr",
    "euler_step",
    "eval_density",
    "fit_gaussian_mixture",
    "fit_quasi_gaussian",
    "gaussian_product_moments",
    "invert_jump",
    "jump_integral_discrete",
    "jump_integral_gaussian",
    "jump_integral_gaussian_bump",
    "jump_integral_mixture",
    "jump_integral_quadrature",
    "law_mean",
    "leading_order_gap",
    "matrix_exponential",
    "mc_det_jump_response",
    "mc_random_jump_response",
    "mc_random_time_response",
    "next_jump_time",
    "ou_exact_perturbed_mean",
    "ou_mean_response_det",
    "ou_mean_response_random",
    "ou_response_operator",
    "ou_transition_kernel",
    "random_jump_response",
    "read_curve",
    "read_trajectory",
    "response_operator",
    "sample_stationary",
    "simulate_ou_exact",
    "simulate_perturbed",
    "simulate_unperturbed",
    "solve_lyapunov",
    "write_curve",
    "write_trajectory",
]
