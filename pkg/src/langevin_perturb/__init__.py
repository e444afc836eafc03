"""Perturbed underdamped Langevin samplers.

Skew-symmetric drift perturbations of underdamped Langevin dynamics that
preserve the invariant measure, with exact asymptotic-variance analysis for
Gaussian targets, constructive optimal-perturbation design, spectral
diagnostics, splitting integrators, and a diffusion-bridge experiment driver.
"""

from .analysis import (
    PerturbationConfig,
    QuadraticObservable,
    ThetaDerivatives,
    a_matrix,
    asym_variance,
    asym_variance_general,
    basic_inequalities,
    invariance_commuting_check,
    limiting_variance_optimal,
    theta_hessian_linear,
    theta_hessian_quadratic,
    theta_linear_closed,
    theta_surface,
)
from .design import (
    DesignResult,
    RationalIndependenceReport,
    optimal_j_general,
    optimal_j_unit,
    rational_independence_report,
    zero_diagonal_transform,
)
from .dynamics import (
    MultiStream,
    NumericalDivergenceError,
    PhaseState,
    RngStream,
    SimulationResult,
    baoab_step,
    ou_exact_step,
    ou_step,
    overdamped_pair,
    perturbed_baoab_step,
    rk4_flow,
    simulate,
)
from .spectra import (
    SpectrumSet,
    critical_damping,
    drift_spectrum,
    drift_spectrum_closed,
    generator_spectrum,
    spectral_bound,
)
from .targets import (
    BridgeTarget,
    DoubleWell,
    GaussianTarget,
    PotentialTarget,
    bridge_build,
    bridge_precision,
    psi_tilde,
)

__version__ = "0.1.0"

__all__ = [
    "PerturbationConfig",
    "QuadraticObservable",
    "ThetaDerivatives",
    "a_matrix",
    "asym_variance",
    "asym_variance_general",
    "basic_inequalities",
    "invariance_commuting_check",
    "limiting_variance_optimal",
    "theta_hessian_linear",
    "theta_hessian_quadratic",
    "theta_linear_closed",
    "theta_surface",
    "DesignResult",
    "RationalIndependenceReport",
    "optimal_j_general",
    "optimal_j_unit",
    "rational_independence_report",
    "zero_diagonal_transform",
    "MultiStream",
    "NumericalDivergenceError",
    "PhaseState",
    "RngStream",
    "SimulationResult",
    "baoab_step",
    "ou_exact_step",
    "ou_step",
    "overdamped_pair",
    "perturbed_baoab_step",
    "rk4_flow",
    "simulate",
    "SpectrumSet",
    "critical_damping",
    "drift_spectrum",
    "drift_spectrum_closed",
    "generator_spectrum",
    "spectral_bound",
    "BridgeTarget",
    "DoubleWell",
    "GaussianTarget",
    "PotentialTarget",
    "bridge_build",
    "bridge_precision",
    "psi_tilde",
]
