"""Numerical toolkit for approximate controllability of a stochastic heat
equation with a multivalued thermostat law.

The state lives in the sine eigenbasis of the Dirichlet Laplacian on
[0, pi].  The toolkit simulates mild solutions of the controlled inclusion
driven by a Clarke-subdifferential thermostat and an interval-valued
diffusion, synthesizes the eps-regularized Gramian control, iterates the
controlled update map to a per-path fixed point, and verifies by Monte
Carlo that the expected squared terminal miss vanishes as eps -> 0.
"""

from ._version import __version__
from .basis import (
    EigenBasis,
    GramianDiag,
    apply_semigroup,
    gramian_diagonal,
    resolvent_apply,
    to_grid,
    to_spectral,
)
from .config import ConfigError, ExperimentConfig
from .controller import (
    AprioriBound,
    ControlProblem,
    EnsembleResult,
    SweepResult,
    SweepRow,
    apriori_bound,
    compute_Z,
    control_energy,
    epsilon_sweep,
    fixed_point_solve,
    gamma_eps_apply,
    run_ensemble,
    synthesize_control,
    terminal_identity_residual,
)
from .inclusion import (
    IntervalDiffusion,
    PathRealization,
    TrajectoryBlowup,
    hvi_residual,
    integrate_path,
    mild_step,
    weak_residual,
)
from .noise import (
    IsometryReport,
    NoisePath,
    QWienerSpec,
    coarsen_noise,
    hs_norm_sq,
    ito_isometry_check,
    sample_noise_path,
    stochastic_convolution,
)
from .nonsmooth import (
    Interval,
    SELECTION_POLICIES,
    ThermostatPotential,
    clarke_dirderiv,
    clarke_interval,
    functional_F_dirderiv,
    phi_value,
    pointwise_selection,
)

__all__ = [
    "__version__",
    "EigenBasis",
    "GramianDiag",
    "apply_semigroup",
    "gramian_diagonal",
    "resolvent_apply",
    "to_grid",
    "to_spectral",
    "ConfigError",
    "ExperimentConfig",
    "AprioriBound",
    "ControlProblem",
    "EnsembleResult",
    "SweepResult",
    "SweepRow",
    "apriori_bound",
    "compute_Z",
    "control_energy",
    "epsilon_sweep",
    "fixed_point_solve",
    "gamma_eps_apply",
    "run_ensemble",
    "synthesize_control",
    "terminal_identity_residual",
    "IntervalDiffusion",
    "PathRealization",
    "TrajectoryBlowup",
    "hvi_residual",
    "integrate_path",
    "mild_step",
    "weak_residual",
    "IsometryReport",
    "NoisePath",
    "QWienerSpec",
    "coarsen_noise",
    "hs_norm_sq",
    "ito_isometry_check",
    "sample_noise_path",
    "stochastic_convolution",
    "Interval",
    "SELECTION_POLICIES",
    "ThermostatPotential",
    "clarke_dirderiv",
    "clarke_interval",
    "functional_F_dirderiv",
    "phi_value",
    "pointwise_selection",
]
