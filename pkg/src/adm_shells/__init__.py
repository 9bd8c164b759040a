"""Shell-supported deformations of asymptotically flat initial data.

Builds compactly supported solutions of the flat linearized constraints on
annuli, uses their moments to shift angular momentum and center of mass,
corrects the nonlinear constraint error with conformal and shift solves, and
measures the resulting ADM charges.
"""
from .adm_charges import (
    ChargeSet,
    angular_momentum,
    bowen_york_pi,
    center_of_mass,
    charges,
    energy,
    extrapolate,
    linear_momentum,
    rescale_data,
    schwarzschild_data,
)
from .config import RunConfig, load_config
from .constraints import (
    ConstraintResidual,
    InitialData,
    constraints,
    hamiltonian,
    momentum,
    residual_report,
    weighted_norm,
)
from .corrector import CorrectorSolution, RadialGrid3D, assemble_corrected, correct
from .moments import (
    MomentVector,
    Rotation,
    angular_moment,
    angular_moments,
    cm_moment,
    cm_moments,
    continuous_selection,
    fixed_point_target,
    rotate_pullback,
    target_angular,
    target_cm,
)
from .shell_fields import (
    RadialProfile,
    ShellTensorField,
    default_pair,
    eval_cartesian,
    make_sigma,
    make_sigma_cm,
    make_tau,
    parity_defect,
    scale_to_shell,
)
from .sphere_ops import PolynomialS2Function, SphereGrid

__version__ = "0.1.0"
