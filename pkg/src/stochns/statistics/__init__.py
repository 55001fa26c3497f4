"""Time-average estimation, moment identities, structure functions and scaling fits."""

from .accumulator import StatsAccumulator, batch_means_se
from .convergence import ConvergenceReport, measure_convergence_report
from .identities import (
    IdentityReport,
    enstrophy_identity_check,
    mc_versus_closed_form,
    ou_single_mode_moments,
    p_moment_identity_check,
    vorticity_moment_identity_check,
)
from .observables import MomentObserver, increment_moment, norm_observables, observe, transfer_term
from .structure import (
    ScalingFit,
    StructureFunctionTable,
    fractional_spectrum,
    rescaling_check,
    scaling_fit,
    separation_steps,
    structure_functions,
    synthetic_fractional_field,
    synthetic_fractional_sample,
)

__all__ = [
    "ConvergenceReport",
    "IdentityReport",
    "MomentObserver",
    "ScalingFit",
    "StatsAccumulator",
    "StructureFunctionTable",
    "batch_means_se",
    "enstrophy_identity_check",
    "fractional_spectrum",
    "increment_moment",
    "mc_versus_closed_form",
    "measure_convergence_report",
    "norm_observables",
    "observe",
    "ou_single_mode_moments",
    "p_moment_identity_check",
    "rescaling_check",
    "scaling_fit",
    "separation_steps",
    "structure_functions",
    "synthetic_fractional_field",
    "synthetic_fractional_sample",
    "transfer_term",
    "vorticity_moment_identity_check",
]
