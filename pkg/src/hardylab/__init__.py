"""hardylab: numerical verification of Hardy-type lower bounds for singular
magnetic Schrödinger operators on truncated grids."""

from .eigensolve import EigenResult, Pencil, convergence_study, lowest_eigenvalues, smallest_eigenpair
from .forms import (
    ChannelSpec,
    ConfiningSpec,
    DiagonalWeight,
    FormMatrix,
    GroundStateAnsatz,
    angular_spectrum,
    assemble_ab_channel,
    assemble_confining,
    assemble_dirichlet_form,
    assemble_weight,
    flux_distance_sq,
    ground_state,
    landau_levels,
)
from .grids import (
    PlaneGrid,
    Quadrature,
    RadialGrid,
    SignedGrid,
    make_plane_grid,
    make_radial_grid,
    make_signed_grid,
    quadrature_for,
)
from .hardy import (
    HardyReport,
    SharpnessSequence,
    hardy_baselines,
    landau_fiber_levels,
    sharpness_sequence,
    verify_ab,
    verify_confining,
)
from .identities import (
    AnsatzFunction,
    MagneticGradient,
    ansatz_potential,
    closed_form_ansatz,
    commutator_identity_residual,
    diamagnetic_margin,
    substitution_identity_residual,
    weyl_residual,
)

__version__ = "0.1.0"
