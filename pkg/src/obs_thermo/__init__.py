"""Observability decomposition and thermodynamic accounting for bilinear quantum control."""

from .dynamics import (
    BilinearControlSystem,
    ControlSchedule,
    ThermoTrajectory,
    evolve,
    gaussian_schedule,
    propagate,
    record_thermo,
)
from .errors import (
    NotHermitianError,
    NumericalError,
    ObsThermoError,
    OptimizerDivergedError,
    PSDViolationError,
    RankDeficientError,
    ValidationError,
)
from .grape import (
    OptimizationConfig,
    OptimizationResult,
    adjoint_gradient,
    finite_diff_gradient,
    grape_optimize,
)
from .lie import (
    ClosureReport,
    OperatorBasis,
    close_algebra,
    gram_schmidt,
    is_ideal,
    observability_space,
    project_onto,
    traceless_part,
)
from .models import CentralSpinSpec, all_up_state, build_central_spin, dim_formula
from .observability import (
    DensityState,
    HamiltonianSplit,
    StateDecomposition,
    Stationarity,
    decompose_state,
    measured_output,
    split_hamiltonian,
    stationarity_check,
)
from .operators import anticommutator, commutator, embed_site, expm_unitary, herm_eig, hs_inner
from .thermo import (
    clausius_entropy_rate,
    dissipation_operator,
    energies,
    entropy_rate,
    fisher_pure,
    generalized_entropy,
    heat_rate,
    heat_rate_fisher,
    sld_fisher_oracle,
)

__version__ = "0.1.0"
