"""Decoherence functionals, consistency checks and framework analysis for
finite-dimensional closed quantum systems."""

from .errors import (
    BudgetExceeded,
    DimensionCapExceeded,
    InconsistentFamily,
    NoncommutingSlots,
    NullOutcome,
    QhistError,
    ScenarioFormatError,
)
from .linalg import (
    DEFAULT_TOLERANCES,
    DensityOperator,
    Tolerances,
    adjoint,
    expansion_coefficients,
    tensor,
    tensor_state,
    validate,
)
from .events import (
    Decomposition,
    Projector,
    basis_decomposition,
    coarse_grain,
    make_decomposition,
    spin_decomposition,
    spin_projector,
    trivial_decomposition,
)
from .histories import (
    ConsistencyReport,
    DecoherenceMatrix,
    Dynamics,
    Family,
    History,
    chain_operator,
    coarse_grain_slot,
    condition_on_outcome,
    decoherence_matrix,
    default_consistency_tol,
    family_on_grid,
    is_consistent,
    probabilities,
)
from .frameworks import (
    CompatibilityVerdict,
    EnumerationResult,
    IncompatibilityGraph,
    SingleFrameworkVerdict,
    TruthFunctionalResult,
    are_compatible,
    common_refinement,
    enumerate_frameworks,
    history_contained_in,
    single_framework_check,
    universal_truth_functional_exists,
)
from .models import (
    Scenario,
    build_cat,
    build_single_spin,
    build_stern_gerlach,
    cat_offdiagonal_suppression,
    cat_suppression_curve,
    measurement_framework_selection_report,
    spin_state,
)
from .scenario_io import dumps_scenario, load_scenario, save_scenario, scenario_from_dict

__version__ = "0.1.0"
