"""cstarmod: a numerical laboratory for unbounded operators on Hilbert
C*-modules over commutative C(X).

Modules, states and localizations are finite models: C(X) elements are
nodal samples, fibers are finite-dimensional (weighted) spaces, and the
interval operator -i d/dx enters through an exact summation-by-parts
discretization whose boundary form makes the extension theory structural.
"""

from .boundary import (
    BreakpointData,
    LambdaClassification,
    LambdaSpec,
    Region,
    classify_lambda,
    continuous_lambda,
    jump_at_left_end,
    oscillatory_left_end,
    removable_jump_left_end,
    singular_patch,
)
from .fibers import FiberOperator, FiberSpace, IntervalFiberModel, hat_pair
from .localization import (
    CoreReport,
    LocalOperator,
    LocalizationResult,
    check_core,
    localize_module,
    localize_operator,
)
from .module import (
    GraphModule,
    ModuleShape,
    ModuleVector,
    Submodule,
    graph_inner_product,
    inner_product,
    module_norm,
    submodule_distance,
)
from .operators import (
    BoundaryField,
    ConstantField,
    DeficiencyData,
    DiagonalField,
    FunctionSymbol,
    HatField,
    MultiplicationField,
    OperatorField,
    bounded_transform,
    build_boundary_field,
    build_dirac_interval,
    build_extension,
    build_hat,
    deficiency_data,
    functional_calculus,
    resolvent,
    resolvent_norm,
)
from .perturbation import (
    PerturbationProblem,
    SumProblem,
    build_sum_operator,
    build_sum_problem,
    graph_comparison_check,
    hermite_pair,
    kato_rellich_check,
    module_sum_check,
    relative_bound_estimate,
    strong_vanishing_Rn,
    sum_selfadjoint_regular_check,
    wust_check,
)
from .regularity import (
    RegularityVerdict,
    Witness,
    check_range_dense,
    classify_boundary_operator,
    defect_indices,
    finitely_generated_commutative_check,
    graph_embedding_adjointability,
    grid_pure_states,
    local_global_check,
    measure_localization_analysis,
)
from .separation import (
    ConvexHull,
    NoCertificateError,
    SeparationCertificate,
    SeparationProblem,
    conjecture_search,
    convex_inequality_check,
    find_separating_state,
    flattening_combination,
    hat_function,
    pure_state_counterexample,
    resolving_grid,
)
from .space import (
    AlgebraElement,
    BaseSpace,
    HypothesisError,
    PartitionOfUnity,
    StateSpec,
    a_convex_combine,
    evaluate_state,
    is_positive,
    verify_partition_of_unity,
)

__version__ = "0.1.0"
