"""Helmholtz conditions, Noether symmetries and Lagrangian reconstruction on jet spaces."""
from .jet import (
    CapacityError,
    Equality,
    JetError,
    JetSpace,
    SectionPolynomial,
    UnsupportedInputError,
    canonical,
    degree_in_order,
    equals,
    is_zero,
    order_of,
    pullback,
    to_text,
    total_derivative,
    weighted_partial,
)
from .varcalc import (
    CurrentDensity,
    HelmholtzTensor,
    LagrangeForm,
    ResonanceError,
    SmoothnessError,
    SourceForm,
    UnsupportedOrderError,
    anderson_duchamp_check,
    euler_lagrange,
    helmholtz,
    helmholtz_dependency_residuals,
    independent_helmholtz_count,
    is_locally_variational,
    reconstruct_lagrangian_ode,
    total_divergence,
    vainberg_tonti,
)
from .symmetry import (
    InternalConsistencyError,
    NoCurrentError,
    ProjectableVectorField,
    SpanError,
    characteristic,
    check_current,
    construct_current_ode,
    continuity_residual,
    ecs_residual,
    is_symmetry,
    lie_derivative_source,
    noether_decomposition,
    prolong,
    span_matrix,
    takens_report,
    transformed_ecs,
)

__version__ = "0.1.0"
