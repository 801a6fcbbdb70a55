"""Exact variational calculus on graded jet spaces.

Polynomial field theories with even and odd variables: Euler-Lagrange
operators, linear jet operators and their duals, Noether identities, BRST
nilpotency, and Koszul-Tate boundary complexes, all over exact rational
arithmetic.  Theories are defined in a small text format parsed by
``parse_theory``; the ``nkt`` command line exposes the standard checks.
"""

from .config import DEFAULT_MAX_JET_ORDER, max_jet_order
from .derivations import (
    FirstVariationalReport,
    GeneralizedVectorField,
    NilpotencyReport,
    check_nilpotent,
    check_variational,
    contract_with_EL,
    first_variational_residual,
    lie_derivative_density,
    prolong_apply,
)
from .errors import JetOrderError, NktError, ParseError, SemanticError, SourceSpan
from .graded_poly import (
    Density,
    GradedPolynomial,
    JetVariable,
    Kind,
    Parity,
    Scalar,
    VariableId,
    antifield_of,
    base_of_antifield,
    render_polynomial,
)
from .jet_calculus import (
    TrivialityReport,
    VariationalDerivatives,
    euler_lagrange,
    is_variationally_trivial,
    total_derivative,
    total_derivative_multi,
)
from .koszul_tate import (
    KoszulTateContext,
    ReducibilityReport,
    ReductionCertificate,
    WeakZeroReport,
    certificate_expansion,
    check_reducibility_chain,
    check_weakly_zero,
    extend_with_operator,
    kt_apply,
    kt_context,
    kt_nilpotency_residuals,
    operator_boundary,
)
from .multiindex import EMPTY, MultiIndex, mi_enumerate, split_weight
from .noether import (
    ROLE_GAUGE,
    ROLE_NOETHER,
    ROLE_STAGE,
    LinearJetOperator,
    NoetherReport,
    NonVariationalError,
    apply_to_sections,
    check_noether_identity,
    compose,
    derive_gauge_from_noether,
    derive_noether_from_gauge,
    eta,
    gauge_vector_field,
    linearize_in_ghosts,
    noether_residuals,
    trivial_gauge_symmetry,
)
from .theory_dsl import (
    ConstantTensor,
    Theory,
    VarDecl,
    parse_expression,
    parse_theory,
    render_theory,
    resolve_component,
    validate_theory,
)

__all__ = [
    "DEFAULT_MAX_JET_ORDER",
    "max_jet_order",
    "FirstVariationalReport",
    "GeneralizedVectorField",
    "NilpotencyReport",
    "check_nilpotent",
    "check_variational",
    "contract_with_EL",
    "first_variational_residual",
    "lie_derivative_density",
    "prolong_apply",
    "JetOrderError",
    "NktError",
    "ParseError",
    "SemanticError",
    "SourceSpan",
    "Density",
    "GradedPolynomial",
    "JetVariable",
    "Kind",
    "Parity",
    "Scalar",
    "VariableId",
    "antifield_of",
    "base_of_antifield",
    "render_polynomial",
    "TrivialityReport",
    "VariationalDerivatives",
    "euler_lagrange",
    "is_variationally_trivial",
    "total_derivative",
    "total_derivative_multi",
    "KoszulTateContext",
    "ReducibilityReport",
    "ReductionCertificate",
    "WeakZeroReport",
    "certificate_expansion",
    "check_reducibility_chain",
    "check_weakly_zero",
    "extend_with_operator",
    "kt_apply",
    "kt_context",
    "kt_nilpotency_residuals",
    "operator_boundary",
    "EMPTY",
    "MultiIndex",
    "mi_enumerate",
    "split_weight",
    "ROLE_GAUGE",
    "ROLE_NOETHER",
    "ROLE_STAGE",
    "LinearJetOperator",
    "NoetherReport",
    "NonVariationalError",
    "apply_to_sections",
    "check_noether_identity",
    "compose",
    "derive_gauge_from_noether",
    "derive_noether_from_gauge",
    "eta",
    "gauge_vector_field",
    "linearize_in_ghosts",
    "noether_residuals",
    "trivial_gauge_symmetry",
    "ConstantTensor",
    "Theory",
    "VarDecl",
    "parse_expression",
    "parse_theory",
    "render_theory",
    "resolve_component",
    "validate_theory",
]
