"""Penalization solver for HJB equations with convex gradient constraints.

Solves max{Lu - f, H(Du)} = 0 with Dirichlet data on box domains in one
and two dimensions, regularizes general convex constraints through a
Moreau-envelope / mollification / convexification ladder, certifies the
penalty and envelope properties it relies on, and cross-checks 1D
solutions against Monte Carlo estimates of the underlying singular
control problem.
"""

from .convex import (
    AffineStub,
    Ball,
    Convexified,
    ConvexError,
    Interval,
    Mollified,
    MoreauEnvelope,
    NormMinusConstant,
    Polytope,
    QuadraticForm,
    SupportDerived,
    build_regularized,
    check_envelope_properties,
    support_value,
)
from .diagnostics import (
    ComparisonError,
    comparison_test,
    convergence_study,
    free_boundary,
    regularity_scan,
    sandwich_check,
)
from .expr import EvalError, ExprError, Expression, ParseError, parse
from .mc import McEstimate, estimate_value, sigma_from_a, support_cost
from .operator import (
    AssemblyError,
    DiscreteOperator,
    EllipticProblem,
    GridFunction,
    ValidationError,
    apply_operator,
    assemble,
    gradient,
    read_grid_csv,
    validate,
    write_grid_csv,
)
from .penalty import PenaltyFamily
from .solver import (
    ContinuationSchedule,
    NewtonParams,
    SolveReport,
    SolverError,
    solve_constrained,
    solve_penalized,
    solve_unconstrained,
)

__version__ = "0.1.0"
