"""Lagrangian expression language and symbolic variational calculus."""

from .analysis import (
    CanonicalForm,
    DerivativeInPotentialError,
    ExponentialWeight,
    canonical_form,
    check_k_condition,
    detect_homogeneity,
    exponential_weight,
    is_homogeneous_of_degree,
)
from .lagrangian import (
    DEFAULT_DIM,
    FieldDecl,
    LagrangianSpec,
    Metric,
    VarDerivs,
    check_spacetime_independence,
    evaluate,
    lower_node,
    momentum_derivative,
    parse_lagrangian,
    variational_derivative,
)
from .parser import IndexDisciplineError, ParseError, UnboundParameterError

__all__ = [
    "CanonicalForm",
    "DEFAULT_DIM",
    "DerivativeInPotentialError",
    "ExponentialWeight",
    "FieldDecl",
    "IndexDisciplineError",
    "LagrangianSpec",
    "Metric",
    "ParseError",
    "UnboundParameterError",
    "VarDerivs",
    "canonical_form",
    "check_k_condition",
    "check_spacetime_independence",
    "detect_homogeneity",
    "evaluate",
    "exponential_weight",
    "is_homogeneous_of_degree",
    "lower_node",
    "momentum_derivative",
    "parse_lagrangian",
    "variational_derivative",
]
