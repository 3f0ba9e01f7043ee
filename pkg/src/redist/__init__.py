"""Redistribution rules for income problems with needs."""
from .core import (
    REL_TOL,
    BudgetError,
    DeltaRule,
    Family,
    Focal,
    LambdaParams,
    Problem,
    RuleSpec,
    ValidationError,
    allocate,
    allocate_delta,
    allocate_full_redistribution,
    allocate_lambda,
    allocate_laissez_faire,
    allocate_need_adjusted,
    delta_to_lambda,
    rule_function,
    tax_lambda,
    tax_of_rule,
)

__all__ = [
    "REL_TOL",
    "BudgetError",
    "DeltaRule",
    "Family",
    "Focal",
    "LambdaParams",
    "Problem",
    "RuleSpec",
    "ValidationError",
    "allocate",
    "allocate_delta",
    "allocate_full_redistribution",
    "allocate_lambda",
    "allocate_laissez_faire",
    "allocate_need_adjusted",
    "delta_to_lambda",
    "rule_function",
    "tax_lambda",
    "tax_of_rule",
]

__version__ = "0.1.0"
