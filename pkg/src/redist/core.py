"""Redistribution problems with needs and the closed-form rules defined on them.

A problem is an income profile ``y`` (any sign) and a need profile ``z``
(nonnegative) over ``n`` agents.  Every rule here maps it to an allocation
summing to aggregate income ``Y``.  All rules are linear, so everything is
computed directly in double precision.
"""
from __future__ import annotations

import enum
import functools
import json
import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

# Relative tolerance shared by budget, numerical and axiom comparisons.
REL_TOL = 1e-9


class ValidationError(ValueError):
    """Invalid input data (problem, rule parameters, dataset)."""


class BudgetError(ArithmeticError):
    """An allocation does not sum to aggregate income."""


def tolerance(*magnitudes, rel_tol: float = REL_TOL) -> float:
    """Absolute tolerance ``rel_tol * max(1, |m|...)`` for the given magnitudes."""
    scale = 1.0
    for m in magnitudes:
        a = np.max(np.abs(np.asarray(m, dtype=float))) if np.size(m) else 0.0
        scale = max(scale, float(a))
    return rel_tol * scale


def _as_vector(values, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.array(values, dtype=float))
    if arr.ndim != 1:
        raise ValidationError(f"{name}: expected a flat vector")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name}: all entries must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Problem:
    """Incomes and needs of a fixed set of agents."""

    incomes: np.ndarray
    needs: np.ndarray

    def __post_init__(self):
        y = _as_vector(self.incomes, "incomes")
        z = _as_vector(self.needs, "needs")
        if y.size == 0:
            raise ValidationError("incomes: at least one agent is required")
        if y.size != z.size:
            raise ValidationError(f"needs: expected {y.size} entries, got {z.size}")
        if np.any(z < 0):
            i = int(np.argmax(z < 0))
            raise ValidationError(f"needs: entry {i} is negative ({z[i]!r})")
        object.__setattr__(self, "incomes", y)
        object.__setattr__(self, "needs", z)

    @property
    def n(self) -> int:
        return int(self.incomes.size)

    # arrays are read-only, so the sums can be cached
    @functools.cached_property
    def total_income(self) -> float:
        return float(math.fsum(self.incomes))

    @functools.cached_property
    def total_need(self) -> float:
        return float(math.fsum(self.needs))

    @property
    def net_incomes(self) -> np.ndarray:
        return self.incomes - self.needs

    def __add__(self, other: "Problem") -> "Problem":
        if other.n != self.n:
            raise ValidationError(f"cannot add problems with {self.n} and {other.n} agents")
        return Problem(self.incomes + other.incomes, self.needs + other.needs)

    def __eq__(self, other):
        if not isinstance(other, Problem):
            return NotImplemented
        return np.array_equal(self.incomes, other.incomes) and np.array_equal(self.needs, other.needs)

    def __repr__(self):
        return f"Problem(incomes={self.incomes.tolist()}, needs={self.needs.tolist()})"

    def to_dict(self) -> dict:
        return {"incomes": self.incomes.tolist(), "needs": self.needs.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Problem":
        for key in ("incomes", "needs"):
            if key not in data:
                raise ValidationError(f"{key}: missing field")
            if not isinstance(data[key], list):
                raise ValidationError(f"{key}: expected a JSON array")
        try:
            return cls(data["incomes"], data["needs"])
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"incomes/needs: non-numeric entry ({exc})") from exc

    @classmethod
    def from_json(cls, text: str) -> "Problem":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"problem: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ValidationError("problem: expected a JSON object")
        return cls.from_dict(data)


class Focal(str, enum.Enum):
    """The three focal rules: laissez faire, full redistribution, need-adjusted."""

    L = "L"
    F = "F"
    A = "A"


class Family(str, enum.Enum):
    """One-parameter families of convex combinations of two focal rules.

    ``LF_FR`` mixes laissez faire with full redistribution, ``LF_NA`` laissez
    faire with need-adjusted, ``FR_NA`` full redistribution with need-adjusted.
    The first-named rule gets weight ``delta``.
    """

    LF_FR = "LF_FR"
    LF_NA = "LF_NA"
    FR_NA = "FR_NA"

    @property
    def corners(self) -> tuple[Focal, Focal]:
        """Focal rules at ``delta = 1`` and ``delta = 0``."""
        return {
            Family.LF_FR: (Focal.L, Focal.F),
            Family.LF_NA: (Focal.L, Focal.A),
            Family.FR_NA: (Focal.F, Focal.A),
        }[self]


@dataclass(frozen=True)
class LambdaParams:
    lambda1: float
    lambda2: float

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            v = getattr(self, name)
            try:
                v = float(v)
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"{name}: not a number ({v!r})") from exc
            if not math.isfinite(v):
                raise ValidationError(f"{name}: must be finite, got {v!r}")
            object.__setattr__(self, name, v)

    @property
    def lambda3(self) -> float:
        """Weight of the need-adjusted rule."""
        return 1.0 - self.lambda1 - self.lambda2

    @property
    def marginal_rate(self) -> float:
        return 1.0 - self.lambda1

    @property
    def need_subsidy_rate(self) -> float:
        return self.lambda3


@dataclass(frozen=True)
class DeltaRule:
    family: Family
    delta: float

    def __post_init__(self):
        try:
            family = Family(self.family)
        except ValueError as exc:
            raise ValidationError(f"family: unknown family {self.family!r}") from exc
        try:
            delta = float(self.delta)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"delta: not a number ({self.delta!r})") from exc
        if not (0.0 <= delta <= 1.0):
            raise ValidationError(f"delta: must lie in [0, 1], got {self.delta!r}")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "delta", delta)


RuleSpec = Union[Focal, LambdaParams, DeltaRule]
RuleFn = Callable[[Problem], np.ndarray]

FOCAL_LAMBDA = {
    Focal.L: LambdaParams(1.0, 0.0),
    Focal.F: LambdaParams(0.0, 1.0),
    Focal.A: LambdaParams(0.0, 0.0),
}


def allocate_laissez_faire(p: Problem) -> np.ndarray:
    return p.incomes.copy()


def allocate_full_redistribution(p: Problem) -> np.ndarray:
    return np.full(p.n, p.total_income / p.n)


def allocate_need_adjusted(p: Problem) -> np.ndarray:
    return p.needs + (p.total_income - p.total_need) / p.n


def allocate_lambda(p: Problem, lam: LambdaParams) -> np.ndarray:
    """``lambda1 * R^L + lambda2 * R^F + (1 - lambda1 - lambda2) * R^A``."""
    n, Y, Z = p.n, p.total_income, p.total_need
    return lam.lambda1 * p.incomes + lam.lambda3 * p.needs + (lam.lambda2 * Y + lam.lambda3 * (Y - Z)) / n


def delta_to_lambda(d: DeltaRule) -> LambdaParams:
    if d.family is Family.LF_FR:
        return LambdaParams(d.delta, 1.0 - d.delta)
    if d.family is Family.LF_NA:
        return LambdaParams(d.delta, 0.0)
    return LambdaParams(0.0, d.delta)


def allocate_delta(p: Problem, d: DeltaRule) -> np.ndarray:
    return allocate_lambda(p, delta_to_lambda(d))


def as_lambda(spec: RuleSpec) -> LambdaParams:
    """Coordinates of any named rule in the two-parameter family."""
    if isinstance(spec, LambdaParams):
        return spec
    if isinstance(spec, DeltaRule):
        return delta_to_lambda(spec)
    return FOCAL_LAMBDA[Focal(spec)]


def allocate(p: Problem, spec: RuleSpec) -> np.ndarray:
    if isinstance(spec, LambdaParams):
        return allocate_lambda(p, spec)
    if isinstance(spec, DeltaRule):
        return allocate_delta(p, spec)
    return {
        Focal.L: allocate_laissez_faire,
        Focal.F: allocate_full_redistribution,
        Focal.A: allocate_need_adjusted,
    }[Focal(spec)](p)


def rule_function(spec: RuleSpec) -> RuleFn:
    """Wrap a rule spec as a plain ``Problem -> allocation`` callable.

    The callable carries ``lambda_params`` so checkers can derive exact
    Lipschitz bounds for it.
    """

    def rule(p: Problem) -> np.ndarray:
        return allocate(p, spec)

    rule.lambda_params = as_lambda(spec)
    rule.spec = spec
    rule.__name__ = f"rule[{format_rule(spec)}]"
    return rule


def format_rule(spec: RuleSpec) -> str:
    if isinstance(spec, LambdaParams):
        return f"lambda:{spec.lambda1!r},{spec.lambda2!r}"
    if isinstance(spec, DeltaRule):
        return f"delta:{spec.family.value},{spec.delta!r}"
    return Focal(spec).value


def parse_rule(text: str) -> RuleSpec:
    """Parse ``L``/``F``/``A``, ``lambda:l1,l2`` or ``delta:FAMILY,d``."""
    text = text.strip()
    if text.upper() in Focal.__members__:
        return Focal(text.upper())
    kind, _, rest = text.partition(":")
    parts = [s.strip() for s in rest.split(",")]
    if kind == "lambda" and len(parts) == 2:
        return LambdaParams(*_floats(parts, "lambda"))
    if kind == "delta" and len(parts) == 2:
        return DeltaRule(parts[0].upper(), _floats(parts[1:], "delta")[0])
    raise ValidationError(f"rule: cannot parse {text!r} (use L, F, A, lambda:l1,l2 or delta:FAMILY,d)")


def _floats(parts, name):
    try:
        return [float(s) for s in parts]
    except ValueError as exc:
        raise ValidationError(f"{name}: non-numeric value in {','.join(parts)!r}") from exc


def check_budget(p: Problem, amounts, rel_tol: float = REL_TOL) -> None:
    """Raise ``BudgetError`` unless ``sum(amounts)`` equals ``Y`` within tolerance."""
    amounts = np.asarray(amounts, dtype=float)
    if amounts.shape != (p.n,):
        raise BudgetError(f"allocation has shape {amounts.shape}, expected ({p.n},)")
    total = math.fsum(amounts)
    Y = p.total_income
    tol = rel_tol * max(1.0, abs(Y))
    if not abs(total - Y) <= tol:
        raise BudgetError(f"allocation sums to {total!r}, aggregate income is {Y!r}")


def tax_lambda(p: Problem, lam: LambdaParams) -> np.ndarray:
    """Linear tax: marginal rate on income deviations minus need subsidy."""
    income_dev = p.incomes - p.total_income / p.n
    need_dev = p.needs - p.total_need / p.n
    return lam.marginal_rate * income_dev - lam.need_subsidy_rate * need_dev


def tax_of_rule(p: Problem, rule: RuleFn, rel_tol: float = REL_TOL) -> np.ndarray:
    """Taxes ``y - R(y, z)`` implied by an arbitrary budget-balanced rule."""
    amounts = np.asarray(rule(p), dtype=float)
    check_budget(p, amounts, rel_tol)
    return p.incomes - amounts


def tax_decomposition(p: Problem, lam: LambdaParams) -> dict:
    """The pieces of the linear tax system, as reported by the CLI."""
    return {
        "taxes": tax_lambda(p, lam).tolist(),
        "marginal_rate": lam.marginal_rate,
        "deduction": p.total_income / p.n,
        "need_subsidy_rate": lam.need_subsidy_rate,
        "mean_need": p.total_need / p.n,
    }
