"""Black-box axiom checkers for allocation rules.

Each checker evaluates one axiom on concrete problems and returns an
``AxiomVerdict``.  Passing is evidence, not proof: the checkers falsify.
Axioms whose hypothesis is not met by the supplied problem (the lower
bounds need ``y >= z``, order preservation needs uniform needs) pass
vacuously and say so.

``search_violation`` drives the checkers over seeded random problems to
produce explicit counterexamples for rules expected to fail.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from . import generators
from .core import REL_TOL, LambdaParams, Problem, RuleFn, ValidationError, tolerance

AXIOMS = (
    "equal_treatment",
    "continuity",
    "additivity",
    "zero_lb",
    "needs_lb",
    "net_average_lb",
    "order_preservation",
    "need_monotonicity",
    "strong_need_monotonicity",
)


@dataclass
class AxiomVerdict:
    axiom: str
    passed: bool
    witness: Optional[dict] = None
    tolerance_used: float = 0.0
    vacuous: bool = False
    note: str = ""

    def __post_init__(self):
        if self.passed != (self.witness is None):
            raise ValueError("a witness is required exactly when the verdict fails")

    def __bool__(self):
        return self.passed

    def to_dict(self) -> dict[str, Any]:
        return {
            "axiom": self.axiom,
            "passed": self.passed,
            "vacuous": self.vacuous,
            "witness": _jsonable(self.witness),
            "tolerance_used": self.tolerance_used,
            **({"note": self.note} if self.note else {}),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Problem):
        return obj.to_dict()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _ok(axiom, tol, vacuous=False, note=""):
    return AxiomVerdict(axiom, True, None, tol, vacuous, note)


def _fail(axiom, tol, **witness):
    return AxiomVerdict(axiom, False, witness, tol)


def _apply(rule: RuleFn, p: Problem) -> np.ndarray:
    out = np.asarray(rule(p), dtype=float)
    if out.shape != (p.n,):
        raise ValidationError(f"rule returned shape {out.shape} for a {p.n}-agent problem")
    return out


def check_equal_treatment(rule: RuleFn, p: Problem, rel_tol: float = REL_TOL) -> AxiomVerdict:
    x = _apply(rule, p)
    tol = tolerance(x, rel_tol=rel_tol)
    groups: dict[tuple[float, float], list[int]] = {}
    # exact equality of (income, need) defines the hypothesis
    for i, key in enumerate(zip(p.incomes.tolist(), p.needs.tolist())):
        groups.setdefault(key, []).append(i)
    for members in groups.values():
        if len(members) < 2:
            continue
        vals = x[members]
        lo, hi = int(np.argmin(vals)), int(np.argmax(vals))
        if vals[hi] - vals[lo] > tol:
            i, j = members[lo], members[hi]
            return _fail("equal_treatment", tol, problem=p, agents=[i, j], amounts=[x[i], x[j]])
    return _ok("equal_treatment", tol)


def check_additivity(rule: RuleFn, p: Problem, q: Problem, rel_tol: float = REL_TOL) -> AxiomVerdict:
    if p.n != q.n:
        raise ValidationError(f"additivity needs problems of equal size, got {p.n} and {q.n}")
    combined = _apply(rule, p + q)
    separate = _apply(rule, p) + _apply(rule, q)
    tol = tolerance(combined, separate, rel_tol=rel_tol)
    gap = np.abs(combined - separate)
    if np.max(gap) > tol:
        i = int(np.argmax(gap))
        return _fail(
            "additivity", tol, problems=[p, q], agent=i,
            combined=combined[i], separate_sum=separate[i],
        )
    return _ok("additivity", tol)


def continuity_bound(lam: LambdaParams, n: int) -> float:
    """Sup-norm Lipschitz constant used for lambda-rules."""
    return max(1.0, abs(lam.lambda1) + abs(lam.lambda2) + abs(lam.lambda3)) * n


def check_continuity_sampled(
    rule: RuleFn,
    p: Problem,
    num_samples: int = 100,
    epsilon: float = 1e-6,
    lipschitz: Optional[float] = None,
    seed: int = 0,
    rel_tol: float = REL_TOL,
) -> AxiomVerdict:
    """Falsify continuity by random perturbations of size ``epsilon``.

    Fails if some perturbation ``(y + eps*u, max(z + eps*v, 0))`` with
    ``|u|, |v| <= 1`` moves the allocation by more than ``lipschitz * eps``
    in the sup norm.  The bound defaults to the exact one for lambda-rules.
    """
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    if lipschitz is None:
        lam = getattr(rule, "lambda_params", None)
        if lam is None:
            raise ValidationError("lipschitz bound required for rules outside the lambda family")
        lipschitz = continuity_bound(lam, p.n)
    rng = np.random.default_rng(seed)
    base = _apply(rule, p)
    for _ in range(num_samples):
        u = rng.uniform(-1.0, 1.0, size=p.n)
        v = rng.uniform(-1.0, 1.0, size=p.n)
        q = Problem(p.incomes + epsilon * u, np.maximum(p.needs + epsilon * v, 0.0))
        moved = _apply(rule, q)
        gap = float(np.max(np.abs(moved - base)))
        bound = lipschitz * epsilon * (1.0 + rel_tol) + tolerance(base, moved, rel_tol=rel_tol)
        if gap > bound:
            return _fail(
                "continuity", bound, problem=p, perturbed=q, sup_change=gap,
                lipschitz=lipschitz, epsilon=epsilon,
            )
    return _ok("continuity", lipschitz * epsilon)


def _premise_holds(p: Problem) -> bool:
    return bool(np.all(p.incomes >= p.needs))


def _lower_bound(axiom, rule, p, bound_of, rel_tol):
    if not _premise_holds(p):
        return _ok(axiom, 0.0, vacuous=True, note="premise y >= z not met")
    x = _apply(rule, p)
    bound = bound_of(p)
    tol = tolerance(x, bound, rel_tol=rel_tol)
    short = bound - x
    if np.max(short) > tol:
        i = int(np.argmax(short))
        return _fail(axiom, tol, problem=p, agent=i, amount=x[i], lower_bound=float(np.broadcast_to(bound, x.shape)[i]))
    return _ok(axiom, tol)


def check_zero_lb(rule: RuleFn, p: Problem, rel_tol: float = REL_TOL) -> AxiomVerdict:
    return _lower_bound("zero_lb", rule, p, lambda q: np.zeros(q.n), rel_tol)


def check_needs_lb(rule: RuleFn, p: Problem, rel_tol: float = REL_TOL) -> AxiomVerdict:
    return _lower_bound("needs_lb", rule, p, lambda q: q.needs, rel_tol)


def check_net_average_lb(rule: RuleFn, p: Problem, rel_tol: float = REL_TOL) -> AxiomVerdict:
    return _lower_bound(
        "net_average_lb", rule, p,
        lambda q: np.full(q.n, (q.total_income - q.total_need) / q.n), rel_tol,
    )


def check_order_preservation_uniform_needs(rule: RuleFn, p: Problem, rel_tol: float = REL_TOL) -> AxiomVerdict:
    axiom = "order_preservation"
    if not np.all(p.needs == p.needs[0]):
        return _ok(axiom, 0.0, vacuous=True, note="needs are not uniform")
    x = _apply(rule, p)
    tol = tolerance(x, rel_tol=rel_tol)
    order = np.argsort(p.incomes, kind="stable")
    # walk incomes upward: each level's smallest amount must not fall below
    # the largest amount seen at any lower-or-equal income level
    best_idx = None
    k = 0
    while k < p.n:
        level = p.incomes[order[k]]
        end = k
        while end < p.n and p.incomes[order[end]] == level:
            end += 1
        members = order[k:end]
        hi = members[int(np.argmax(x[members]))]
        lo = members[int(np.argmin(x[members]))]
        if x[hi] - x[lo] > tol:
            return _fail(axiom, tol, problem=p, richer=int(lo), poorer=int(hi), amounts=[x[lo], x[hi]])
        if best_idx is not None and x[best_idx] - x[lo] > tol:
            return _fail(axiom, tol, problem=p, richer=int(lo), poorer=int(best_idx), amounts=[x[lo], x[best_idx]])
        if best_idx is None or x[hi] > x[best_idx]:
            best_idx = hi
        k = end
    return _ok(axiom, tol)


def _raise_need(p: Problem, i: int, dz: float) -> Problem:
    if not dz > 0:
        raise ValidationError("dz must be positive")
    if not 0 <= i < p.n:
        raise ValidationError(f"agent index {i} out of range for {p.n} agents")
    z = p.needs.copy()
    z[i] += dz
    return Problem(p.incomes, z)


def check_need_monotonicity(rule: RuleFn, p: Problem, i: int, dz: float, rel_tol: float = REL_TOL) -> AxiomVerdict:
    up = _raise_need(p, i, dz)
    before, after = _apply(rule, p), _apply(rule, up)
    tol = tolerance(before, after, rel_tol=rel_tol)
    if before[i] - after[i] > tol:
        return _fail("need_monotonicity", tol, problem=p, raised=up, agent=i, before=before[i], after=after[i])
    return _ok("need_monotonicity", tol)


def check_strong_need_monotonicity(
    rule: RuleFn, p: Problem, i: int, dz: float, net_at: str = "higher", rel_tol: float = REL_TOL
) -> AxiomVerdict:
    """Need monotonicity plus: nobody with net income at most ``i``'s loses.

    ``net_at`` picks the need profile used to compare net incomes:
    ``"higher"`` (after raising ``i``'s need) or ``"lower"`` (before).
    """
    axiom = "strong_need_monotonicity"
    if net_at not in ("higher", "lower"):
        raise ValidationError("net_at must be 'higher' or 'lower'")
    up = _raise_need(p, i, dz)
    before, after = _apply(rule, p), _apply(rule, up)
    tol = tolerance(before, after, rel_tol=rel_tol)
    if before[i] - after[i] > tol:
        return _fail(axiom, tol, problem=p, raised=up, agent=i, before=before[i], after=after[i])
    net = (up if net_at == "higher" else p).net_incomes
    poorer = np.flatnonzero(net <= net[i])
    poorer = poorer[poorer != i]
    if poorer.size:
        loss = before[poorer] - after[poorer]
        k = int(np.argmax(loss))
        if loss[k] > tol:
            j = int(poorer[k])
            return _fail(
                axiom, tol, problem=p, raised=up, agent=i, affected=j,
                before=before[j], after=after[j],
            )
    return _ok(axiom, tol)


def identify_lambda(rule: RuleFn, n: int) -> LambdaParams:
    """Recover the coordinates of an additive, symmetric rule from two probes.

    ``alpha`` is what agent 1 keeps of a unit income when nobody has needs,
    ``beta`` what it keeps when that unit is also its need.
    """
    if n < 2:
        raise ValidationError("identify_lambda needs at least two agents")
    unit = np.zeros(n)
    unit[0] = 1.0
    alpha = float(_apply(rule, Problem(unit, np.zeros(n)))[0])
    beta = float(_apply(rule, Problem(unit, unit))[0])
    return LambdaParams((n * alpha - 1.0) / (n - 1), n * (1.0 - beta) / (n - 1))


# --- randomized violation search -------------------------------------------


@dataclass
class SearchResult:
    axiom: str
    found: bool
    verdict: Optional[AxiomVerdict] = None
    tries: int = 0
    seed: int = 0
    counts: dict = field(default_factory=dict)


def check_on_random(axiom: str, rule: RuleFn, rng: np.random.Generator, n: int, rel_tol: float = REL_TOL) -> AxiomVerdict:
    """One randomized check of ``axiom``, drawing whatever inputs it needs."""
    if axiom in ("zero_lb", "needs_lb", "net_average_lb"):
        p = generators.dominated_problem(rng, n)
        return CHECKERS[axiom](rule, p, rel_tol=rel_tol)
    if axiom == "order_preservation":
        p = generators.random_problem(rng, n)
        p = Problem(p.incomes, np.full(n, p.needs[0]))
        return check_order_preservation_uniform_needs(rule, p, rel_tol=rel_tol)
    if axiom == "equal_treatment":
        p = generators.mixed_problem(rng, n)
        return check_equal_treatment(rule, p, rel_tol=rel_tol)
    if axiom == "additivity":
        return check_additivity(rule, generators.random_problem(rng, n), generators.random_problem(rng, n), rel_tol=rel_tol)
    if axiom == "continuity":
        p = generators.random_problem(rng, n)
        return check_continuity_sampled(rule, p, num_samples=10, seed=int(rng.integers(2**31)), rel_tol=rel_tol)
    if axiom in ("need_monotonicity", "strong_need_monotonicity"):
        p = generators.random_problem(rng, n)
        i = int(rng.integers(n))
        dz = float(rng.uniform(0.1, 50.0))
        return CHECKERS[axiom](rule, p, i, dz, rel_tol=rel_tol)
    raise ValidationError(f"unknown axiom {axiom!r}; expected one of {', '.join(AXIOMS)}")


def search_violation(
    axiom: str,
    rule: RuleFn,
    seed: int = 0,
    iterations: int = 500,
    sizes=(2, 3, 4, 5),
    rel_tol: float = REL_TOL,
) -> SearchResult:
    """Seeded random search for a counterexample; identical seeds give identical witnesses."""
    rng = np.random.default_rng(seed)
    vacuous = 0
    for t in range(1, iterations + 1):
        n = int(rng.choice(sizes))
        verdict = check_on_random(axiom, rule, rng, n, rel_tol=rel_tol)
        vacuous += verdict.vacuous
        if not verdict.passed:
            return SearchResult(axiom, True, verdict, t, seed, {"vacuous": vacuous})
    return SearchResult(axiom, False, None, iterations, seed, {"vacuous": vacuous})


CHECKERS = {
    "equal_treatment": check_equal_treatment,
    "continuity": check_continuity_sampled,
    "additivity": check_additivity,
    "zero_lb": check_zero_lb,
    "needs_lb": check_needs_lb,
    "net_average_lb": check_net_average_lb,
    "order_preservation": check_order_preservation_uniform_needs,
    "need_monotonicity": check_need_monotonicity,
    "strong_need_monotonicity": check_strong_need_monotonicity,
}
