"""Majority voting over the one-parameter rule families.

Each family's winner is decided by how agents split around a threshold:
mean income for ``LF_FR``, mean net income for ``LF_NA``, mean need for
``FR_NA``.  A brute-force grid tournament serves as an independent check,
and ``search_cycle`` looks for Condorcet cycles in the two-parameter family.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import generators
from .core import (
    REL_TOL,
    DeltaRule,
    Family,
    Focal,
    LambdaParams,
    Problem,
    RuleSpec,
    allocate,
    allocate_lambda,
    tolerance,
)


@dataclass(frozen=True)
class PartitionCounts:
    below: int
    above: int
    at: int

    @property
    def n(self) -> int:
        return self.below + self.above + self.at

    def to_dict(self):
        return {"below": self.below, "above": self.above, "at": self.at}


class OutcomeKind(str, enum.Enum):
    UNIQUE_CORNER = "UniqueCorner"
    ALL_TIE = "AllTie"


@dataclass(frozen=True)
class MajorityOutcome:
    kind: OutcomeKind
    family: Family
    delta: Optional[float] = None  # set for UniqueCorner only

    @property
    def rule(self) -> Optional[Focal]:
        if self.delta is None:
            return None
        at_one, at_zero = self.family.corners
        return at_one if self.delta == 1.0 else at_zero

    def winners_on_grid(self, grid: np.ndarray) -> set[float]:
        if self.kind is OutcomeKind.ALL_TIE:
            return {float(d) for d in grid}
        return {self.delta}

    def to_dict(self):
        if self.kind is OutcomeKind.ALL_TIE:
            return {"kind": self.kind.value, "family": self.family.value, "winners": [0.0, 1.0]}
        return {
            "kind": self.kind.value,
            "family": self.family.value,
            "delta": self.delta,
            "rule": self.rule.value,
        }


def _partition(exact: list[Fraction]) -> PartitionCounts:
    # compare n * v_i against sum(v) in exact rational arithmetic so agents
    # exactly at the mean land in the "at" group whatever the rounding of sum/n
    total = sum(exact)
    n = len(exact)
    below = sum(1 for v in exact if n * v < total)
    above = sum(1 for v in exact if n * v > total)
    return PartitionCounts(below, above, n - below - above)


def partition_by_income(p: Problem) -> PartitionCounts:
    return _partition([Fraction(v) for v in p.incomes.tolist()])


def partition_by_net_income(p: Problem) -> PartitionCounts:
    return _partition([Fraction(y) - Fraction(z) for y, z in zip(p.incomes.tolist(), p.needs.tolist())])


def partition_by_need(p: Problem) -> PartitionCounts:
    return _partition([Fraction(v) for v in p.needs.tolist()])


PARTITIONS = {
    Family.LF_FR: partition_by_income,
    Family.LF_NA: partition_by_net_income,
    Family.FR_NA: partition_by_need,
}

# delta preferred by agents below / above the family's threshold
_BELOW_PREFERS = {Family.LF_FR: 0.0, Family.LF_NA: 0.0, Family.FR_NA: 1.0}


def majority_winner(p: Problem, family: Family) -> MajorityOutcome:
    family = Family(family)
    counts = PARTITIONS[family](p)
    below_choice = _BELOW_PREFERS[family]
    if 2 * counts.below > p.n:
        return MajorityOutcome(OutcomeKind.UNIQUE_CORNER, family, below_choice)
    if 2 * counts.above > p.n:
        return MajorityOutcome(OutcomeKind.UNIQUE_CORNER, family, 1.0 - below_choice)
    return MajorityOutcome(OutcomeKind.ALL_TIE, family)


def _strict_prefs(xa: np.ndarray, xb: np.ndarray, rel_tol: float):
    tol = tolerance(xa, xb, rel_tol=rel_tol)
    diff = xa - xb
    return int(np.sum(diff > tol)), int(np.sum(diff < -tol))


def majority_prefers(p: Problem, a: RuleSpec, b: RuleSpec, rel_tol: float = REL_TOL) -> tuple[int, int, int]:
    """Agents strictly preferring ``a``, strictly preferring ``b``, indifferent."""
    better_a, better_b = _strict_prefs(allocate(p, a), allocate(p, b), rel_tol)
    return better_a, better_b, p.n - better_a - better_b


def delta_grid(grid_size: int = 101) -> np.ndarray:
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    return np.linspace(0.0, 1.0, grid_size)


def brute_force_winners(p: Problem, family: Family, grid_size: int = 101, rel_tol: float = REL_TOL) -> set[float]:
    """Grid points not beaten by a strict majority of any other grid point."""
    family = Family(family)
    grid = delta_grid(grid_size)
    allocs = np.stack([allocate(p, DeltaRule(family, d)) for d in grid])
    tol = tolerance(allocs, rel_tol=rel_tol)
    # gain[a, b, i] > tol: agent i strictly prefers grid point b to a
    gain = allocs[None, :, :] - allocs[:, None, :]
    supporters = np.sum(gain > tol, axis=2)
    beaten = np.any(2 * supporters > p.n, axis=1)
    return {float(grid[k]) for k in np.flatnonzero(~beaten)}


def oracle_agrees(p: Problem, family: Family, grid_size: int = 101, rel_tol: float = REL_TOL) -> bool:
    outcome = majority_winner(p, family)
    return brute_force_winners(p, family, grid_size, rel_tol) == outcome.winners_on_grid(delta_grid(grid_size))


def find_majority_improvement(
    p: Problem,
    incumbent: LambdaParams,
    candidates: Sequence[LambdaParams],
    rel_tol: float = REL_TOL,
) -> Optional[LambdaParams]:
    """First candidate a strict majority strictly prefers to the incumbent."""
    if not candidates:
        raise ValueError("candidates must be nonempty")
    base = allocate_lambda(p, incumbent)
    for c in candidates:
        better, _ = _strict_prefs(allocate_lambda(p, c), base, rel_tol)
        if 2 * better > p.n:
            return c
    return None


@dataclass
class Cycle:
    problem: Problem
    rules: tuple[LambdaParams, LambdaParams, LambdaParams]
    draw: int

    def to_dict(self):
        return {
            "problem": self.problem.to_dict(),
            "cycle": [[r.lambda1, r.lambda2] for r in self.rules],
            "draw": self.draw,
        }


def beats(p: Problem, a: LambdaParams, b: LambdaParams, rel_tol: float = REL_TOL) -> bool:
    """Whether a strict majority strictly prefers ``a`` to ``b``."""
    better, _ = _strict_prefs(allocate_lambda(p, a), allocate_lambda(p, b), rel_tol)
    return 2 * better > p.n


def search_cycle(
    seed: int = 0,
    draws: int = 10_000,
    triples_per_draw: int = 20,
    n: int = 3,
    rel_tol: float = REL_TOL,
) -> Optional[Cycle]:
    """Search random problems and lambda triples for ``A > B > C > A``.

    Returns the first cycle found in draw order, so the result only depends
    on the seed.  Finding nothing is not evidence that no cycle exists.
    """
    rng = np.random.default_rng(seed)
    for draw in range(draws):
        p = generators.random_problem(rng, n, income_range=(0.0, 100.0))
        for _ in range(triples_per_draw):
            a, b, c = (generators.random_lambda(rng) for _ in range(3))
            if beats(p, a, b, rel_tol) and beats(p, b, c, rel_tol) and beats(p, c, a, rel_tol):
                return Cycle(p, (a, b, c), draw)
            if beats(p, b, a, rel_tol) and beats(p, c, b, rel_tol) and beats(p, a, c, rel_tol):
                return Cycle(p, (a, c, b), draw)
    return None


def vote_report(p: Problem, family: Family, oracle_grid: Optional[int] = None, rel_tol: float = REL_TOL) -> dict:
    family = Family(family)
    counts = PARTITIONS[family](p)
    outcome = majority_winner(p, family)
    report = {"family": family.value, "partition": counts.to_dict(), "outcome": outcome.to_dict()}
    if oracle_grid is not None:
        winners = brute_force_winners(p, family, oracle_grid, rel_tol)
        expected = outcome.winners_on_grid(delta_grid(oracle_grid))
        report["oracle"] = {
            "grid_size": oracle_grid,
            "winners": sorted(winners),
            "agrees": winners == expected,
        }
    return report

