"""Lorenz dominance between allocations of the same problem."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import REL_TOL, DeltaRule, Family, Problem, ValidationError, allocate_delta, tolerance


@dataclass(frozen=True)
class LorenzProfile:
    sorted_amounts: np.ndarray
    partial_sums: np.ndarray

    @property
    def total(self) -> float:
        return float(self.partial_sums[-1])

    def curve(self) -> list[tuple[float, Optional[float]]]:
        """Points ``(k/n, S^k/S^n)`` including the origin.

        The share is ``None`` when the total is zero (curve undefined).
        """
        n = self.partial_sums.size
        total = self.total
        pts = [(0.0, 0.0 if total != 0 else None)]
        for k, s in enumerate(self.partial_sums, start=1):
            pts.append((k / n, float(s) / total if total != 0 else None))
        return pts


def partial_sums(x: Sequence[float]) -> LorenzProfile:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValidationError("partial sums need a nonempty vector")
    s = np.sort(x)
    return LorenzProfile(s, np.cumsum(s))


class Relation(str, enum.Enum):
    DOMINATES = "Dominates"
    DOMINATED_BY = "DominatedBy"
    EQUAL = "Equal"
    INCOMPARABLE = "Incomparable"


@dataclass(frozen=True)
class DominanceVerdict:
    relation: Relation
    # first orders k (1-based) where x's partial sum is below / above x_bar's
    below_at: Optional[int] = None
    above_at: Optional[int] = None

    @property
    def weakly_dominates(self) -> bool:
        return self.relation in (Relation.DOMINATES, Relation.EQUAL)

    @property
    def weakly_dominated(self) -> bool:
        return self.relation in (Relation.DOMINATED_BY, Relation.EQUAL)

    def to_dict(self):
        return {"relation": self.relation.value, "below_at": self.below_at, "above_at": self.above_at}


def lorenz_compare(x, x_bar, rel_tol: float = REL_TOL) -> DominanceVerdict:
    x = np.asarray(x, dtype=float)
    x_bar = np.asarray(x_bar, dtype=float)
    if x.shape != x_bar.shape:
        raise ValidationError(f"length mismatch: {x.shape} vs {x_bar.shape}")
    tx, tb = math.fsum(x), math.fsum(x_bar)
    if abs(tx - tb) > rel_tol * max(1.0, abs(tx), abs(tb)):
        raise ValidationError(f"Lorenz comparison needs equal totals, got {tx!r} and {tb!r}")
    s, sb = partial_sums(x).partial_sums, partial_sums(x_bar).partial_sums
    tol = tolerance(s, sb, rel_tol=rel_tol)
    diff = s - sb
    below = np.flatnonzero(diff < -tol)
    above = np.flatnonzero(diff > tol)
    below_at = int(below[0]) + 1 if below.size else None
    above_at = int(above[0]) + 1 if above.size else None
    if below.size and above.size:
        rel = Relation.INCOMPARABLE
    elif above.size:
        rel = Relation.DOMINATES
    elif below.size:
        rel = Relation.DOMINATED_BY
    else:
        rel = Relation.EQUAL
    return DominanceVerdict(rel, below_at, above_at)


@dataclass(frozen=True)
class PairRanking:
    delta: float
    delta_next: float
    verdict: DominanceVerdict
    # None when the family carries no ranking guarantee
    expected_holds: Optional[bool]

    def to_dict(self):
        return {
            "delta": self.delta,
            "delta_next": self.delta_next,
            **self.verdict.to_dict(),
            "expected_holds": self.expected_holds,
        }


def expected_order_holds(family: Family, verdict: DominanceVerdict) -> Optional[bool]:
    """Check a (smaller delta vs larger delta) verdict against the family's ranking.

    Lower delta is more equal in ``LF_FR``; higher delta is more equal in
    ``FR_NA``; ``LF_NA`` is not fully ranked.
    """
    family = Family(family)
    if family is Family.LF_FR:
        return verdict.weakly_dominates
    if family is Family.FR_NA:
        return verdict.weakly_dominated
    return None


def rank_family(p: Problem, family: Family, deltas: Sequence[float], rel_tol: float = REL_TOL) -> list[PairRanking]:
    """Compare each adjacent pair of family members along ascending ``deltas``."""
    family = Family(family)
    deltas = [float(d) for d in deltas]
    if any(b < a for a, b in zip(deltas, deltas[1:])):
        raise ValidationError("deltas must be sorted ascending")
    allocs = [allocate_delta(p, DeltaRule(family, d)) for d in deltas]
    out = []
    for k in range(len(deltas) - 1):
        verdict = lorenz_compare(allocs[k], allocs[k + 1], rel_tol=rel_tol)
        out.append(PairRanking(deltas[k], deltas[k + 1], verdict, expected_order_holds(family, verdict)))
    return out
