"""Household survey data: CSV ingestion, need construction and distribution summaries.

Income is a household's net income; need is the sum of its expenditure on
the categories listed in a ``NeedConfig``.  Survey weights enter statistics
and histograms only.  The rules themselves treat every household as one
agent, since they are defined on unweighted agent vectors.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import (
    LambdaParams,
    Problem,
    RuleSpec,
    ValidationError,
    allocate,
    allocate_full_redistribution,
    allocate_laissez_faire,
    allocate_need_adjusted,
    format_rule,
)

log = logging.getLogger(__name__)

# Expenditure items counted as need by default (food, shelter and utilities,
# clothing, furnishing, health, transport, communication, education).
DEFAULT_NEED_CATEGORIES = (
    "food",
    "non_alcoholic_beverages",
    "clothing_footwear",
    "housing_utilities",
    "furniture_furnishings",
    "household_textiles",
    "household_appliances",
    "glassware_tableware_utensils",
    "health",
    "second_hand_cars",
    "personal_transport_operation",
    "transport_services",
    "communication",
    "education",
)


@dataclass(frozen=True)
class HouseholdRecord:
    id: str
    net_income: float
    expenditures: Mapping[str, float]
    country: Optional[str] = None
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "net_income", float(self.net_income))
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "expenditures", {k: float(v) for k, v in self.expenditures.items()})
        if not math.isfinite(self.net_income):
            raise ValidationError(f"household {self.id}: non-finite income")
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise ValidationError(f"household {self.id}: weight must be positive, got {self.weight!r}")
        for cat, v in self.expenditures.items():
            if not (v >= 0 and math.isfinite(v)):
                raise ValidationError(f"household {self.id}: expenditure {cat!r} must be nonnegative, got {v!r}")

    def need(self, cfg: "NeedConfig") -> float:
        return math.fsum(v for k, v in self.expenditures.items() if k in cfg.need_categories)

    @property
    def total_expenditure(self) -> float:
        return math.fsum(self.expenditures.values())


@dataclass(frozen=True)
class NeedConfig:
    need_categories: frozenset

    def __post_init__(self):
        cats = frozenset(self.need_categories)
        if not cats:
            raise ValidationError("need_categories: at least one category is required")
        object.__setattr__(self, "need_categories", cats)

    @classmethod
    def default(cls) -> "NeedConfig":
        return cls(frozenset(DEFAULT_NEED_CATEGORIES))

    @classmethod
    def from_json(cls, path) -> "NeedConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        cats = data.get("need_categories") if isinstance(data, dict) else data
        if not isinstance(cats, list):
            raise ValidationError("need config: expected a list under 'need_categories'")
        return cls(frozenset(cats))


@dataclass
class Dataset:
    records: list[HouseholdRecord]
    categories: tuple[str, ...]
    missing_counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        universe = set(self.categories)
        for r in self.records:
            extra = set(r.expenditures) - universe
            if extra:
                raise ValidationError(f"household {r.id}: categories {sorted(extra)} not in the dataset")

    def __len__(self):
        return len(self.records)

    @property
    def countries(self) -> list[str]:
        return sorted({r.country for r in self.records if r.country is not None})

    def select(self, country: Optional[str] = None) -> "Dataset":
        if country is None:
            return self
        return Dataset([r for r in self.records if r.country == country], self.categories)

    def weights(self) -> np.ndarray:
        return np.array([r.weight for r in self.records], dtype=float)

    def incomes(self) -> np.ndarray:
        return np.array([r.net_income for r in self.records], dtype=float)

    def needs(self, cfg: NeedConfig) -> np.ndarray:
        return np.array([r.need(cfg) for r in self.records], dtype=float)


class CsvFormatError(ValidationError):
    pass


def _number(text: str, line: int, column: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise CsvFormatError(f"line {line}: column {column!r} is not numeric ({text!r})") from None
    if not math.isfinite(v):
        raise CsvFormatError(f"line {line}: column {column!r} is not finite ({text!r})")
    return v


def load_csv(
    path,
    income_column: str = "net_income",
    id_column: str = "id",
    weight_column: str = "weight",
    country_column: str = "country",
) -> Dataset:
    """Read households from a UTF-8, comma-separated file with a header row.

    Every column other than id, income, weight and country is an expenditure
    category.  Empty expenditure cells count as zero and are tallied per
    column in ``Dataset.missing_counts``.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        if income_column not in header:
            raise CsvFormatError(f"{path}: missing income column {income_column!r}")
        reserved = {income_column, id_column, weight_column, country_column}
        categories = tuple(h for h in header if h not in reserved)
        missing: Counter = Counter()
        records = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise CsvFormatError(f"line {line}: expected {len(header)} cells, got {len(row)}")
            cells = dict(zip(header, (c.strip() for c in row)))
            if not cells[income_column]:
                raise CsvFormatError(f"line {line}: empty income")
            income = _number(cells[income_column], line, income_column)
            weight = 1.0
            if cells.get(weight_column):
                weight = _number(cells[weight_column], line, weight_column)
                if weight <= 0:
                    raise CsvFormatError(f"line {line}: weight must be positive ({weight!r})")
            expenditures = {}
            for cat in categories:
                raw = cells[cat]
                if not raw:
                    missing[cat] += 1
                    expenditures[cat] = 0.0
                    continue
                v = _number(raw, line, cat)
                if v < 0:
                    raise CsvFormatError(f"line {line}: negative expenditure in column {cat!r} ({v!r})")
                expenditures[cat] = v
            records.append(
                HouseholdRecord(
                    id=cells.get(id_column) or str(len(records) + 1),
                    net_income=income,
                    expenditures=expenditures,
                    country=cells.get(country_column) or None,
                    weight=weight,
                )
            )
    for cat, count in sorted(missing.items()):
        log.warning("%s: %d empty cells in column %r treated as 0", path, count, cat)
    return Dataset(records, categories, dict(missing))


def write_csv(ds: Dataset, path) -> None:
    header = ["id", "country", "weight", "net_income", *ds.categories]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in ds.records:
            w.writerow(
                [r.id, r.country or "", repr(r.weight), repr(r.net_income)]
                + [repr(r.expenditures.get(c, 0.0)) for c in ds.categories]
            )


def build_problem(ds: Dataset, cfg: NeedConfig, country: Optional[str] = None) -> Problem:
    """Households as agents: income is net income, need the need-category spend."""
    sel = ds.select(country)
    if not sel.records:
        raise ValidationError(f"no households selected{f' for country {country!r}' if country else ''}")
    return Problem(sel.incomes(), sel.needs(cfg))


def _wmean(values: np.ndarray, weights: np.ndarray) -> float:
    return math.fsum(values * weights) / math.fsum(weights)


def _wshare(mask: np.ndarray, weights: np.ndarray) -> float:
    return math.fsum(weights[mask]) / math.fsum(weights)


@dataclass(frozen=True)
class SummaryStats:
    households: int
    total_weight: float
    threshold: float
    mean_income: float
    mean_income_unweighted: float
    mean_need: float
    mean_need_unweighted: float
    mean_net_income: float
    mean_net_income_unweighted: float
    share_income_below: float
    share_need_below: float
    share_need_exceeds_income: float
    share_need_exceeds_income_unweighted: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def summary_stats(ds: Dataset, cfg: NeedConfig, threshold: float = 40000.0, country: Optional[str] = None) -> SummaryStats:
    """Means, threshold shares and the share of households whose need exceeds income.

    Shares are weighted; means are reported both weighted and unweighted.
    """
    sel = ds.select(country)
    if not sel.records:
        raise ValidationError("summary statistics need at least one household")
    y, z, w = sel.incomes(), sel.needs(cfg), sel.weights()
    ones = np.ones_like(w)
    return SummaryStats(
        households=len(sel),
        total_weight=math.fsum(w),
        threshold=threshold,
        mean_income=_wmean(y, w),
        mean_income_unweighted=_wmean(y, ones),
        mean_need=_wmean(z, w),
        mean_need_unweighted=_wmean(z, ones),
        mean_net_income=_wmean(y - z, w),
        mean_net_income_unweighted=_wmean(y - z, ones),
        share_income_below=_wshare(y < threshold, w),
        share_need_below=_wshare(z < threshold, w),
        share_need_exceeds_income=_wshare(z > y, w),
        share_need_exceeds_income_unweighted=_wshare(z > y, ones),
    )


@dataclass
class Histogram:
    bin_width: float
    origin: float
    bins: dict[int, float]

    @property
    def total(self) -> float:
        return math.fsum(self.bins.values())

    def rows(self) -> list[tuple[float, float, float]]:
        return [
            (self.origin + k * self.bin_width, self.origin + (k + 1) * self.bin_width, self.bins[k])
            for k in sorted(self.bins)
        ]

    def to_csv(self) -> str:
        lines = ["bin_left,bin_right,weighted_count"]
        lines += [f"{a!r},{b!r},{c!r}" for a, b, c in self.rows()]
        return "\n".join(lines) + "\n"


def histogram(values, weights=None, bin_width: float = 1000.0, origin: float = 0.0) -> Histogram:
    """Weighted histogram with bins ``[origin + k*w, origin + (k+1)*w)``."""
    if not bin_width > 0:
        raise ValidationError(f"bin width must be positive, got {bin_width!r}")
    values = np.asarray(values, dtype=float)
    weights = np.ones_like(values) if weights is None else np.asarray(weights, dtype=float)
    idx = np.floor((values - origin) / bin_width).astype(np.int64)
    grouped: dict[int, list[float]] = defaultdict(list)
    for k, wt in zip(idx.tolist(), weights.tolist()):
        grouped[k].append(wt)
    return Histogram(bin_width, origin, {k: math.fsum(v) for k, v in sorted(grouped.items())})


def allocation_histogram(
    ds: Dataset,
    cfg: NeedConfig,
    rule: RuleSpec,
    bin_width: float = 1000.0,
    origin: float = 0.0,
    country: Optional[str] = None,
) -> Histogram:
    """Distribution of what a rule gives each household, counted with survey weights."""
    if not bin_width > 0:
        raise ValidationError(f"bin width must be positive, got {bin_width!r}")
    p = build_problem(ds, cfg, country)
    return histogram(allocate(p, rule), ds.select(country).weights(), bin_width, origin)


@dataclass(frozen=True)
class LambdaFit:
    params: LambdaParams
    residual: float
    rank: int
    imbalance: float

    @property
    def rank_deficient(self) -> bool:
        return self.rank < 2

    def to_dict(self):
        return {
            "lambda1": self.params.lambda1,
            "lambda2": self.params.lambda2,
            "residual": self.residual,
            "rank": self.rank,
            "rank_deficient": self.rank_deficient,
            "imbalance": self.imbalance,
        }


def fit_lambda(observed_post, p: Problem) -> LambdaFit:
    """Least-squares ``(lambda1, lambda2)`` reproducing an observed redistribution.

    Regresses ``observed - R^A`` on ``R^L - R^A`` and ``R^F - R^A``; when the
    regressors are collinear the minimum-norm solution is returned and
    ``rank_deficient`` is set.
    """
    observed = np.asarray(observed_post, dtype=float)
    if observed.shape != (p.n,):
        raise ValidationError(f"observed allocation has shape {observed.shape}, expected ({p.n},)")
    base = allocate_need_adjusted(p)
    X = np.column_stack([allocate_laissez_faire(p) - base, allocate_full_redistribution(p) - base])
    target = observed - base
    scale = max(1.0, float(np.max(np.abs(X))) if X.size else 1.0)
    coef, _, rank, _ = np.linalg.lstsq(X, target, rcond=1e-12 * max(p.n, 2))
    # zero columns (e.g. R^F == R^A under uniform needs) make lstsq report rank < 2
    rank = int(rank)
    if np.max(np.abs(X[:, 1])) <= 1e-12 * scale or np.max(np.abs(X[:, 0])) <= 1e-12 * scale:
        rank = min(rank, 1)
    resid = float(np.linalg.norm(X @ coef - target))
    imbalance = math.fsum(observed) - p.total_income
    return LambdaFit(LambdaParams(float(coef[0]), float(coef[1])), resid, rank, imbalance)


# --- synthetic data -----------------------------------------------------------

SYNTHETIC_NEED = ("food", "non_alcoholic_beverages", "clothing_footwear", "housing_utilities",
                  "health", "transport_services", "communication", "education")
SYNTHETIC_OTHER = ("alcohol_tobacco", "recreation_culture", "restaurants_hotels", "miscellaneous")
SYNTHETIC_CATEGORIES = SYNTHETIC_NEED + SYNTHETIC_OTHER
SYNTHETIC_COUNTRIES = ("BE", "BG", "DE", "EL", "HU", "LT", "MT", "PT", "UK")


def _split(rng: np.random.Generator, total: int, parts: int) -> list[int]:
    """Random nonnegative integers summing to ``total``."""
    if parts == 1:
        return [total]
    cuts = np.sort(rng.integers(0, total + 1, size=parts - 1))
    edges = np.concatenate([[0], cuts, [total]])
    return np.diff(edges).astype(int).tolist()


@dataclass(frozen=True)
class PlantedTargets:
    """Exact population moments a planted dataset is built to hit."""

    households: int = 10_000
    total_income: int = 250_538_000
    total_need: int = 138_305_000
    income_below: int = 7_980
    need_below: int = 9_620
    need_exceeds_income: int = 1_070
    threshold: int = 40_000

    @property
    def mean_income(self) -> float:
        return self.total_income / self.households

    @property
    def mean_need(self) -> float:
        return self.total_need / self.households

    @property
    def mean_net_income(self) -> float:
        return (self.total_income - self.total_need) / self.households


def planted_dataset(seed: int = 0, targets: PlantedTargets = PlantedTargets(), countries=SYNTHETIC_COUNTRIES) -> Dataset:
    """Integer-valued households whose unweighted moments equal ``targets`` exactly.

    Households fall into five blocks that fix who is below the threshold in
    income and need and whose need exceeds income; leftover income and need
    are then spread over blocks where adding them cannot change any count.
    """
    t = targets
    rng = np.random.default_rng(seed)
    thr = t.threshold
    high_need = t.households - t.need_below
    short = t.need_exceeds_income
    high_need_short = max(1, high_need // 5)  # z > y and z >= threshold
    high_need_rich = high_need - high_need_short  # y >= z >= threshold
    rich_low_need = (t.households - t.income_below) - high_need_rich
    low_short = short - high_need_short
    plain = t.households - short - high_need_rich - rich_low_need
    if min(high_need_rich, rich_low_need, low_short, plain) < 1:
        raise ValidationError("planted targets are inconsistent")

    rows: list[tuple[int, int, str]] = []  # (income, need, block)
    for _ in range(plain):
        z = int(rng.integers(3_000, 18_000))
        rows.append((int(rng.integers(z, min(z + 18_000, thr - 1))), z, "plain"))
    for _ in range(rich_low_need):
        rows.append((int(rng.integers(thr, thr + 10_000)), int(rng.integers(5_000, 30_000)), "rich"))
    for _ in range(high_need_rich):
        z = int(rng.integers(thr, thr + 10_000))
        rows.append((int(rng.integers(z, z + 30_000)), z, "high_need_rich"))
    for _ in range(low_short):
        y = int(rng.integers(-2_000, 15_000))
        lo = max(0, y + 1)
        rows.append((y, int(rng.integers(lo, lo + 12_000)), "short"))
    for _ in range(high_need_short):
        rows.append((int(rng.integers(0, 30_000)), int(rng.integers(thr, thr + 5_000)), "high_need_short"))

    income_gap = t.total_income - sum(r[0] for r in rows)
    need_gap = t.total_need - sum(r[1] for r in rows)
    if income_gap < 0 or need_gap < 0:
        raise ValidationError("planted targets are below the generated base totals")
    rich_idx = [i for i, r in enumerate(rows) if r[2] == "rich"]
    top_idx = [i for i, r in enumerate(rows) if r[2] == "high_need_short"]
    # extra income only to rich households (stay above threshold, above need);
    # extra need only to short households already above the threshold
    for idx, gap, pos in ((rich_idx, income_gap, 0), (top_idx, need_gap, 1)):
        for i, extra in zip(idx, _split(rng, gap, len(idx))):
            row = list(rows[i])
            row[pos] += extra
            rows[i] = tuple(row)

    order = rng.permutation(len(rows))
    records = []
    for k, i in enumerate(order.tolist()):
        y, z, _ = rows[i]
        exp = dict(zip(SYNTHETIC_NEED, _split(rng, z, len(SYNTHETIC_NEED))))
        exp.update(zip(SYNTHETIC_OTHER, rng.integers(0, 3_000, size=len(SYNTHETIC_OTHER)).tolist()))
        records.append(
            HouseholdRecord(
                id=f"h{k:05d}",
                net_income=float(y),
                expenditures={c: float(v) for c, v in exp.items()},
                country=countries[k % len(countries)] if countries else None,
            )
        )
    return Dataset(records, SYNTHETIC_CATEGORIES)


def synthetic_dataset(
    n: int = 1000,
    seed: int = 0,
    countries: Sequence[str] = SYNTHETIC_COUNTRIES,
    weighted: bool = False,
) -> Dataset:
    """Lognormal incomes and expenditure shares, with country-specific scales."""
    rng = np.random.default_rng(seed)
    scale = {c: float(rng.uniform(0.4, 1.6)) for c in countries} if countries else {}
    records = []
    for k in range(n):
        country = countries[k % len(countries)] if countries else None
        s = scale.get(country, 1.0)
        income = round(float(rng.lognormal(np.log(22_000 * s), 0.6)), 2)
        spend = float(rng.uniform(0.5, 1.1)) * max(income, 5_000 * s)
        shares = rng.dirichlet(np.ones(len(SYNTHETIC_CATEGORIES)) * 2)
        records.append(
            HouseholdRecord(
                id=f"s{k:05d}",
                net_income=income,
                expenditures={c: round(spend * sh, 2) for c, sh in zip(SYNTHETIC_CATEGORIES, shares)},
                country=country,
                weight=float(rng.integers(1, 4)) if weighted else 1.0,
            )
        )
    return Dataset(records, SYNTHETIC_CATEGORIES)


def country_panels(
    ds: Dataset,
    cfg: NeedConfig,
    rules: Iterable[RuleSpec],
    bin_width: float,
    threshold: float = 40000.0,
) -> dict:
    """Per-country statistics and histograms of income, need and each rule's allocation."""
    rules = list(rules)
    out = {}
    for country in ds.countries:
        sel = ds.select(country)
        w = sel.weights()
        out[country] = {
            "stats": summary_stats(sel, cfg, threshold).to_dict(),
            "histograms": {
                "income": histogram(sel.incomes(), w, bin_width).rows(),
                "need": histogram(sel.needs(cfg), w, bin_width).rows(),
                **{format_rule(r): allocation_histogram(sel, cfg, r, bin_width).rows() for r in rules},
            },
        }
    return out
