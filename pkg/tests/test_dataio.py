import csv
import logging
from fractions import Fraction

import numpy as np
import pytest

from redist.core import DeltaRule, Family, Focal, LambdaParams, Problem, ValidationError, allocate_lambda
from redist.dataio import (
    SYNTHETIC_NEED,
    Dataset,
    HouseholdRecord,
    NeedConfig,
    PlantedTargets,
    allocation_histogram,
    build_problem,
    country_panels,
    fit_lambda,
    histogram,
    load_csv,
    planted_dataset,
    summary_stats,
    synthetic_dataset,
    write_csv,
)

FIXTURE = """id,country,weight,net_income,food,housing_utilities,alcohol_tobacco
a,ES,1,1000,100,200,50
b,ES,2,3000,300,,0
c,PT,1,500,400,300,10
"""


@pytest.fixture
def fixture_csv(tmp_path):
    path = tmp_path / "hh.csv"
    path.write_text(FIXTURE, encoding="utf-8")
    return path


def test_load_fixture(fixture_csv, caplog):
    with caplog.at_level(logging.WARNING):
        ds = load_csv(fixture_csv)
    assert len(ds) == 3
    assert ds.categories == ("food", "housing_utilities", "alcohol_tobacco")
    assert ds.records[1].weight == 2 and ds.records[1].expenditures["housing_utilities"] == 0
    assert ds.missing_counts == {"housing_utilities": 1}
    assert "housing_utilities" in caplog.text
    assert ds.countries == ["ES", "PT"]


@pytest.mark.parametrize(
    "text, match",
    [
        ("id,income,food\na,1,2\n", "missing income column"),
        ("id,net_income,food\na,1,2\nb,2,-3\n", "line 3: negative expenditure"),
        ("id,net_income,food\na,1,x\n", "line 2: column 'food' is not numeric"),
        ("id,net_income,weight\na,1,0\n", "weight must be positive"),
        ("id,net_income,food\na,1\n", "expected 3 cells"),
        ("", "empty file"),
    ],
)
def test_load_errors(tmp_path, text, match):
    path = tmp_path / "bad.csv"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ValidationError, match=match):
        load_csv(path)


def test_unknown_categories_join_universe(tmp_path):
    path = tmp_path / "open.csv"
    path.write_text("net_income,space_travel,food\n10,5,1\n", encoding="utf-8")
    ds = load_csv(path)
    assert "space_travel" in ds.categories
    assert ds.records[0].id == "1"


def test_record_validation():
    with pytest.raises(ValidationError):
        HouseholdRecord("x", 1.0, {"food": -1.0})
    with pytest.raises(ValidationError):
        HouseholdRecord("x", 1.0, {}, weight=0)
    with pytest.raises(ValidationError):
        Dataset([HouseholdRecord("x", 1.0, {"food": 1.0})], ("rent",))
    with pytest.raises(ValidationError):
        NeedConfig(frozenset())


def test_build_problem_category_sums():
    rec = HouseholdRecord("x", 900.0, {"food": 100.0, "housing": 200.0, "alcohol": 50.0})
    ds = Dataset([rec], ("food", "housing", "alcohol"))
    assert build_problem(ds, NeedConfig(frozenset({"food", "housing"}))).needs.tolist() == [300.0]
    everything = NeedConfig(frozenset(ds.categories))
    assert build_problem(ds, everything).needs.tolist() == [rec.total_expenditure]


def test_build_problem_country_filter(fixture_csv):
    ds = load_csv(fixture_csv)
    cfg = NeedConfig(frozenset({"food", "housing_utilities"}))
    p = build_problem(ds, cfg, country="PT")
    assert p.incomes.tolist() == [500.0] and p.needs.tolist() == [700.0]
    with pytest.raises(ValidationError, match="no households"):
        build_problem(ds, cfg, country="FR")


def test_build_problem_matches_independent_reader(tmp_path):
    """Need column recomputed from the raw CSV text with the csv module alone."""
    ds = synthetic_dataset(1000, seed=5)
    path = tmp_path / "synth.csv"
    write_csv(ds, path)
    expected = []
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            expected.append(sum(Fraction(row[c]) for c in SYNTHETIC_NEED))
    cfg = NeedConfig(frozenset(SYNTHETIC_NEED))
    p = build_problem(load_csv(path), cfg)
    np.testing.assert_allclose(p.needs, [float(v) for v in expected], rtol=1e-12, atol=0)
    assert np.all(p.needs >= 0)


def _ds(incomes, needs, weights=None):
    weights = weights or [1.0] * len(incomes)
    recs = [
        HouseholdRecord(str(i), float(y), {"food": float(z)}, weight=float(w))
        for i, (y, z, w) in enumerate(zip(incomes, needs, weights))
    ]
    return Dataset(recs, ("food",))


FOOD = NeedConfig(frozenset({"food"}))


def test_summary_examples():
    s = summary_stats(_ds([10, 30], [5, 5]), FOOD)
    assert (s.mean_income, s.mean_need, s.share_need_exceeds_income) == (20, 5, 0)
    s = summary_stats(_ds([10, 30], [5, 5], [3, 1]), FOOD)
    assert s.mean_income == 15 and s.mean_income_unweighted == 20
    assert s.mean_net_income == 10


def test_summary_empty():
    with pytest.raises(ValidationError):
        summary_stats(Dataset([], ("food",)), FOOD)


def test_summary_weighted_against_exact_oracle():
    ds = synthetic_dataset(500, seed=9, weighted=True)
    cfg = NeedConfig(frozenset(SYNTHETIC_NEED))
    s = summary_stats(ds, cfg, threshold=30000)
    w = [Fraction(r.weight) for r in ds.records]
    y = [Fraction(r.net_income) for r in ds.records]
    z = [sum((Fraction(r.expenditures[c]) for c in SYNTHETIC_NEED), Fraction(0)) for r in ds.records]
    W = sum(w)
    assert s.mean_income == pytest.approx(float(sum(a * b for a, b in zip(w, y)) / W), rel=1e-12)
    assert s.mean_need == pytest.approx(float(sum(a * b for a, b in zip(w, z)) / W), rel=1e-12)
    assert s.share_income_below == pytest.approx(float(sum(a for a, b in zip(w, y) if b < 30000) / W), rel=1e-12)
    assert s.share_need_exceeds_income == pytest.approx(
        float(sum(a for a, b, c in zip(w, y, z) if c > b) / W), rel=1e-12
    )


def test_planted_moments_exact():
    t = PlantedTargets()
    ds = planted_dataset(seed=3)
    s = summary_stats(ds, NeedConfig(frozenset(SYNTHETIC_NEED)), threshold=t.threshold)
    assert s.households == t.households
    assert s.mean_income == 25053.8 and s.mean_need == 13830.5
    assert (s.share_income_below, s.share_need_below, s.share_need_exceeds_income) == (0.798, 0.962, 0.107)


def test_planted_targets_inconsistent():
    with pytest.raises(ValidationError):
        planted_dataset(targets=PlantedTargets(households=100, income_below=99, need_below=10, need_exceeds_income=5))


# --- histograms ----------------------------------------------------------------


def test_histogram_binning():
    h = histogram([0, 999.9, 1000, -0.5], [1, 2, 3, 4], bin_width=1000)
    assert h.bins == {-1: 4.0, 0: 3.0, 1: 3.0}
    assert h.rows()[0] == (-1000.0, 0.0, 4.0)
    assert h.to_csv().splitlines()[0] == "bin_left,bin_right,weighted_count"


def test_histogram_conservation():
    ds = synthetic_dataset(800, seed=1, weighted=True)
    h = allocation_histogram(ds, NeedConfig(frozenset(SYNTHETIC_NEED)), LambdaParams(0.3, 0.4), 500)
    assert h.total == ds.weights().sum()


def test_histogram_rejects_bad_width():
    ds = _ds([1, 2], [0, 0])
    with pytest.raises(ValidationError):
        allocation_histogram(ds, FOOD, Focal.L, 0)


def test_full_redistribution_single_bin():
    ds = _ds([100, 300, 800], [10, 0, 0], [1, 2, 1])
    h = allocation_histogram(ds, FOOD, Focal.F, 50)
    assert h.bins == {8: 4.0}  # mean 400 -> [400, 450)


def test_laissez_faire_mirrors_income():
    ds = synthetic_dataset(300, seed=2, weighted=True)
    cfg = NeedConfig(frozenset(SYNTHETIC_NEED))
    assert allocation_histogram(ds, cfg, Focal.L, 1000).bins == histogram(ds.incomes(), ds.weights(), 1000).bins


def test_need_adjusted_shifts_need_histogram():
    # Y - Z = 600 over 3 households: shift 200, two bins of width 100
    ds = _ds([300, 500, 200], [0, 100, 300])
    p = build_problem(ds, FOOD)
    shift = (p.total_income - p.total_need) / p.n
    assert shift == 200
    ra = allocation_histogram(ds, FOOD, Focal.A, 100, origin=0.5)
    need = histogram(p.needs, None, 100, origin=0.5)
    assert ra.bins == {k + 2: v for k, v in need.bins.items()}


def test_country_panels():
    ds = synthetic_dataset(90, seed=4, countries=("BG", "RO", "MT"))
    cfg = NeedConfig(frozenset(SYNTHETIC_NEED))
    panels = country_panels(ds, cfg, [Focal.L, Focal.A], 2000)
    assert sorted(panels) == ["BG", "MT", "RO"]
    assert set(panels["MT"]["histograms"]) == {"income", "need", "L", "A"}
    assert panels["BG"]["stats"]["households"] == 30


# --- lambda fit ---------------------------------------------------------------------


def test_fit_compromise_point():
    rng = np.random.default_rng(0)
    p = Problem(rng.uniform(0, 100, 50), rng.uniform(0, 60, 50))
    fit = fit_lambda(allocate_lambda(p, LambdaParams(0.3, 0.4)), p)
    assert fit.params.lambda1 == pytest.approx(0.3, abs=1e-12)
    assert fit.params.lambda2 == pytest.approx(0.4, abs=1e-12)
    assert fit.residual < 1e-9 and not fit.rank_deficient


def test_fit_laissez_faire_corner(three_agents):
    fit = fit_lambda(three_agents.incomes, three_agents)
    assert (fit.params.lambda1, fit.params.lambda2) == pytest.approx((1, 0), abs=1e-12)
    assert fit.residual == pytest.approx(0, abs=1e-12)


def test_fit_uniform_needs_rank_deficient():
    p = Problem([1, 5, 12, 2], [3, 3, 3, 3])
    from redist.core import allocate_full_redistribution, allocate_need_adjusted

    np.testing.assert_allclose(allocate_full_redistribution(p), allocate_need_adjusted(p))
    fit = fit_lambda(allocate_full_redistribution(p), p)
    assert fit.rank_deficient and fit.residual == pytest.approx(0, abs=1e-12)


def test_fit_reports_imbalance(three_agents):
    fit = fit_lambda([5, 5, 5], three_agents)
    assert fit.imbalance == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        fit_lambda([1, 2], three_agents)


def test_fit_round_trip_many():
    rng = np.random.default_rng(17)
    for _ in range(200):
        n = int(rng.integers(3, 12))
        p = Problem(rng.uniform(-100, 100, n), rng.uniform(0, 100, n))
        lam = LambdaParams(*rng.uniform(-2, 2, 2))
        fit = fit_lambda(allocate_lambda(p, lam), p)
        assert fit.params.lambda1 == pytest.approx(lam.lambda1, abs=1e-8)
        assert fit.params.lambda2 == pytest.approx(lam.lambda2, abs=1e-8)


def test_csv_round_trip(tmp_path):
    ds = synthetic_dataset(20, seed=8, weighted=True)
    path = tmp_path / "rt.csv"
    write_csv(ds, path)
    back = load_csv(path)
    assert [r.net_income for r in back.records] == [r.net_income for r in ds.records]
    assert [r.weight for r in back.records] == [r.weight for r in ds.records]
    assert [r.country for r in back.records] == [r.country for r in ds.records]
    cfg = NeedConfig.default()
    np.testing.assert_array_equal(back.needs(cfg), ds.needs(cfg))


def test_need_config_from_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text('{"need_categories": ["food", "health"]}')
    assert NeedConfig.from_json(path).need_categories == {"food", "health"}
    path.write_text('{"need_categories": "food"}')
    with pytest.raises(ValidationError):
        NeedConfig.from_json(path)


def test_delta_rule_histogram_runs():
    ds = synthetic_dataset(50, seed=3)
    h = allocation_histogram(ds, NeedConfig.default(), DeltaRule(Family.FR_NA, 0.5), 1000)
    assert h.total == 50
