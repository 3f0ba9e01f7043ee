import csv
import io
import json
import subprocess
import sys

import pytest

from redist import voting
from redist.cli import main
from redist.core import Problem


@pytest.fixture
def prob(tmp_path):
    def write(y, z, name="prob.json"):
        path = tmp_path / name
        path.write_text(json.dumps({"incomes": y, "needs": z}))
        return str(path)
    return write


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_allocate_need_adjusted(capsys, prob):
    code, out, _ = run(capsys, "allocate", "-p", prob([2, 2, 10], [1, 4, 0]), "--rule", "A")
    assert code == 0
    assert json.loads(out) == pytest.approx([4, 7, 3], abs=1e-12)


def test_allocate_lambda_echoes_incomes(capsys, prob):
    code, out, _ = run(capsys, "allocate", "-p", prob([2, 2, 10], [1, 4, 0]), "--lambda", "1,0")
    assert code == 0 and json.loads(out) == [2, 2, 10]


def test_allocate_delta_out_of_range(capsys, prob):
    code, _, err = run(capsys, "allocate", "-p", prob([2, 2, 10], [1, 4, 0]), "--delta", "LF_NA,2")
    assert code == 2 and "delta" in err


@pytest.mark.parametrize(
    "y, z, field", [([1, 2], [1], "needs"), ([1, 2], [0, -1], "needs"), ([1, "a"], [0, 0], "non-numeric")]
)
def test_allocate_validation_names_field(capsys, prob, y, z, field):
    code, _, err = run(capsys, "allocate", "-p", prob(y, z))
    assert code == 2 and field in err


def test_allocate_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "allocate", "-p", str(tmp_path / "nope.json"))
    assert code == 2 and "problem file" in err


def test_allocate_csv_output(capsys, prob):
    code, out, _ = run(capsys, "--output", "csv", "allocate", "-p", prob([2, 2, 10], [1, 4, 0]), "--rule", "L")
    rows = list(csv.reader(io.StringIO(out)))
    assert rows == [["agent", "amount"], ["0", "2.0"], ["1", "2.0"], ["2", "10.0"]]


def test_tax_outputs(capsys, prob):
    p = prob([2, 2, 10], [1, 4, 0])
    code, out, _ = run(capsys, "tax", "-p", p, "--lambda", "1,0")
    data = json.loads(out)
    assert code == 0 and data["taxes"] == [0, 0, 0] and data["marginal_rate"] == 0
    data = json.loads(run(capsys, "tax", "-p", p, "--lambda", "0,1")[1])
    assert data["taxes"] == pytest.approx([2 - 14 / 3, 2 - 14 / 3, 10 - 14 / 3])
    data = json.loads(run(capsys, "tax", "-p", p, "--lambda", "0,0")[1])
    assert data["taxes"] == pytest.approx([-2, -5, 7], abs=1e-12)
    assert data["need_subsidy_rate"] == 1 and data["marginal_rate"] == 1


def test_check_need_adjusted_lower_bounds(capsys, prob):
    files = [prob([5, 9, 3], [2, 9, 0], "a.json"), prob([10, 1], [0, 1], "b.json")]
    args = ["check", "--rule", "A", "--axioms", "needs_lb,net_average_lb"]
    for f in files:
        args += ["-p", f]
    code, out, _ = run(capsys, *args)
    verdicts = json.loads(out)["verdicts"]
    assert code == 0 and all(v["passed"] and not v["vacuous"] for v in verdicts)


def test_check_laissez_faire_net_average_fails(capsys, prob):
    code, out, _ = run(capsys, "check", "-p", prob([1, 9, 20], [0, 2, 5]), "--rule", "L", "--axioms", "net_average_lb")
    (v,) = json.loads(out)["verdicts"]
    assert code == 1 and not v["passed"] and v["witness"]["agent"] == 0


def test_check_full_redistribution_equal_treatment(capsys, prob):
    code, out, _ = run(capsys, "check", "-p", prob([3, 3, 1], [1, 1, 0]), "--rule", "F", "--axioms", "equal_treatment")
    assert code == 0


def test_check_unknown_axiom(capsys, prob):
    code, _, err = run(capsys, "check", "-p", prob([1], [0]), "--axioms", "envy_free")
    assert code == 2 and "envy_free" in err


def test_check_all_axioms_need_adjusted(capsys, prob):
    code, out, _ = run(capsys, "check", "-p", prob([5, 1, 4], [1, 0, 2]), "--rule", "A")
    rows = {v["axiom"]: v for v in json.loads(out)["verdicts"]}
    assert code == 1
    assert not rows["strong_need_monotonicity"]["passed"]
    assert rows["order_preservation"]["vacuous"]
    assert all(v["passed"] for k, v in rows.items() if k != "strong_need_monotonicity")


def test_vote_with_oracle(capsys, prob):
    code, out, _ = run(capsys, "vote", "-p", prob([2, 2, 10], [1, 4, 0]), "--family", "LF_FR", "--oracle", "101")
    data = json.loads(out)
    assert code == 0
    assert data["partition"] == {"below": 2, "above": 1, "at": 0}
    assert data["outcome"]["rule"] == "F" and data["oracle"]["agrees"]


def test_vote_all_families(capsys, prob):
    code, out, _ = run(capsys, "--output", "csv", "vote", "-p", prob([1, 1, 1], [0, 0, 9]))
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and [r["family"] for r in rows] == ["LF_FR", "LF_NA", "FR_NA"]
    assert rows[0]["kind"] == "AllTie" and rows[2]["delta"] == "1.0"


def test_vote_oracle_disagreement_exit_3(capsys, prob, monkeypatch):
    monkeypatch.setattr(voting, "brute_force_winners", lambda *a, **k: {0.5})
    code, _, _ = run(capsys, "vote", "-p", prob([2, 2, 10], [1, 4, 0]), "--family", "LF_FR", "--oracle", "11")
    assert code == 3


def test_lorenz_incomparable_pair(capsys, prob, tmp_path):
    curve = tmp_path / "curve.csv"
    code, out, _ = run(
        capsys, "lorenz", "-p", prob([2, 2, 10], [1, 4, 0]), "--family", "LF_NA",
        "--deltas", f"{1 / 10!r},{1 / 3!r}", "--curve", str(curve),
    )
    data = json.loads(out)
    assert code == 0
    assert data["pairs"][0]["relation"] == "Incomparable"
    assert data["profiles"][1]["partial_sums"] == pytest.approx([10 / 3, 26 / 3, 14], abs=1e-12)
    rows = list(csv.DictReader(curve.open()))
    assert len(rows) == 8 and rows[0]["cumulative_share"] == "0.0"


def test_lorenz_chain(capsys, prob):
    code, out, _ = run(capsys, "lorenz", "-p", prob([2, 2, 10], [1, 4, 0]), "--family", "LF_FR", "--deltas", "0,0.5,1")
    assert code == 0
    assert all(p["expected_holds"] for p in json.loads(out)["pairs"])


def test_lorenz_unsorted_deltas(capsys, prob):
    code, _, err = run(capsys, "lorenz", "-p", prob([1, 2], [0, 0]), "--family", "LF_FR", "--deltas", "1,0")
    assert code == 2


def test_cycle_command(capsys):
    code, out, _ = run(capsys, "cycle", "--draws", "50")
    data = json.loads(out)
    assert code == 0 and len(data["cycle"]) == 3
    p = Problem(**data["problem"])
    assert p.n == 3


def test_synth_and_analyze(capsys, tmp_path):
    data = tmp_path / "planted.csv"
    assert run(capsys, "--quiet", "synth", "--planted", "--out", str(data))[0] == 0
    hist = tmp_path / "hist"
    figs = tmp_path / "figs"
    code, out, _ = run(
        capsys, "analyze", "--data", str(data), "--need-categories", ",".join(__import__("redist.dataio").dataio.SYNTHETIC_NEED),
        "--by-country", "--hist-dir", str(hist), "--figures", str(figs), "--bin-width", "2500",
    )
    assert code == 0
    res = json.loads(out)
    assert res["stats"]["mean_income"] == 25053.8
    assert res["stats"]["share_need_exceeds_income"] == 0.107
    assert len(res["countries"]) == 9
    assert (hist / "all_income.csv").read_text().startswith("bin_left,bin_right,weighted_count")
    assert (hist / "all_lambda_0.3_0.4.csv").exists()
    assert (figs / "distributions.png").stat().st_size > 0
    assert (figs / "countries.png").stat().st_size > 0


def test_analyze_fit_column(capsys, tmp_path):
    path = tmp_path / "obs.csv"
    # observed column equals laissez faire
    path.write_text("id,net_income,post,food\na,10,10,2\nb,20,20,5\nc,60,60,1\n")
    code, out, _ = run(capsys, "analyze", "--data", str(path), "--need-categories", "food", "--fit", "post")
    fit = json.loads(out)["fit"]
    assert code == 0 and fit["lambda1"] == pytest.approx(1) and fit["lambda2"] == pytest.approx(0, abs=1e-12)


def test_analyze_bad_csv(capsys, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("id,net_income,food\na,10,-1\n")
    code, _, err = run(capsys, "analyze", "--data", str(path))
    assert code == 2 and "line 2" in err


def test_deterministic_output(capsys, prob):
    args = ["--seed", "5", "check", "-p", prob([1, 4, 9], [0, 3, 1]), "--rule", "F"]
    assert run(capsys, *args)[1] == run(capsys, *args)[1]


def test_tolerance_flag(capsys, prob):
    code, _, _ = run(capsys, "--tolerance", "1e-6", "allocate", "-p", prob([1, 2], [0, 0]))
    assert code == 0
    with pytest.raises(SystemExit) as exc:
        main(["--tolerance", "-1", "allocate", "-p", prob([1, 2], [0, 0])])
    assert exc.value.code == 2


def test_module_entry_point(prob):
    res = subprocess.run(
        [sys.executable, "-m", "redist", "--quiet", "allocate", "-p", prob([2, 2, 10], [1, 4, 0]), "--rule", "F"],
        capture_output=True, text=True,
    )
    assert res.returncode == 0
    assert json.loads(res.stdout) == pytest.approx([14 / 3] * 3)
