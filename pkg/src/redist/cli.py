"""Allocate, tax, vote on and rank income redistribution rules from the command line.

Exit codes: 0 success, 1 an axiom or ranking expectation failed, 2 invalid
input, 3 internal invariant breach (e.g. closed form and oracle disagree).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import axioms, dataio, lorenz, voting
from .core import (
    REL_TOL,
    BudgetError,
    DeltaRule,
    Family,
    Focal,
    Problem,
    ValidationError,
    allocate,
    as_lambda,
    check_budget,
    format_rule,
    parse_rule,
    rule_function,
    tax_decomposition,
    tolerance,
)

EXIT_OK, EXIT_EXPECTATION, EXIT_INPUT, EXIT_INVARIANT = 0, 1, 2, 3

log = logging.getLogger("redist")


class InvariantBreach(RuntimeError):
    pass


def _read_problem(path: str) -> Problem:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"problem file {path!r}: {exc.strerror}") from exc
    return Problem.from_json(text)


def _rule_from_args(args):
    if args.lambda_ is not None:
        parts = args.lambda_.split(",")
        if len(parts) != 2:
            raise ValidationError("lambda: expected two comma-separated numbers")
        return parse_rule(f"lambda:{args.lambda_}")
    if args.delta is not None:
        return parse_rule(f"delta:{args.delta}")
    return Focal(args.rule)


def _add_rule_flags(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--rule", choices=[f.value for f in Focal], default="A", help="focal rule (default A)")
    g.add_argument("--lambda", dest="lambda_", metavar="L1,L2", help="two-parameter family point")
    g.add_argument("--delta", metavar="FAMILY,D", help="one-parameter family point, e.g. LF_NA,0.5")


def _emit(args, obj, rows=None, header=None):
    """Print JSON, or CSV rows when ``--output csv`` and rows are available."""
    if args.output == "csv" and rows is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(header)
        w.writerows(rows)
        sys.stdout.write(buf.getvalue())
    else:
        sys.stdout.write(json.dumps(obj, indent=None if args.quiet else 2) + "\n")


def cmd_allocate(args) -> int:
    p = _read_problem(args.problem)
    spec = _rule_from_args(args)
    x = allocate(p, spec)
    try:
        check_budget(p, x, args.tolerance)
    except BudgetError as exc:
        raise InvariantBreach(str(exc)) from exc
    _emit(args, x.tolist(), [(i, repr(v)) for i, v in enumerate(x.tolist())], ["agent", "amount"])
    return EXIT_OK


def cmd_tax(args) -> int:
    p = _read_problem(args.problem)
    spec = _rule_from_args(args)
    lam = as_lambda(spec)
    out = {"rule": format_rule(spec), **tax_decomposition(p, lam)}
    if abs(math.fsum(out["taxes"])) > p.n * tolerance(p.incomes, p.needs, rel_tol=args.tolerance):
        raise InvariantBreach("taxes do not sum to zero")
    _emit(args, out, [(i, repr(t)) for i, t in enumerate(out["taxes"])], ["agent", "tax"])
    return EXIT_OK


def _merge(name, verdicts):
    """Fold per-instance verdicts into one row: fails on the first failure."""
    for v in verdicts:
        if not v.passed:
            return v
    vac = bool(verdicts) and all(v.vacuous for v in verdicts)
    note = "premise not met on every instance" if vac else ""
    tol = max((v.tolerance_used for v in verdicts), default=0.0)
    return axioms.AxiomVerdict(name, True, None, tol, vac, note)


def cmd_check(args) -> int:
    names = [a.strip() for a in args.axioms.split(",") if a.strip()]
    unknown = [a for a in names if a not in axioms.AXIOMS]
    if unknown:
        raise ValidationError(f"axioms: unknown name(s) {unknown}; expected from {list(axioms.AXIOMS)}")
    problems = [_read_problem(f) for f in args.problem]
    spec = _rule_from_args(args)
    rule = rule_function(spec)
    tol = args.tolerance
    rng = np.random.default_rng(args.seed)
    results = []
    for name in names:
        vs = []
        if name == "additivity":
            pairs = list(zip(problems, problems[1:]))
            if not pairs:
                p = problems[0]
                pairs = [(p, Problem(rng.uniform(-100, 100, p.n), rng.uniform(0, 100, p.n)))]
            vs = [axioms.check_additivity(rule, a, b, tol) for a, b in pairs if a.n == b.n]
        elif name == "continuity":
            vs = [axioms.check_continuity_sampled(rule, p, args.samples, args.epsilon, seed=args.seed, rel_tol=tol) for p in problems]
        elif name in ("need_monotonicity", "strong_need_monotonicity"):
            check = axioms.CHECKERS[name]
            vs = [check(rule, p, i, args.dz, rel_tol=tol) for p in problems for i in range(p.n)]
        else:
            vs = [axioms.CHECKERS[name](rule, p, rel_tol=tol) for p in problems]
        results.append(_merge(name, vs))
    failed = any(not v.passed for v in results)
    _emit(
        args,
        {"rule": format_rule(spec), "verdicts": [v.to_dict() for v in results]},
        [(v.axiom, v.passed, v.vacuous) for v in results],
        ["axiom", "passed", "vacuous"],
    )
    return EXIT_EXPECTATION if failed else EXIT_OK


def cmd_vote(args) -> int:
    p = _read_problem(args.problem)
    families = list(Family) if args.family == "all" else [Family(args.family)]
    reports = [voting.vote_report(p, f, args.oracle, args.tolerance) for f in families]
    rows = []
    for r in reports:
        o = r["outcome"]
        rows.append((
            r["family"], r["partition"]["below"], r["partition"]["above"], r["partition"]["at"],
            o["kind"], o.get("delta", ""), r.get("oracle", {}).get("agrees", ""),
        ))
    _emit(args, reports if len(reports) > 1 else reports[0], rows,
          ["family", "below", "above", "at", "kind", "delta", "oracle_agrees"])
    if any(r.get("oracle", {}).get("agrees") is False for r in reports):
        log.error("closed-form majority winner disagrees with the grid oracle")
        return EXIT_INVARIANT
    return EXIT_OK


def _floats(text, name):
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ValidationError(f"{name}: expected comma-separated numbers, got {text!r}") from None


def cmd_lorenz(args) -> int:
    p = _read_problem(args.problem)
    family = Family(args.family)
    deltas = _floats(args.deltas, "deltas")
    if len(deltas) < 1:
        raise ValidationError("deltas: at least one value required")
    profiles = {d: lorenz.partial_sums(allocate(p, DeltaRule(family, d))) for d in deltas}
    ranking = lorenz.rank_family(p, family, deltas, args.tolerance)
    out = {
        "family": family.value,
        "profiles": [
            {"delta": d, "sorted": prof.sorted_amounts.tolist(), "partial_sums": prof.partial_sums.tolist()}
            for d, prof in profiles.items()
        ],
        "pairs": [r.to_dict() for r in ranking],
    }
    rows = [(d, k, repr(float(s))) for d, prof in profiles.items() for k, s in enumerate(prof.partial_sums, 1)]
    _emit(args, out, rows, ["delta", "k", "partial_sum"])
    if args.curve:
        with open(args.curve, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["delta", "population_share", "cumulative_share"])
            for d, prof in profiles.items():
                for a, b in prof.curve():
                    w.writerow([d, repr(a), "" if b is None else repr(b)])
    if args.figures:
        from .plotting import plot_lorenz

        plot_lorenz({f"{family.value} δ={d:g}": prof for d, prof in profiles.items()},
                    Path(args.figures) / f"lorenz_{family.value}.png", title=f"{family.value} family")
    return EXIT_EXPECTATION if any(r.expected_holds is False for r in ranking) else EXIT_OK


def _need_config(args) -> dataio.NeedConfig:
    if args.need_config:
        return dataio.NeedConfig.from_json(args.need_config)
    if args.need_categories:
        return dataio.NeedConfig(frozenset(c.strip() for c in args.need_categories.split(",") if c.strip()))
    return dataio.NeedConfig.default()


def cmd_analyze(args) -> int:
    ds = dataio.load_csv(args.data, income_column=args.income_column)
    cfg = _need_config(args)
    unknown = sorted(cfg.need_categories - set(ds.categories))
    if unknown and not args.quiet:
        log.warning("need categories absent from the data: %s", ", ".join(unknown))
    rules = [parse_rule(r) for r in (args.rule or ["L", "F", "A", "lambda:0.3,0.4"])]
    stats = dataio.summary_stats(ds, cfg, args.threshold)
    out = {"stats": stats.to_dict(), "missing_cells": ds.missing_counts}
    if args.fit:
        # observed post-redistribution incomes: a column of the same file
        obs = dataio.load_csv(args.data, income_column=args.fit).incomes()
        out["fit"] = dataio.fit_lambda(obs, dataio.build_problem(ds, cfg)).to_dict()
    if args.by_country:
        out["countries"] = {c: dataio.summary_stats(ds, cfg, args.threshold, c).to_dict() for c in ds.countries}
    if args.hist_dir:
        hdir = Path(args.hist_dir)
        hdir.mkdir(parents=True, exist_ok=True)
        scopes = [None] + (ds.countries if args.by_country else [])
        for scope in scopes:
            sel = ds.select(scope)
            w = sel.weights()
            series = {
                "income": dataio.histogram(sel.incomes(), w, args.bin_width),
                "need": dataio.histogram(sel.needs(cfg), w, args.bin_width),
                **{_slug(format_rule(r)): dataio.allocation_histogram(sel, cfg, r, args.bin_width) for r in rules},
            }
            for label, h in series.items():
                name = f"{scope or 'all'}_{label}.csv"
                (hdir / name).write_text(h.to_csv(), encoding="utf-8")
        out["histograms"] = str(hdir)
    if args.figures:
        from . import plotting

        fdir = Path(args.figures)
        plotting.plot_distributions(
            plotting.dataset_histograms(ds, cfg, rules, args.bin_width), fdir / "distributions.png",
            title="Income, need and redistributions",
        )
        if args.by_country and ds.countries:
            plotting.plot_country_grid(ds, cfg, rules, args.bin_width, fdir / "countries.png")
        out["figures"] = str(fdir)
    rows = [("all", *stats.to_dict().values())]
    if args.by_country:
        rows += [(c, *v.values()) for c, v in out["countries"].items()]
    _emit(args, out, rows, ["scope", *stats.to_dict().keys()])
    return EXIT_OK


def _slug(label: str) -> str:
    return label.replace(":", "_").replace(",", "_")


def cmd_synth(args) -> int:
    if args.planted:
        ds = dataio.planted_dataset(args.seed)
    else:
        ds = dataio.synthetic_dataset(args.households, args.seed, weighted=args.weighted)
    dataio.write_csv(ds, args.out)
    if not args.quiet:
        sys.stderr.write(f"wrote {len(ds)} households to {args.out}\n")
    return EXIT_OK


def cmd_cycle(args) -> int:
    cyc = voting.search_cycle(args.seed, args.draws, args.triples, rel_tol=args.tolerance)
    _emit(args, cyc.to_dict() if cyc else None)
    return EXIT_OK if cyc else EXIT_EXPECTATION


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default 0)")
    common.add_argument("--tolerance", type=float, default=argparse.SUPPRESS,
                        help=f"relative tolerance for all comparisons (default {REL_TOL:g})")
    common.add_argument("--output", choices=["json", "csv"], default=argparse.SUPPRESS)
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="redist", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("allocate", parents=[common], help="allocate under a rule")
    p.add_argument("-p", "--problem", required=True, help="problem JSON file")
    _add_rule_flags(p)
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("tax", parents=[common], help="linear tax implied by a rule")
    p.add_argument("-p", "--problem", required=True)
    _add_rule_flags(p)
    p.set_defaults(func=cmd_tax)

    p = sub.add_parser("check", parents=[common], help="check axioms on problem instances")
    p.add_argument("-p", "--problem", required=True, action="append", help="problem JSON (repeatable)")
    p.add_argument("--axioms", default=",".join(axioms.AXIOMS), help="comma-separated axiom names")
    p.add_argument("--dz", type=float, default=1.0, help="need increase for monotonicity checks")
    p.add_argument("--samples", type=int, default=100, help="continuity perturbations")
    p.add_argument("--epsilon", type=float, default=1e-6, help="continuity perturbation size")
    _add_rule_flags(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("vote", parents=[common], help="majority winner within a family")
    p.add_argument("-p", "--problem", required=True)
    p.add_argument("--family", choices=[f.value for f in Family] + ["all"], default="all")
    p.add_argument("--oracle", type=int, metavar="GRID", help="cross-check on a delta grid of this size")
    p.set_defaults(func=cmd_vote)

    p = sub.add_parser("lorenz", parents=[common], help="Lorenz ranking within a family")
    p.add_argument("-p", "--problem", required=True)
    p.add_argument("--family", choices=[f.value for f in Family], required=True)
    p.add_argument("--deltas", default="0,0.5,1", help="ascending comma-separated deltas")
    p.add_argument("--curve", metavar="CSV", help="write Lorenz curve points")
    p.add_argument("--figures", metavar="DIR", help="write a Lorenz curve figure")
    p.set_defaults(func=cmd_lorenz)

    p = sub.add_parser("analyze", parents=[common], help="household dataset statistics and histograms")
    p.add_argument("--data", required=True, help="household CSV")
    p.add_argument("--income-column", default="net_income")
    p.add_argument("--need-config", help="JSON file with need_categories")
    p.add_argument("--need-categories", help="comma-separated need categories")
    p.add_argument("--rule", action="append", help="rule to histogram (repeatable; L, F, A, lambda:l1,l2, delta:FAM,d)")
    p.add_argument("--bin-width", type=float, default=1000.0)
    p.add_argument("--threshold", type=float, default=40000.0)
    p.add_argument("--by-country", action="store_true")
    p.add_argument("--fit", metavar="COLUMN", help="fit lambda to an observed post-redistribution column")
    p.add_argument("--hist-dir", metavar="DIR", help="write histogram CSVs here")
    p.add_argument("--figures", metavar="DIR", help="write distribution figures here")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic household CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--households", type=int, default=1000)
    p.add_argument("--planted", action="store_true", help="10000 households with exactly planted moments")
    p.add_argument("--weighted", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("cycle", parents=[common], help="search for a majority cycle among lambda-rules")
    p.add_argument("--draws", type=int, default=10_000)
    p.add_argument("--triples", type=int, default=20)
    p.set_defaults(func=cmd_cycle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in (("seed", 0), ("tolerance", REL_TOL), ("output", "json"), ("quiet", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s: %(message)s")
    if not args.tolerance > 0:
        parser.error("--tolerance must be positive")
    try:
        return args.func(args)
    except ValidationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except InvariantBreach as exc:
        sys.stderr.write(f"invariant breach: {exc}\n")
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
