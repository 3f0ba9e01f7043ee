"""Static figures written next to the CLI's delimited output.

Figures are built on ``matplotlib.figure.Figure`` directly, so no pyplot
state or interactive backend is involved.
"""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
from matplotlib.figure import Figure

from .dataio import Dataset, Histogram, NeedConfig, allocation_histogram, histogram
from .core import RuleSpec, format_rule
from .lorenz import LorenzProfile

STYLE = {
    "figure.dpi": 120,
    "font.size": 9,
}


def _step(ax, hist: Histogram, label: str, total: Optional[float] = None, color: Optional[str] = None) -> bool:
    """Draw one series; returns False when it was drawn as a point mass instead."""
    rows = hist.rows()
    if not rows:
        return False
    if len(rows) == 1:
        # e.g. full redistribution: everyone in one bin would flatten the other curves
        a, b = rows[0][0], rows[0][1]
        ax.axvline(0.5 * (a + b), ls="--", lw=1.0, color=color, label=f"{label} (all in {a:,.0f}-{b:,.0f})")
        return False
    lefts = np.array([r[0] for r in rows])
    counts = np.array([r[2] for r in rows])
    if total:
        counts = counts / total
    ax.stairs(counts, np.append(lefts, rows[-1][1]), label=label, color=color)
    return True


def _mass_range(hists, tail: float = 0.005) -> Optional[tuple[float, float]]:
    """x-range holding all but ``tail`` of the weight at each end, over every series."""
    lo, hi = [], []
    for h in hists:
        rows = h.rows()
        if not rows or not h.total:
            continue
        cum = np.cumsum([r[2] for r in rows]) / h.total
        lo.append(rows[int(np.searchsorted(cum, tail))][0])
        hi.append(rows[min(int(np.searchsorted(cum, 1 - tail)), len(rows) - 1)][1])
    return (min(lo), max(hi)) if lo else None


def _draw(ax, hists: Mapping[str, Histogram]):
    for k, (label, h) in enumerate(hists.items()):
        _step(ax, h, label, total=h.total, color=f"C{k}")
    span = _mass_range(hists.values())
    if span:
        ax.set_xlim(*span)
    ax.set_ylim(bottom=0)


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches="tight")
    return path


def plot_distributions(hists: Mapping[str, Histogram], path, title: str = "", xlabel: str = "EUR / year") -> Path:
    """Overlaid weighted-share step histograms, one curve per series."""
    fig = Figure(figsize=(6.4, 4.0), dpi=STYLE["figure.dpi"], layout="constrained")
    ax = fig.subplots()
    _draw(ax, hists)
    ax.set_xlabel(xlabel, fontsize=STYLE["font.size"])
    ax.set_ylabel("share of households", fontsize=STYLE["font.size"])
    if title:
        ax.set_title(title, fontsize=STYLE["font.size"] + 1)
    ax.legend(fontsize=STYLE["font.size"] - 1, frameon=False)
    return _save(fig, path)


def dataset_histograms(ds: Dataset, cfg: NeedConfig, rules: Sequence[RuleSpec], bin_width: float) -> dict[str, Histogram]:
    w = ds.weights()
    out = {
        "income": histogram(ds.incomes(), w, bin_width),
        "need": histogram(ds.needs(cfg), w, bin_width),
    }
    for r in rules:
        h = allocation_histogram(ds, cfg, r, bin_width)
        # laissez faire reproduces the income histogram; draw it once under both names
        same = next((k for k, v in out.items() if v.bins == h.bins), None)
        if same is None:
            out[format_rule(r)] = h
        else:
            out[f"{same} = {format_rule(r)}"] = out.pop(same)
    return out


def plot_country_grid(ds: Dataset, cfg: NeedConfig, rules: Sequence[RuleSpec], bin_width: float, path) -> Path:
    countries = ds.countries
    if not countries:
        raise ValueError("dataset has no country tags")
    ncols = min(4, len(countries))
    nrows = -(-len(countries) // ncols)
    fig = Figure(figsize=(3.0 * ncols, 2.3 * nrows), dpi=STYLE["figure.dpi"], layout="constrained")
    axes = np.atleast_1d(fig.subplots(nrows, ncols, squeeze=False)).ravel()
    for ax, country in zip(axes, countries):
        _draw(ax, dataset_histograms(ds.select(country), cfg, rules, bin_width))
        ax.set_title(country, fontsize=STYLE["font.size"])
        ax.tick_params(labelsize=STYLE["font.size"] - 2)
    for ax in axes[len(countries):]:
        ax.set_visible(False)
    axes[0].legend(fontsize=STYLE["font.size"] - 2, frameon=False)
    return _save(fig, path)


def plot_lorenz(profiles: Mapping[str, LorenzProfile], path, title: str = "") -> Path:
    fig = Figure(figsize=(4.5, 4.5), dpi=STYLE["figure.dpi"])
    ax = fig.subplots()
    ax.plot([0, 1], [0, 1], color="0.7", lw=0.8, ls="--")
    for label, prof in profiles.items():
        pts = [(a, b) for a, b in prof.curve() if b is not None]
        if pts:
            xs, ys = zip(*pts)
            ax.plot(xs, ys, marker="o", ms=3, label=label)
    ax.set_xlabel("population share", fontsize=STYLE["font.size"])
    ax.set_ylabel("cumulative share", fontsize=STYLE["font.size"])
    if title:
        ax.set_title(title, fontsize=STYLE["font.size"] + 1)
    ax.legend(fontsize=STYLE["font.size"] - 1, frameon=False)
    return _save(fig, path)
