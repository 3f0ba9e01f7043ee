"""Seeded random problem generators shared by the searches and the test harnesses."""
from __future__ import annotations

import numpy as np

from .core import LambdaParams, Problem


def random_problem(rng: np.random.Generator, n: int, income_range=(-100.0, 100.0), need_max=100.0) -> Problem:
    """Continuous incomes in ``income_range`` and needs in ``[0, need_max]``."""
    y = rng.uniform(*income_range, size=n)
    z = rng.uniform(0.0, need_max, size=n)
    return Problem(y, z)


def dominated_problem(rng: np.random.Generator, n: int, need_max=100.0, slack_max=100.0) -> Problem:
    """A problem with ``y >= z`` componentwise, the premise of the lower bounds."""
    z = rng.uniform(0.0, need_max, size=n)
    y = z + rng.uniform(0.0, slack_max, size=n)
    return Problem(y, z)


def mixed_problem(rng: np.random.Generator, n: int) -> Problem:
    """Mixed discrete/continuous draw with frequent ties and agents exactly at a mean.

    About half the draws use small integers, which produce equal agents and
    (when the total divides evenly) agents sitting exactly at the average.
    Some draws then force a block of agents onto the mean income, mean need
    or mean net income.
    """
    style = rng.integers(0, 4)
    if style == 0:
        return random_problem(rng, n)
    y = rng.integers(-5, 11, size=n).astype(float)
    z = rng.integers(0, 6, size=n).astype(float)
    if style == 2:
        # uniform needs or uniform incomes
        if rng.random() < 0.5:
            z[:] = z[0]
        else:
            y[:] = y[0]
    elif style == 3:
        # pin k agents to integer means by fixing the remaining total
        k = int(rng.integers(1, n))
        target = rng.choice(["income", "need", "net"])
        m = float(rng.integers(0, 6))
        if target == "income":
            y[:k] = m
            y[k:] = _spread(rng, n - k, m * (n - k))
        elif target == "need":
            z[:k] = m
            z[k:] = np.abs(_spread(rng, n - k, m * (n - k)))
            z[k:] = _fix_nonneg_total(z[k:], m * (n - k))
        else:
            net = np.empty(n)
            net[:k] = m
            net[k:] = _spread(rng, n - k, m * (n - k))
            y = z + net
    return Problem(y, z)


def _spread(rng, count, total):
    """Integer vector of ``count`` entries summing exactly to ``total``."""
    v = rng.integers(-4, 5, size=count).astype(float)
    v[-1] += total - v.sum()
    return v


def _fix_nonneg_total(v, total):
    # needs must stay >= 0: rebalance the surplus away from the largest entries
    v = v.copy()
    diff = v.sum() - total
    while diff > 0:
        j = int(np.argmax(v))
        step = min(diff, v[j])
        v[j] -= step
        diff -= step
    if diff < 0:
        v[0] -= diff
    return v


def random_lambda(rng: np.random.Generator, bound: float = 2.0) -> LambdaParams:
    l1, l2 = rng.uniform(-bound, bound, size=2)
    return LambdaParams(float(l1), float(l2))
