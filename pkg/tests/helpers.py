"""Shared builders for randomized test instances and closed-form oracles."""

from __future__ import annotations

import math

import numpy as np

from ehsched import build_timeline


def random_timeline(rng, n_epochs=None, e_max_mode="mixed", static=False):
    """Random event timeline for solver tests.

    ``e_max_mode``: "inf", "tight", or "mixed" (random choice).  ``static``
    makes every interior event an energy arrival on a unit-gain channel.
    """
    n = int(n_epochs if n_epochs is not None else rng.integers(2, 13))
    lens = rng.uniform(0.2, 2.0, n)
    times = np.cumsum(lens)[:-1]
    horizon = float(np.sum(lens))
    e0 = float(rng.uniform(0.05, 3.0))

    if e_max_mode == "inf":
        e_max = math.inf
    elif e_max_mode == "tight":
        e_max = float(max(e0, 0.1) * rng.uniform(1.0, 2.5))
    else:
        e_max = math.inf if rng.random() < 0.5 else float(max(e0, 0.1) * rng.uniform(1.0, 2.5))

    arrivals = []
    fades = [(0.0, 1.0 if static else float(math.exp(rng.normal(0.0, 1.2))))]
    for t in times:
        if static or rng.random() < 0.5:
            arrivals.append((float(t), float(min(rng.uniform(0.05, 3.0), e_max))))
        else:
            fades.append((float(t), float(math.exp(rng.normal(0.0, 1.2)))))
    return build_timeline(horizon, e_max, e0, arrivals, fades)


def two_injection_scenario(e0=2.0, e1=2.0, t1=1.0, e_max=3.0, horizon=100.0):
    """One arrival on a static unit-gain channel; admits a closed-form curve."""
    return build_timeline(horizon, e_max, e0, arrivals=[(t1, e1)], fades=[(0.0, 1.0)])


def two_injection_curve(t, e0=2.0, e1=2.0, t1=1.0, e_max=3.0):
    """Closed-form maximum bits by deadline ``t`` for the scenario above.

    Theory rate (half log2).  Branches: constant drain of the initial
    energy; separate drains when the arrival's own level is higher; joint
    equal spread once equalization is feasible; and, past the point where
    the battery would overflow, a capped carry-over of ``e_max`` joules.
    Branch edges: ``t2 = e1*t1/e0 + t1`` and, when ``e0 + e1 > e_max``,
    ``t3 = t1*(e0+e1)/(e0+e1-e_max)`` (infinite otherwise).
    """
    if t <= 0.0:
        return 0.0
    t2 = e1 * t1 / e0 + t1
    t3 = t1 * (e0 + e1) / (e0 + e1 - e_max) if e0 + e1 > e_max else math.inf
    if t < t1:
        return 0.5 * t * math.log2(1.0 + e0 / t)
    if t <= t2:
        return 0.5 * t1 * math.log2(1.0 + e0 / t1) + 0.5 * (t - t1) * math.log2(
            1.0 + e1 / (t - t1)
        )
    if t < t3:
        return 0.5 * t * math.log2(1.0 + (e0 + e1) / t)
    return 0.5 * t1 * math.log2(1.0 + (e0 + e1 - e_max) / t1) + 0.5 * (t - t1) * math.log2(
        1.0 + e_max / (t - t1)
    )
