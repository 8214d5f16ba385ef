"""Timeline construction, epoch derivation and feasibility checking."""

import math

import numpy as np
import pytest

from ehsched import PowerSchedule, build_timeline, check_feasibility
from ehsched.errors import (
    ArrivalExceedsCapacity,
    DuplicateEventTime,
    EventBeyondHorizon,
    LengthMismatch,
    MissingInitialFade,
    NonPositiveHorizon,
)
from ehsched.timeline import timeline_from_json, timeline_to_json

from helpers import random_timeline


def test_single_epoch_no_events():
    tl = build_timeline(horizon=2, e_max=10, initial_energy=4, arrivals=[], fades=[(0, 1)])
    assert tl.n_epochs == 1
    assert tl.lengths == (2.0,)
    assert tl.injections == (4.0,)


def test_single_split_point():
    tl = build_timeline(2, 10, 1, arrivals=[(1, 3)], fades=[(0, 1)])
    assert tl.lengths == (1.0, 1.0)
    assert tl.injections == (1.0, 3.0)


def test_boundaries_enumerated_by_hand():
    # events at {0, 1, 2}, horizon 3 -> epochs [0,1), [1,2), [2,3)
    tl = build_timeline(3, 10, 1, arrivals=[(1, 2)], fades=[(0, 1), (2, 4)])
    assert tl.lengths == (1.0, 1.0, 1.0)
    assert tl.fade_levels == (1.0, 1.0, 4.0)
    assert tl.injections == (1.0, 2.0, 0.0)


def test_coincident_arrival_and_fade_make_one_boundary():
    tl = build_timeline(3, 10, 1, arrivals=[(1, 2)], fades=[(0, 1), (1, 4)])
    assert tl.n_epochs == 2
    assert tl.epochs[1].fade == 4.0
    assert tl.epochs[1].injected == 2.0


def test_construction_errors():
    with pytest.raises(NonPositiveHorizon):
        build_timeline(0, 10, 1, [], [(0, 1)])
    with pytest.raises(ArrivalExceedsCapacity):
        build_timeline(2, 1, 0.5, [(1, 1.5)], [(0, 1)])
    with pytest.raises(DuplicateEventTime):
        build_timeline(2, 10, 1, [(1, 1), (1, 2)], [(0, 1)])
    with pytest.raises(DuplicateEventTime):
        # an arrival at t=0 collides with the initial-energy event
        build_timeline(2, 10, 1, [(0, 1)], [(0, 1)])
    with pytest.raises(EventBeyondHorizon):
        build_timeline(2, 10, 1, [(2, 1)], [(0, 1)])
    with pytest.raises(EventBeyondHorizon):
        build_timeline(2, 10, 1, [], [(0, 1), (2.5, 2)])
    with pytest.raises(MissingInitialFade):
        build_timeline(2, 10, 1, [], [(0.5, 1)])
    with pytest.raises(ValueError):
        build_timeline(2, 10, 1, [(1, -2)], [(0, 1)])
    with pytest.raises(ValueError):
        build_timeline(2, 10, 1, [], [(0, -1)])


def test_initial_energy_may_exceed_capacity():
    # the battery limit binds at arrivals, not at the given initial state
    tl = build_timeline(2, 2, 3, arrivals=[(1, 2)], fades=[(0, 1)])
    assert tl.initial_energy == 3.0


def test_tiling_property():
    rng = np.random.default_rng(42)
    for _ in range(50):
        tl = random_timeline(rng)
        starts = sorted(
            {0.0} | {a.time for a in tl.arrivals} | {f.time for f in tl.fades}
        )
        assert [ep.start for ep in tl.epochs] == starts
        assert math.isclose(sum(tl.lengths), tl.horizon, rel_tol=1e-12)


# ── feasibility ──────────────────────────────────────────────────────────────


def _two_epoch(e_in, e_max=10.0):
    return build_timeline(2, e_max, e_in[0], arrivals=[(1, e_in[1])], fades=[(0, 1)])


def test_feasible_schedule_prefix_sums():
    rep = check_feasibility(_two_epoch([1, 3]), PowerSchedule((1.0, 3.0)))
    assert rep.feasible
    assert rep.causality_slack == (0.0, 0.0)
    assert rep.cumulative_consumption == (1.0, 4.0)
    assert rep.cumulative_injection == (1.0, 4.0)


def test_causality_violation():
    rep = check_feasibility(_two_epoch([1, 3]), PowerSchedule((2.0, 2.0)))
    assert not rep.feasible
    assert rep.causality_slack[0] == -1.0


def test_battery_overflow_at_arrival():
    rep = check_feasibility(_two_epoch([3, 2], e_max=2.0), PowerSchedule((2.5, 2.5)))
    assert not rep.feasible
    # battery right after the arrival: 3 - 2.5 + 2 = 2.5 > 2
    assert math.isclose(rep.capacity_slack[0], -0.5)


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        check_feasibility(_two_epoch([1, 3]), PowerSchedule((1.0,)))


def test_zero_schedule_feasibility():
    # The all-zeros schedule never violates causality.  Its storage slack
    # uses the same unconsumed-prefix convention as the optimization
    # program, so it can overflow once cumulative arrivals pass e_max;
    # with an unbounded battery it is feasible outright.
    rng = np.random.default_rng(7)
    for _ in range(30):
        tl = random_timeline(rng)
        rep = check_feasibility(tl, PowerSchedule((0.0,) * tl.n_epochs))
        assert all(s >= 0.0 for s in rep.causality_slack)
    for _ in range(10):
        tl = random_timeline(rng, e_max_mode="inf")
        rep = check_feasibility(tl, PowerSchedule((0.0,) * tl.n_epochs))
        assert rep.feasible


def test_scaling_preserves_causality():
    rng = np.random.default_rng(11)
    for _ in range(30):
        tl = random_timeline(rng)
        # a feasible schedule: drain whatever is available in each epoch
        powers = []
        battery = 0.0
        for ep in tl.epochs:
            battery = min(battery + ep.injected, tl.e_max)
            use = 0.7 * battery
            powers.append(use / ep.length)
            battery -= use
        alpha = rng.uniform(0.0, 1.0)
        scaled = PowerSchedule(tuple(alpha * p for p in powers))
        rep = check_feasibility(tl, scaled)
        assert all(s >= -rep.tol for s in rep.causality_slack)


# ── scenario JSON ────────────────────────────────────────────────────────────


def test_json_round_trip():
    tl = build_timeline(3, 10, 1, arrivals=[(1, 2)], fades=[(0, 1), (2, 4)])
    obj = timeline_to_json(tl)
    tl2 = timeline_from_json(obj)
    assert tl2 == tl


def test_json_rejects_unknown_fields():
    obj = timeline_to_json(build_timeline(2, 10, 1, [], [(0, 1)]))
    obj["battery_mj"] = 3
    with pytest.raises(ValueError, match="unknown scenario fields"):
        timeline_from_json(obj)


def test_json_rejects_missing_and_malformed():
    obj = timeline_to_json(build_timeline(2, 10, 1, [], [(0, 1)]))
    del obj["horizon_s"]
    with pytest.raises(ValueError, match="missing scenario fields"):
        timeline_from_json(obj)
    obj2 = timeline_to_json(build_timeline(2, 10, 1, [(1, 1)], [(0, 1)]))
    obj2["arrivals"][0]["joules"] = obj2["arrivals"][0].pop("e_j")
    with pytest.raises(ValueError, match="t_s and e_j"):
        timeline_from_json(obj2)
