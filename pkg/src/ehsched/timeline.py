"""Event timeline: energy arrivals, fade changes and the epochs they induce.

A realization of the system is an ordered set of events on ``[0, horizon)``:
energy arrivals ``(t, joules)`` and fade changes ``(t, level)``.  Consecutive
events partition the horizon into epochs; transmit power is constant within
an epoch.  This module builds that partition, validates it, and checks power
schedules against the two physical constraints:

* causality -- energy cannot be consumed before it arrives; evaluated just
  before each arrival instant (the arrival itself is excluded);
* storage -- the battery level immediately after an arrival is inserted may
  not exceed ``e_max``.

An arrival and a fade change at the same instant produce a single epoch
boundary with both effects applied.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import (
    ArrivalExceedsCapacity,
    DuplicateEventTime,
    EventBeyondHorizon,
    LengthMismatch,
    MissingInitialFade,
    NonPositiveHorizon,
)

#: Default slack tolerance, in joules, for feasibility verdicts.
FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class EnergyArrival:
    time: float
    amount: float


@dataclass(frozen=True)
class FadeChange:
    time: float
    level: float


@dataclass(frozen=True)
class Epoch:
    start: float
    length: float
    fade: float
    injected: float

    @property
    def end(self) -> float:
        return self.start + self.length


@dataclass(frozen=True)
class EventTimeline:
    """Immutable realization: events plus the derived epoch partition."""

    horizon: float
    e_max: float
    initial_energy: float
    arrivals: tuple[EnergyArrival, ...]
    fades: tuple[FadeChange, ...]
    epochs: tuple[Epoch, ...] = field(repr=False)

    @property
    def n_epochs(self) -> int:
        return len(self.epochs)

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(e.length for e in self.epochs)

    @property
    def fade_levels(self) -> tuple[float, ...]:
        return tuple(e.fade for e in self.epochs)

    @property
    def injections(self) -> tuple[float, ...]:
        return tuple(e.injected for e in self.epochs)

    @property
    def total_injected(self) -> float:
        return sum(e.injected for e in self.epochs)


@dataclass(frozen=True)
class PowerSchedule:
    """Per-epoch constant transmit powers, in watts."""

    powers: tuple[float, ...]

    def __post_init__(self):
        if any(p < 0 for p in self.powers):
            raise ValueError("powers must be nonnegative")

    def water_levels(self, timeline: EventTimeline, zero_tol: float = 0.0):
        """Implied water level ``p_i + 1/h_i`` per epoch; NaN where p_i == 0."""
        if len(self.powers) != timeline.n_epochs:
            raise LengthMismatch("schedule length differs from epoch count")
        out = []
        for p, ep in zip(self.powers, timeline.epochs):
            out.append(p + 1.0 / ep.fade if p > zero_tol else float("nan"))
        return tuple(out)


@dataclass(frozen=True)
class FeasibilityReport:
    """Per-prefix constraint slacks and the overall verdict.

    ``causality_slack[l]`` is injected-minus-consumed energy over epochs
    ``0..l``; negative means energy was used before it arrived.
    ``capacity_slack[l]`` is the battery headroom right after the injection
    at the start of epoch ``l+1`` (for the last prefix, at the horizon);
    negative means the battery would have to overflow.
    """

    cumulative_consumption: tuple[float, ...]
    cumulative_injection: tuple[float, ...]
    causality_slack: tuple[float, ...]
    capacity_slack: tuple[float, ...]
    tol: float
    feasible: bool

    def worst_slack(self) -> float:
        return min(min(self.causality_slack), min(self.capacity_slack))


def _as_arrivals(items: Iterable) -> list[EnergyArrival]:
    out = []
    for it in items:
        if isinstance(it, EnergyArrival):
            out.append(it)
        else:
            t, amount = it
            out.append(EnergyArrival(float(t), float(amount)))
    return out


def _as_fades(items: Iterable) -> list[FadeChange]:
    out = []
    for it in items:
        if isinstance(it, FadeChange):
            out.append(it)
        else:
            t, level = it
            out.append(FadeChange(float(t), float(level)))
    return out


def build_timeline(
    horizon: float,
    e_max: float,
    initial_energy: float,
    arrivals: Iterable = (),
    fades: Iterable = ((0.0, 1.0),),
) -> EventTimeline:
    """Validate events and derive the epoch partition of ``[0, horizon)``.

    ``arrivals`` holds ``(time, joules)`` pairs with ``0 < time < horizon``;
    the energy available at t=0 goes in ``initial_energy``.  ``fades`` holds
    ``(time, level)`` pairs and must open with the level at t=0.  Both lists
    are sorted internally; duplicate times within one list are rejected.
    """
    horizon = float(horizon)
    e_max = float(e_max)
    initial_energy = float(initial_energy)
    if horizon <= 0:
        raise NonPositiveHorizon(f"horizon must be > 0, got {horizon}")
    if e_max <= 0:
        raise ValueError(f"e_max must be > 0, got {e_max}")
    if initial_energy < 0:
        raise ValueError("initial energy must be nonnegative")
    # initial_energy may exceed e_max: the battery level at t=0 is given,
    # and the storage limit binds only at arrival instants.

    arr = sorted(_as_arrivals(arrivals), key=lambda a: a.time)
    fad = sorted(_as_fades(fades), key=lambda f: f.time)

    for a in arr:
        if a.amount <= 0:
            raise ValueError(f"arrival amount must be > 0, got {a.amount}")
        if a.amount > e_max:
            raise ArrivalExceedsCapacity(
                f"arrival of {a.amount} J exceeds battery capacity {e_max} J"
            )
        if a.time >= horizon:
            raise EventBeyondHorizon(f"arrival at t={a.time} >= horizon {horizon}")
        if a.time == 0.0:
            raise DuplicateEventTime(
                "arrival at t=0 collides with the initial-energy event; "
                "fold it into initial_energy"
            )
        if a.time < 0:
            raise ValueError("arrival time must be >= 0")
    for t1, t2 in zip(arr, arr[1:]):
        if t1.time == t2.time:
            raise DuplicateEventTime(f"two arrivals at t={t1.time}")

    if not fad or fad[0].time != 0.0:
        raise MissingInitialFade("fades must open with an entry at t=0")
    for f in fad:
        if f.level <= 0:
            raise ValueError(f"fade level must be > 0, got {f.level}")
        if f.time >= horizon:
            raise EventBeyondHorizon(f"fade change at t={f.time} >= horizon {horizon}")
        if f.time < 0:
            raise ValueError("fade time must be >= 0")
    for f1, f2 in zip(fad, fad[1:]):
        if f1.time == f2.time:
            raise DuplicateEventTime(f"two fade changes at t={f1.time}")

    # Epoch boundaries: t=0, every event time, the horizon.  Coincident
    # arrival+fade instants merge into one boundary.
    boundaries = sorted({0.0} | {a.time for a in arr} | {f.time for f in fad})
    amount_at = {a.time: a.amount for a in arr}

    epochs = []
    fade_idx = 0
    for i, start in enumerate(boundaries):
        end = boundaries[i + 1] if i + 1 < len(boundaries) else horizon
        while fade_idx + 1 < len(fad) and fad[fade_idx + 1].time <= start:
            fade_idx += 1
        injected = amount_at.get(start, 0.0)
        if i == 0:
            injected += initial_energy
        epochs.append(Epoch(start, end - start, fad[fade_idx].level, injected))

    return EventTimeline(
        horizon=horizon,
        e_max=e_max,
        initial_energy=initial_energy,
        arrivals=tuple(arr),
        fades=tuple(fad),
        epochs=tuple(epochs),
    )


def check_feasibility(
    timeline: EventTimeline,
    schedule: PowerSchedule | Sequence[float],
    tol: float = FEASIBILITY_TOL,
) -> FeasibilityReport:
    """Evaluate causality and storage slacks of a schedule, prefix by prefix."""
    powers = schedule.powers if isinstance(schedule, PowerSchedule) else tuple(schedule)
    n = timeline.n_epochs
    if len(powers) != n:
        raise LengthMismatch(f"schedule has {len(powers)} powers for {n} epochs")

    consumed = []
    injected = []
    c = inj = 0.0
    for ep, p in zip(timeline.epochs, powers):
        c += ep.length * p
        inj += ep.injected
        consumed.append(c)
        injected.append(inj)

    causality = tuple(injected[l] - consumed[l] for l in range(n))
    capacity = []
    for l in range(n):
        if l + 1 < n:
            peak = injected[l + 1] - consumed[l]
        else:
            peak = injected[l] - consumed[l]
        capacity.append(timeline.e_max - peak)
    capacity = tuple(capacity)

    feasible = all(s >= -tol for s in causality) and all(s >= -tol for s in capacity)
    return FeasibilityReport(
        cumulative_consumption=tuple(consumed),
        cumulative_injection=tuple(injected),
        causality_slack=causality,
        capacity_slack=capacity,
        tol=tol,
        feasible=feasible,
    )


# -- scenario JSON -------------------------------------------------------------

_SCENARIO_FIELDS = {"horizon_s", "e_max_j", "initial_energy_j", "arrivals", "fades"}
_OPTIONAL_FIELDS = {"fading", "energy"}


def timeline_from_json(obj: dict) -> EventTimeline:
    """Build a timeline from a scenario dict; unknown fields are rejected.

    The optional ``fading``/``energy`` model blocks are tolerated here (they
    belong to the distribution layer) and ignored.
    """
    unknown = set(obj) - _SCENARIO_FIELDS - _OPTIONAL_FIELDS
    if unknown:
        raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
    missing = _SCENARIO_FIELDS - set(obj)
    if missing:
        raise ValueError(f"missing scenario fields: {sorted(missing)}")

    arrivals = []
    for ent in obj["arrivals"]:
        if set(ent) != {"t_s", "e_j"}:
            raise ValueError(f"arrival entries need exactly t_s and e_j, got {sorted(ent)}")
        arrivals.append((float(ent["t_s"]), float(ent["e_j"])))
    fades = []
    for ent in obj["fades"]:
        if set(ent) != {"t_s", "h"}:
            raise ValueError(f"fade entries need exactly t_s and h, got {sorted(ent)}")
        fades.append((float(ent["t_s"]), float(ent["h"])))

    return build_timeline(
        horizon=float(obj["horizon_s"]),
        e_max=float(obj["e_max_j"]),
        initial_energy=float(obj["initial_energy_j"]),
        arrivals=arrivals,
        fades=fades,
    )


def timeline_to_json(timeline: EventTimeline) -> dict:
    return {
        "horizon_s": timeline.horizon,
        "e_max_j": timeline.e_max,
        "initial_energy_j": timeline.initial_energy,
        "arrivals": [{"t_s": a.time, "e_j": a.amount} for a in timeline.arrivals],
        "fades": [{"t_s": f.time, "h": f.level} for f in timeline.fades],
    }


def truncate(timeline: EventTimeline, t: float) -> EventTimeline:
    """Restrict (or extend) a timeline to the horizon ``t``.

    Events at times >= t are dropped; an arrival exactly at ``t`` is excluded
    because nothing after the horizon can consume it.  For ``t`` beyond the
    recorded horizon the event set is kept and the last epoch stretches.
    """
    if t <= 0:
        raise NonPositiveHorizon(f"truncation point must be > 0, got {t}")
    return build_timeline(
        horizon=t,
        e_max=timeline.e_max,
        initial_energy=timeline.initial_energy,
        arrivals=[a for a in timeline.arrivals if a.time < t],
        fades=[f for f in timeline.fades if f.time < t],
    )
