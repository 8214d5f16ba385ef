"""Maximum departure curve and completion-time minimization.

``departure_at(scenario, t)`` is the largest number of bits deliverable by
the deadline ``t`` under the scenario's events: the offline optimum on the
timeline truncated to horizon ``t`` (events at times >= t dropped, matching
the convention that an arrival is usable only strictly after its instant).
The curve is continuous and nondecreasing in ``t``, so the minimum time to
deliver a bit target is found by scanning event boundaries for the first
bracket and bisecting inside it; bisection keeps the left endpoint of any
flat stretch, which is the minimal root.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from .errors import NegativeTarget, NegativeTime, TargetUnreachable
from .offline import waterfill
from .rate import THEORY, RateModel
from .timeline import EventTimeline, PowerSchedule, truncate

#: Default bisection width on the time axis, seconds.
TIME_TOL = 1e-6

#: Floor for the bit tolerance implied by the time tolerance.
BITS_TOL_FLOOR = 1e-9


@dataclass(frozen=True)
class CompletionResult:
    t_star: float
    bits_target: float
    schedule: PowerSchedule
    bracket: tuple[float, float]
    bits_at_t_star: float


@dataclass
class DepartureCurve:
    """Evaluation cache around ``departure_at`` for one scenario.

    Safe for concurrent evaluation: the cache insert is guarded by a lock
    and evaluations themselves are pure.
    """

    scenario: EventTimeline
    rate: RateModel = THEORY
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def at(self, t: float) -> float:
        key = float(t)
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        val = departure_at(self.scenario, t, self.rate)
        with self._lock:
            self._cache[key] = val
        return val


def departure_at(scenario: EventTimeline, t: float, rate: RateModel = THEORY) -> float:
    """Maximum bits deliverable by deadline ``t``; zero at ``t == 0``."""
    if t < 0:
        raise NegativeTime(f"deadline must be >= 0, got {t}")
    if t == 0.0:
        return 0.0
    return waterfill(truncate(scenario, t), rate).objective_bits


def sample_curve(scenario: EventTimeline, t_grid, rate: RateModel = THEORY):
    """Evaluate the curve on a sorted grid; returns a list of (t, bits)."""
    prev = None
    out = []
    for t in t_grid:
        if prev is not None and t < prev:
            raise ValueError("grid must be sorted ascending")
        prev = t
        out.append((float(t), departure_at(scenario, float(t), rate)))
    return out


def min_completion_time(
    scenario: EventTimeline,
    bits_target: float,
    rate: RateModel = THEORY,
    tol: float = TIME_TOL,
) -> CompletionResult:
    """Minimal ``t`` with ``departure_at(t) == bits_target``.

    Scans epoch boundaries (extending past the recorded horizon by doubling
    if the target is not reached within it) for the earliest bracket, then
    bisects.  Raises ``TargetUnreachable`` when the event stream cannot
    deliver the target even with unlimited time.
    """
    if bits_target < 0:
        raise NegativeTarget(f"bit target must be >= 0, got {bits_target}")
    curve = DepartureCurve(scenario, rate)
    if bits_target == 0.0:
        return CompletionResult(0.0, 0.0, PowerSchedule(()), (0.0, 0.0), 0.0)

    # Bits are at most nat_scale * h * E even with everything in the best fade.
    total = scenario.total_injected
    h_max = max(scenario.fade_levels)
    if bits_target > rate.nat_scale * h_max * total * (1.0 + 1e-12):
        raise TargetUnreachable(
            f"target {bits_target} bits exceeds the hard limit "
            f"{rate.nat_scale * h_max * total} for this event stream"
        )

    boundaries = sorted(
        {a.time for a in scenario.arrivals}
        | {f.time for f in scenario.fades}
        | {scenario.horizon}
    )
    boundaries = [b for b in boundaries if b > 0.0]

    lo, d_lo = 0.0, 0.0
    hi = d_hi = None
    for b in boundaries:
        d_b = curve.at(b)
        if d_b >= bits_target:
            hi, d_hi = b, d_b
            break
        lo, d_lo = b, d_b
    if hi is None:
        # Extend past the last event; the curve keeps rising toward a finite
        # asymptote, so stagnating growth means the target is unreachable.
        t_ext = max(lo, 1.0)
        for _ in range(200):
            t_ext *= 2.0
            d_ext = curve.at(t_ext)
            if d_ext >= bits_target:
                hi, d_hi = t_ext, d_ext
                break
            if d_ext - d_lo <= 1e-12 * max(1.0, bits_target):
                raise TargetUnreachable(
                    f"departure curve saturates near {d_ext} bits, "
                    f"below the target {bits_target}"
                )
            lo, d_lo = t_ext, d_ext
        if hi is None:
            raise TargetUnreachable("target not reached within the doubling budget")

    bracket = (lo, hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if curve.at(mid) >= bits_target:
            hi = mid
        else:
            lo = mid
    t_star = hi
    bits_at = curve.at(t_star)
    schedule = waterfill(truncate(scenario, t_star), rate).schedule
    return CompletionResult(t_star, bits_target, schedule, bracket, bits_at)
