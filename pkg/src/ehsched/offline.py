"""Offline throughput maximization over a known event timeline.

``waterfill`` computes the optimal per-epoch powers by directional
water-filling: epochs between consecutive energy arrivals form segments
that share water freely; at each arrival sits a wall whose tap lets water
pass left-to-right only, and at most ``e_max - injected`` joules may ever
cross it (more would overflow the battery at the arrival instant).

The solver initializes each segment with conventional water-filling of its
own injection and then sweeps the walls, each step moving the exact
transfer that equalizes the two adjacent segment levels, clamped to the
tap bounds.  Adjacent sweeps alone can stall when water must pass through
a segment that ends up dry (its bases sit above both neighbors' levels):
no single tap movement helps although moving water across the whole run
does.  When the adjacent sweeps settle, the solver therefore scans
segment pairs and moves water through entire runs of taps at once,
clamped by the smallest remaining tap headroom along the run; pairs whose
intermediate segments would themselves claim the water are skipped in
favor of their shorter sub-chains.  Every update is an exact pairwise
equalization, the objective increases monotonically, and a state with no
improving chain is the global optimum of this concave program.

``oracle_solve`` solves the same program with a generic interior-point
method (no water-filling structure) and serves as ground truth in tests.
``verify_kkt`` checks the stationarity structure of any feasible schedule
and certifies optimality.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyEnergy, LengthMismatch, NoConvergence
from .rate import THEORY, RateModel
from .timeline import EventTimeline, FeasibilityReport, PowerSchedule, check_feasibility

#: Per-pass level movement below which the sweep is considered converged.
LEVEL_TOL = 1e-10

#: Slack below which a constraint counts as tight when certifying.
TIGHT_TOL = 1e-7


@dataclass(frozen=True)
class WaterfillSolution:
    schedule: PowerSchedule
    water_levels: tuple[float, ...]
    wall_epochs: tuple[int, ...]
    tap_transfers: tuple[float, ...]
    objective_bits: float
    passes: int
    converged: bool


@dataclass(frozen=True)
class SegmentReport:
    first_epoch: int
    last_epoch: int
    level: float
    has_power: bool
    level_spread: float
    ok: bool


@dataclass(frozen=True)
class WallReport:
    epoch: int
    carried_j: float
    causality_tight: bool
    capacity_tight: bool
    level_before: float
    level_after: float
    ok: bool


@dataclass(frozen=True)
class KktCertificate:
    feasible: bool
    terminal_tight: bool
    segment_report: tuple[SegmentReport, ...]
    wall_report: tuple[WallReport, ...]
    optimal: bool


def throughput(
    timeline: EventTimeline,
    schedule: PowerSchedule | "np.ndarray",
    rate: RateModel = THEORY,
) -> float:
    """Total bits delivered by a schedule: sum of L_i * rate(p_i, h_i)."""
    powers = schedule.powers if isinstance(schedule, PowerSchedule) else schedule
    powers = np.asarray(powers, dtype=float)
    if powers.shape != (timeline.n_epochs,):
        raise LengthMismatch(f"{powers.shape[0]} powers for {timeline.n_epochs} epochs")
    lengths = np.asarray(timeline.lengths)
    fades = np.asarray(timeline.fade_levels)
    return float(np.sum(lengths * rate.bits_per_second(powers, fades)))


# ── flooding primitives ─────────────────────────────────────────────────────


class _SortedBins:
    """Epochs of one segment, presorted by base, with prefix sums.

    Supports exact O(log m) flooding queries: the common level reached by a
    given amount of water, and the water needed to reach a given level.
    """

    __slots__ = ("bases", "cum_len", "cum_lb", "fill_caps")

    def __init__(self, lengths, bases):
        pairs = sorted(zip(bases, lengths))
        self.bases = [b for b, _ in pairs]
        cum_len = []
        cum_lb = []
        acc_l = acc_lb = 0.0
        for b, ln in pairs:
            acc_l += ln
            acc_lb += ln * b
            cum_len.append(acc_l)
            cum_lb.append(acc_lb)
        self.cum_len = cum_len
        self.cum_lb = cum_lb
        # water that exactly floods the first j+1 bins up to base j+1
        self.fill_caps = [
            cum_len[j] * self.bases[j + 1] - cum_lb[j] for j in range(len(pairs) - 1)
        ]

    def level(self, water: float) -> float:
        if water <= 0.0:
            return self.bases[0]
        j = bisect.bisect_left(self.fill_caps, water)
        return (water + self.cum_lb[j]) / self.cum_len[j]

    def need(self, level: float) -> float:
        """Water required to raise this segment to ``level``."""
        j = bisect.bisect_right(self.bases, level)
        if j == 0:
            return 0.0
        return self.cum_len[j - 1] * level - self.cum_lb[j - 1]


def flood_level(lengths, bases, water: float) -> float:
    """Level ``v`` with ``sum L_i (v - b_i)^+ == water`` (min base if water=0)."""
    return _SortedBins(list(map(float, lengths)), list(map(float, bases))).level(water)


# ── directional water-filling ───────────────────────────────────────────────


def waterfill(
    timeline: EventTimeline,
    rate: RateModel = THEORY,
    level_tol: float = LEVEL_TOL,
    max_passes: int | None = None,
) -> WaterfillSolution:
    """Optimal offline schedule by directional water-filling.

    The returned schedule is feasible, consumes every injected joule
    (nothing is wasted offline because the tap caps prevent overflow) and
    satisfies ``p_i = (v_i - 1/h_i)^+`` with a common level per segment.
    """
    n = timeline.n_epochs
    lengths = [ep.length for ep in timeline.epochs]
    bases = [1.0 / ep.fade for ep in timeline.epochs]
    inj = list(timeline.injections)
    total = sum(inj)
    if total <= 0.0:
        raise EmptyEnergy("no energy is ever injected")

    wall_epochs = [i for i in range(1, n) if inj[i] > 0.0]
    starts = [0] + wall_epochs
    ends = wall_epochs + [n]
    n_seg = len(starts)
    segs = [
        _SortedBins(lengths[a:b], bases[a:b]) for a, b in zip(starts, ends)
    ]
    pairs = [
        _SortedBins(lengths[a:b], bases[a:b])
        for a, b in zip(starts[:-1], ends[1:])
    ]
    own = [inj[a] for a in starts]
    caps = [timeline.e_max - inj[i] for i in wall_epochs]

    transfers = [0.0] * (n_seg - 1)

    def seg_water(s: int) -> float:
        w = own[s]
        if s > 0:
            w += transfers[s - 1]
        if s < n_seg - 1:
            w -= transfers[s]
        return w

    def update_wall(w: int) -> float:
        """Move the transfer at wall ``w`` to the pairwise optimum; returns |dx|."""
        pool_l = own[w] + (transfers[w - 1] if w > 0 else 0.0)
        out_r = transfers[w + 1] if w + 1 < n_seg - 1 else 0.0
        level = pairs[w].level(pool_l + own[w + 1] - out_r)
        t = pool_l - segs[w].need(level)
        t_lo = max(0.0, out_r - own[w + 1])
        t_hi = min(caps[w], pool_l)
        t = min(max(t, t_lo), t_hi)
        dx = abs(t - transfers[w])
        transfers[w] = t
        return dx

    if max_passes is None:
        max_passes = 2000 + 200 * n_seg
    transfer_tol = 1e-12 * max(1.0, total)
    dry_tol = 1e-15 * max(1.0, total)
    union_cache: dict[tuple[int, int], _SortedBins] = {}

    def union_bins(i: int, j: int) -> _SortedBins:
        key = (i, j)
        bins = union_cache.get(key)
        if bins is None:
            a_i, b_i = starts[i], ends[i]
            a_j, b_j = starts[j], ends[j]
            bins = _SortedBins(
                lengths[a_i:b_i] + lengths[a_j:b_j],
                bases[a_i:b_i] + bases[a_j:b_j],
            )
            union_cache[key] = bins
        return bins

    levels = [segs[s].level(seg_water(s)) for s in range(n_seg)]

    def rebalance(i: int, j: int) -> float:
        """Equalize segments i < j through the run of taps between them.

        The move is skipped when an intermediate segment sits below the
        joint flood level (it would claim the water itself; the shorter
        sub-chain handles it), and clamped by the smallest tap headroom
        along the run (forward) or smallest current transfer (backward).
        Returns the amount moved.
        """
        w_i = seg_water(i)
        w_j = seg_water(j)
        level = union_bins(i, j).level(w_i + w_j)
        if j > i + 1:
            slack = 1e-9 * max(1.0, level)
            if any(levels[m] < level - slack for m in range(i + 1, j)):
                return 0.0
        delta = w_i - segs[i].need(level)
        fwd = min(caps[w] - transfers[w] for w in range(i, j))
        back = min(transfers[w] for w in range(i, j))
        delta = min(max(delta, -min(w_j, back)), min(w_i, fwd))
        if delta == 0.0:
            return 0.0
        for w in range(i, j):
            transfers[w] += delta
        levels[i] = segs[i].level(seg_water(i))
        levels[j] = segs[j].level(seg_water(j))
        return abs(delta)

    def dry_run_pairs():
        """Pairs (i, j) spanning maximal runs of currently dry segments."""
        out = []
        m = 1
        while m < n_seg - 1:
            if seg_water(m) <= dry_tol:
                a = m
                while m < n_seg - 1 and seg_water(m) <= dry_tol:
                    m += 1
                if m < n_seg:
                    out.append((a - 1, m))
            else:
                m += 1
        return out

    passes = 0
    converged = n_seg <= 1
    while passes < max_passes and not converged:
        passes += 1
        max_dx = 0.0
        for w in range(n_seg - 1):
            max_dx = max(max_dx, update_wall(w))
        for w in range(n_seg - 2, -1, -1):
            max_dx = max(max_dx, update_wall(w))
        for i, j in dry_run_pairs():
            max_dx = max(max_dx, rebalance(i, j))
        new_levels = [segs[s].level(seg_water(s)) for s in range(n_seg)]
        max_dlevel = max(
            (abs(a - b) for a, b in zip(new_levels, levels)), default=0.0
        )
        levels = new_levels
        scale = max(1.0, max(levels))
        if max_dx <= transfer_tol and max_dlevel <= level_tol * scale:
            converged = True

    if n_seg > 1:
        # Safety net for stalls that dry runs do not cover: scan all pairs;
        # if anything moves, resume sweeping.
        for _ in range(8):
            moved = 0.0
            for i in range(n_seg - 1):
                for j in range(i + 1, n_seg):
                    moved = max(moved, rebalance(i, j))
            if moved <= transfer_tol:
                break
            converged = False
            sweeps = 0
            while sweeps < max_passes:
                sweeps += 1
                passes += 1
                max_dx = 0.0
                for w in range(n_seg - 1):
                    max_dx = max(max_dx, update_wall(w))
                for w in range(n_seg - 2, -1, -1):
                    max_dx = max(max_dx, update_wall(w))
                for i, j in dry_run_pairs():
                    max_dx = max(max_dx, rebalance(i, j))
                levels = [segs[s].level(seg_water(s)) for s in range(n_seg)]
                if max_dx <= transfer_tol:
                    converged = True
                    break

    epoch_levels = np.empty(n)
    for s, (a, b) in enumerate(zip(starts, ends)):
        epoch_levels[a:b] = levels[s]
    powers = np.clip(epoch_levels - np.asarray(bases), 0.0, None)
    schedule = PowerSchedule(tuple(powers.tolist()))

    return WaterfillSolution(
        schedule=schedule,
        water_levels=tuple(epoch_levels.tolist()),
        wall_epochs=tuple(wall_epochs),
        tap_transfers=tuple(transfers),
        objective_bits=throughput(timeline, schedule, rate),
        passes=passes,
        converged=converged,
    )


# ── generic convex-programming oracle ───────────────────────────────────────


def oracle_solve(timeline: EventTimeline, tol: float = 1e-9) -> PowerSchedule:
    """Solve the throughput program with a generic interior-point method.

    Maximizes ``sum L_i log(1 + h_i p_i)`` subject to the prefix causality
    and battery-capacity constraints, with no reference to water-filling
    structure; used as independent ground truth.  The result is feasible to
    solver tolerance (causality is additionally repaired exactly by a
    battery pass).
    """
    from cvxopt import matrix, solvers

    n = timeline.n_epochs
    lengths = np.asarray(timeline.lengths)
    fades = np.asarray(timeline.fade_levels)
    inj = np.asarray(timeline.injections)
    if inj.sum() <= 0:
        raise EmptyEnergy("no energy is ever injected")
    cum_inj = np.cumsum(inj)

    tri = np.tril(np.ones((n, n))) * lengths[None, :]
    rows = [tri[l] for l in range(n)]
    rhs = [cum_inj[l] for l in range(n)]
    if math.isfinite(timeline.e_max):
        for l in range(n - 1):
            rows.append(-tri[l])
            rhs.append(timeline.e_max - cum_inj[l + 1])
    for i in range(n):
        e = np.zeros(n)
        e[i] = -1.0
        rows.append(e)
        rhs.append(0.0)
    g_mat = matrix(np.array(rows))
    h_vec = matrix(np.array(rhs))

    def objective(x=None, z=None):
        if x is None:
            return 0, matrix(np.zeros(n))
        p = np.array(x).ravel()
        if np.any(1.0 + fades * p <= 0.0):
            return None
        val = -float(np.sum(lengths * np.log1p(fades * p)))
        grad = -(lengths * fades) / (1.0 + fades * p)
        if z is None:
            return val, matrix(grad).T
        hess = z[0] * (lengths * fades**2) / (1.0 + fades * p) ** 2
        return val, matrix(grad).T, matrix(np.diag(hess))

    options = {
        "show_progress": False,
        "abstol": min(tol, 1e-9),
        "reltol": min(tol, 1e-9),
        "feastol": 1e-10,
        "maxiters": 200,
    }
    sol = solvers.cp(objective, G=g_mat, h=h_vec, options=options)
    if sol["status"] != "optimal":
        # Degenerate instances (e.g. an arrival exactly filling the battery
        # makes a capacity row coincide with a causality row) stall with
        # status 'unknown' but a duality gap orders of magnitude below the
        # accuracy needed here; accept such iterates.
        gap = sol.get("relative gap")
        pinf = sol.get("primal infeasibility")
        acceptable = (
            sol["status"] == "unknown"
            and gap is not None
            and gap <= 1e-6
            and pinf is not None
            and pinf <= 1e-7
        )
        if not acceptable:
            raise NoConvergence(
                f"interior-point status {sol['status']!r}, relative gap {gap}"
            )

    powers = np.clip(np.array(sol["x"]).ravel(), 0.0, None)
    # exact causality repair: never consume more than has arrived
    battery = 0.0
    for i in range(n):
        battery += inj[i]
        use = min(powers[i] * lengths[i], battery)
        powers[i] = use / lengths[i] if lengths[i] > 0 else 0.0
        battery -= use
    return PowerSchedule(tuple(powers.tolist()))


# ── KKT structure certificate ───────────────────────────────────────────────


def verify_kkt(
    timeline: EventTimeline,
    schedule: PowerSchedule,
    tol: float = 1e-6,
    tight_tol: float = TIGHT_TOL,
) -> KktCertificate:
    """Certify optimality of a feasible schedule from its structure alone.

    Conditions checked, all within ``tol`` on water levels:

    * feasibility and a tight terminal constraint (all energy consumed);
    * one common water level per segment between consecutive arrivals,
      with silent epochs only where ``1/h_i`` reaches that level;
    * across an arrival wall, the level may rise only if no energy was
      carried over (causality tight), and may fall only if the battery
      was full right after the arrival (capacity tight);
    * carried energy never exceeds the tap bound ``e_max - injected``.

    A segment with no transmitting epoch pins no level of its own; its
    level is only bounded above by its smallest ``1/h``.  The wall
    conditions are therefore checked by propagating an interval of
    admissible levels along the segment chain, so equality constraints
    couple correctly through silent segments instead of being satisfied
    vacuously on each side.
    """
    n = timeline.n_epochs
    if len(schedule.powers) != n:
        raise LengthMismatch(f"{len(schedule.powers)} powers for {n} epochs")

    lengths = np.asarray(timeline.lengths)
    bases = 1.0 / np.asarray(timeline.fade_levels)
    inj = np.asarray(timeline.injections)
    powers = np.asarray(schedule.powers)
    total = float(inj.sum())
    scale = max(1.0, total)

    report: FeasibilityReport = check_feasibility(timeline, schedule)
    feasible = report.feasible
    terminal_gap = report.cumulative_injection[-1] - report.cumulative_consumption[-1]
    terminal_tight = abs(terminal_gap) <= max(tight_tol * scale, 1e-7)

    wall_epochs = [i for i in range(1, n) if inj[i] > 0.0]
    starts = [0] + wall_epochs
    ends = wall_epochs + [n]

    # Segment levels.  A segment with no transmitting epoch has no pinned
    # level; any value up to its smallest base is consistent, which the wall
    # checks below account for.
    seg_reports = []
    seg_level = []
    seg_has_power = []
    for a, b in zip(starts, ends):
        p_seg = powers[a:b]
        b_seg = bases[a:b]
        active = p_seg > tol
        ok = True
        if active.any():
            nu = p_seg[active] + b_seg[active]
            level = float(nu.mean())
            spread = float(nu.max() - nu.min())
            ok &= spread <= tol
            ok &= bool(np.all(b_seg[~active] >= level - tol))
            has_power = True
        else:
            level = float(b_seg.min())
            spread = 0.0
            has_power = False
        seg_level.append(level)
        seg_has_power.append(has_power)
        seg_reports.append(SegmentReport(a, b - 1, level, has_power, spread, ok))

    def seg_interval(s: int) -> tuple[float, float]:
        if seg_has_power[s]:
            return seg_level[s], seg_level[s]
        return 0.0, seg_level[s]  # silent: level at most the smallest base

    cum_inj = np.cumsum(inj)
    cum_con = np.cumsum(lengths * powers)
    wall_reports = []
    cur_lo, cur_hi = seg_interval(0)
    for w, epoch in enumerate(wall_epochs):
        carried = float(cum_inj[epoch - 1] - cum_con[epoch - 1])
        cap = timeline.e_max - inj[epoch]
        causality_tight = carried <= tight_tol * scale
        capacity_tight = carried >= cap - tight_tol * scale
        nxt_lo, nxt_hi = seg_interval(w + 1)
        if causality_tight and capacity_tight:
            lo, hi = nxt_lo, nxt_hi  # wall decouples the chain
        elif causality_tight:
            lo, hi = max(nxt_lo, cur_lo - tol), nxt_hi  # level may only rise
        elif capacity_tight:
            lo, hi = nxt_lo, min(nxt_hi, cur_hi + tol)  # level may only fall
        else:
            lo = max(nxt_lo, cur_lo - tol)
            hi = min(nxt_hi, cur_hi + tol)
        ok = lo <= hi + tol
        ok = ok and (-tight_tol * scale <= carried <= cap + tight_tol * scale)
        wall_reports.append(
            WallReport(
                epoch, carried, causality_tight, capacity_tight,
                seg_level[w], seg_level[w + 1], ok,
            )
        )
        if ok:
            cur_lo, cur_hi = lo, hi
        else:
            cur_lo, cur_hi = nxt_lo, nxt_hi  # restart after a violation

    optimal = (
        feasible
        and terminal_tight
        and all(s.ok for s in seg_reports)
        and all(w.ok for w in wall_reports)
    )
    return KktCertificate(
        feasible=feasible,
        terminal_tight=terminal_tight,
        segment_report=tuple(seg_reports),
        wall_report=tuple(wall_reports),
        optimal=optimal,
    )
