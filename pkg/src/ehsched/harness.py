"""Monte Carlo experiment engine.

Realizations are drawn from Poisson event processes (exponential gaps for
arrivals and fade changes, marks from the configured distributions), every
policy is simulated on the same realization (common random numbers), and
each realization also gets its offline optimum and a non-causal upper
bound: all energy granted at t=0 and water-filled over the realized fades
with neither causality nor battery limits.

Simulation integrates the battery exactly between decision points (power
constant means linear decay), clips arrivals at the battery capacity and
books the excess as wasted.  Event policies decide at events and at the
instant the battery empties; a DP lookup policy is stepped on its table's
time grid with events applied at their exact times in between.

Seeding: realization i of sweep point j uses the child generator spawned
from ``SeedSequence([seed, j])``; aggregation runs in realization order, so
reports are byte-identical for a fixed seed regardless of worker count.
"""

from __future__ import annotations

import dataclasses
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .fading import (
    DiscreteFading,
    EnergyModel,
    FadingModel,
    PointMassEnergy,
    UniformEnergy,
    NakagamiFading,
    RayleighFading,
    energy_to_json,
    fading_to_json,
)
from .heuristics import (
    CausalPolicy,
    DpLookupPolicy,
    FixedPowerPolicy,
    decide,
    make_constant_water,
    make_energy_adaptive,
    make_time_energy_adaptive,
)
from .offline import flood_level, waterfill
from .online_dp import (
    DpConfig,
    ValueTable,
    build_value_function,
    check_compatible,
    optimal_power,
)
from .rate import RateModel, bandwidth, rate_to_json
from .timeline import EventTimeline, build_timeline


# ── configuration ──────────────────────────────────────────────────────────


@dataclass(frozen=True)
class ScenarioConfig:
    horizon: float
    e_max: float
    lambda_e: float
    lambda_f: float
    energy_model: EnergyModel
    fading_model: FadingModel
    rate: RateModel
    seed: int = 0
    n_realizations: int = 1000

    def __post_init__(self):
        if self.horizon <= 0 or self.e_max <= 0:
            raise ValueError("horizon and e_max must be > 0")
        if self.lambda_e < 0 or self.lambda_f < 0:
            raise ValueError("event rates must be >= 0")
        if 2.0 * self.energy_model.mean >= self.e_max:
            raise ValueError(
                "energy amounts must fit the battery: need 2*mean < e_max, got "
                f"mean={self.energy_model.mean}, e_max={self.e_max}"
            )
        if self.n_realizations < 1:
            raise ValueError("need at least one realization")

    @property
    def mean_recharge(self) -> float:
        """Long-run recharge rate in watts: arrival rate times mean amount."""
        return self.lambda_e * self.energy_model.mean


@dataclass(frozen=True)
class DpSettings:
    delta: float = 0.01
    energy_grid: int = 201
    fade_points: int = 32
    power_grid: int = 16
    energy_points: int = 16


@dataclass(frozen=True)
class SweepSpec:
    var: str  # "recharge_rate" | "horizon"
    values: tuple[float, ...]

    def __post_init__(self):
        if self.var not in ("recharge_rate", "horizon"):
            raise ValueError(f"unknown sweep variable {self.var!r}")
        if not self.values:
            raise ValueError("sweep needs at least one value")


@dataclass(frozen=True)
class ExperimentConfig:
    base: ScenarioConfig
    sweep: SweepSpec | None = None
    dp: DpSettings = field(default_factory=DpSettings)

    def scenario_at(self, value: float | None) -> ScenarioConfig:
        if self.sweep is None or value is None:
            return self.base
        if self.sweep.var == "horizon":
            return dataclasses.replace(self.base, horizon=float(value))
        model = self.base.energy_model
        if isinstance(model, UniformEnergy):
            model = UniformEnergy(float(value))
        elif isinstance(model, PointMassEnergy):
            model = PointMassEnergy(float(value))
        else:
            raise TypeError(f"cannot sweep recharge rate of {model!r}")
        return dataclasses.replace(self.base, energy_model=model)


# ── realization generation ─────────────────────────────────────────────────


def generate_realization(config: ScenarioConfig, rng: np.random.Generator) -> EventTimeline:
    """Draw one event timeline.

    Draw order is fixed (initial fade, initial energy, then arrivals as
    gap/amount pairs, then fade changes as gap/level pairs) so a seeded
    generator reproduces the timeline exactly.
    """
    h_init = float(config.fading_model.sample(rng))
    e_init = min(float(config.energy_model.sample(rng)), config.e_max)

    arrivals = []
    if config.lambda_e > 0:
        t = rng.exponential(1.0 / config.lambda_e)
        while t < config.horizon:
            amount = float(config.energy_model.sample(rng))
            while amount <= 0.0:
                amount = float(config.energy_model.sample(rng))
            arrivals.append((t, amount))
            gap = rng.exponential(1.0 / config.lambda_e)
            while gap <= 0.0:
                gap = rng.exponential(1.0 / config.lambda_e)
            t += gap

    fades = [(0.0, h_init)]
    if config.lambda_f > 0:
        t = rng.exponential(1.0 / config.lambda_f)
        while t < config.horizon:
            fades.append((t, float(config.fading_model.sample(rng))))
            gap = rng.exponential(1.0 / config.lambda_f)
            while gap <= 0.0:
                gap = rng.exponential(1.0 / config.lambda_f)
            t += gap

    return build_timeline(
        horizon=config.horizon,
        e_max=config.e_max,
        initial_energy=e_init,
        arrivals=arrivals,
        fades=fades,
    )


# ── simulation ─────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class SimulationTrace:
    timeline: EventTimeline
    power_path: tuple[tuple[float, float, float], ...]  # (start, end, watts)
    battery_path: tuple[tuple[float, float], ...]  # (time, joules)
    delivered_bits: float
    wasted_j: float
    leftover_j: float

    @property
    def consumed_j(self) -> float:
        return sum((b - a) * p for a, b, p in self.power_path)

    def energy_balance_gap(self) -> float:
        """injected - consumed - wasted - leftover; ~0 for a correct trace."""
        injected = self.timeline.total_injected
        return injected - self.consumed_j - self.wasted_j - self.leftover_j


def _merged_effects(timeline: EventTimeline):
    """Event times mapped to (arrival amount, new fade level or None)."""
    effects: dict[float, list] = {}
    for a in timeline.arrivals:
        effects.setdefault(a.time, [0.0, None])[0] += a.amount
    for f in timeline.fades[1:]:
        effects.setdefault(f.time, [0.0, None])[1] = f.level
    return dict(sorted(effects.items()))


def _simulate_event_driven(policy, timeline: EventTimeline, rate: RateModel) -> SimulationTrace:
    effects = _merged_effects(timeline)
    e = min(timeline.initial_energy, timeline.e_max)
    h = timeline.fades[0].level
    bits = 0.0
    wasted = 0.0
    power_path: list[tuple[float, float, float]] = []
    battery_path: list[tuple[float, float]] = [(0.0, e)]
    current_power = 0.0

    def run_until(a: float, b: float):
        """Advance with the current power; zero it at the empty instant."""
        nonlocal e, bits, current_power
        if b <= a:
            return
        p = current_power
        if p <= 0.0:
            power_path.append((a, b, 0.0))
            return
        drain_time = e / p
        if drain_time < b - a:
            t_empty = a + drain_time
            bits_rate = rate.bits_per_second(p, h)
            bits += drain_time * bits_rate
            power_path.append((a, t_empty, p))
            e = 0.0
            current_power = 0.0
            battery_path.append((t_empty, 0.0))
            power_path.append((t_empty, b, 0.0))
        else:
            bits += (b - a) * rate.bits_per_second(p, h)
            e = max(e - p * (b - a), 0.0)
            power_path.append((a, b, p))

    decision = decide(policy, e, h, 0.0, "init")
    if decision is not None:
        current_power = decision.power

    prev_t = 0.0
    for t, (amount, level) in effects.items():
        run_until(prev_t, t)
        trigger = "fade"
        if level is not None:
            h = level
        if amount > 0.0:
            room = timeline.e_max - e
            stored = min(amount, room)
            e += stored
            wasted += amount - stored
            trigger = "arrival"
        battery_path.append((t, e))
        decision = decide(policy, e, h, t, trigger)
        if decision is not None:
            current_power = decision.power
        prev_t = t

    run_until(prev_t, timeline.horizon)
    battery_path.append((timeline.horizon, e))
    return SimulationTrace(
        timeline=timeline,
        power_path=tuple(power_path),
        battery_path=tuple(battery_path),
        delivered_bits=bits,
        wasted_j=wasted,
        leftover_j=e,
    )


def _simulate_dp(policy: DpLookupPolicy, timeline: EventTimeline, rate: RateModel) -> SimulationTrace:
    table: ValueTable = policy.table
    check_compatible(table, timeline.horizon, timeline.e_max)
    delta = table.delta
    n_steps = table.n_steps

    effects = _merged_effects(timeline)
    times = list(effects)
    e = min(timeline.initial_energy, timeline.e_max)
    h = timeline.fades[0].level
    bits = 0.0
    wasted = 0.0
    power_path: list[tuple[float, float, float]] = []
    battery_path: list[tuple[float, float]] = [(0.0, e)]
    ev = 0

    def apply_event(t: float):
        nonlocal e, h, wasted
        amount, level = effects[t]
        if level is not None:
            h = level
        if amount > 0.0:
            room = timeline.e_max - e
            stored = min(amount, room)
            e += stored
            wasted += amount - stored
        battery_path.append((t, e))

    for k in range(n_steps):
        t0 = k * delta
        t1 = timeline.horizon if k == n_steps - 1 else (k + 1) * delta
        while ev < len(times) and times[ev] <= t0:
            apply_event(times[ev])
            ev += 1
        p = optimal_power(table, e, h, t0)
        seg_start = t0
        while ev < len(times) and times[ev] < t1:
            te = times[ev]
            if te > seg_start:
                bits += (te - seg_start) * rate.bits_per_second(p, h)
                e = max(e - p * (te - seg_start), 0.0)
                power_path.append((seg_start, te, p))
            apply_event(te)
            ev += 1
            seg_start = te
        if t1 > seg_start:
            bits += (t1 - seg_start) * rate.bits_per_second(p, h)
            e = max(e - p * (t1 - seg_start), 0.0)
            power_path.append((seg_start, t1, p))

    battery_path.append((timeline.horizon, e))
    return SimulationTrace(
        timeline=timeline,
        power_path=tuple(power_path),
        battery_path=tuple(battery_path),
        delivered_bits=bits,
        wasted_j=wasted,
        leftover_j=e,
    )


def simulate(policy: CausalPolicy, timeline: EventTimeline, config: ScenarioConfig) -> SimulationTrace:
    """Run one policy over one realization; see the module docstring."""
    if isinstance(policy, DpLookupPolicy):
        return _simulate_dp(policy, timeline, config.rate)
    return _simulate_event_driven(policy, timeline, config.rate)


def upper_bound(timeline: EventTimeline, config: ScenarioConfig) -> float:
    """Non-causal throughput bound in bits/s.

    All injected energy is granted at t=0 and water-filled over the realized
    fade pattern with no battery limit; dominates the offline optimum on the
    same realization.
    """
    total = timeline.total_injected
    if total <= 0.0:
        return 0.0
    lengths = np.asarray(timeline.lengths)
    bases = 1.0 / np.asarray(timeline.fade_levels)
    level = flood_level(lengths, bases, total)
    powers = np.clip(level - bases, 0.0, None)
    bits = float(np.sum(lengths * config.rate.bits_per_second(powers, 1.0 / bases)))
    return bits / timeline.horizon


# ── policy instantiation ───────────────────────────────────────────────────


def build_dp_table(scenario: ScenarioConfig, settings: DpSettings) -> ValueTable:
    """Discretize the scenario's models and run backward induction."""
    fading = scenario.fading_model
    discrete = fading if isinstance(fading, DiscreteFading) else fading.discretize(settings.fade_points)
    config = DpConfig(
        delta=settings.delta,
        horizon=scenario.horizon,
        e_max=scenario.e_max,
        energy_grid=settings.energy_grid,
        fading=discrete,
        lambda_e=scenario.lambda_e,
        lambda_f=scenario.lambda_f,
        energy_model=scenario.energy_model,
        rate=scenario.rate,
        power_grid=settings.power_grid,
        energy_points=settings.energy_points,
    )
    return build_value_function(config)


def make_policy(
    spec: str,
    scenario: ScenarioConfig,
    dp_table: ValueTable | None = None,
) -> CausalPolicy:
    """Instantiate a policy from its experiment-file spec string."""
    if spec == "constant_water":
        if scenario.mean_recharge <= 0:
            raise ValueError("constant_water needs a positive mean recharge rate")
        return make_constant_water(scenario.fading_model, scenario.mean_recharge)
    if spec == "energy_adaptive":
        return make_energy_adaptive(scenario.fading_model)
    if spec == "time_energy_adaptive":
        return make_time_energy_adaptive(scenario.fading_model, scenario.horizon)
    if spec == "dp":
        if dp_table is None:
            raise ValueError("dp policy needs a prebuilt value table")
        return DpLookupPolicy(table=dp_table)
    if spec.startswith("fixed:"):
        return FixedPowerPolicy(power=float(spec.split(":", 1)[1]))
    raise ValueError(f"unknown policy spec {spec!r}")


# ── experiment runner ──────────────────────────────────────────────────────


@dataclass(frozen=True)
class PolicyStats:
    sweep_value: float
    policy: str
    mean_bps: float
    stderr_bps: float
    n: int


@dataclass(frozen=True)
class RealizationDetail:
    sweep_value: float
    realization: int
    policy: str
    bits: float
    throughput_bps: float
    wasted_j: float
    leftover_j: float


@dataclass(frozen=True)
class ExperimentReport:
    config_echo: dict
    sweep_var: str
    stats: tuple[PolicyStats, ...]
    details: tuple[RealizationDetail, ...]

    def to_csv(self) -> str:
        lines = ["sweep_var,sweep_value,policy,mean_bps,stderr_bps,n"]
        for s in self.stats:
            lines.append(
                f"{self.sweep_var},{_fmt(s.sweep_value)},{s.policy},"
                f"{_fmt(s.mean_bps)},{_fmt(s.stderr_bps)},{s.n}"
            )
        return "\n".join(lines) + "\n"

    def details_csv(self) -> str:
        lines = ["sweep_value,realization,policy,bits,throughput_bps,wasted_j,leftover_j"]
        for d in self.details:
            lines.append(
                f"{_fmt(d.sweep_value)},{d.realization},{d.policy},{_fmt(d.bits)},"
                f"{_fmt(d.throughput_bps)},{_fmt(d.wasted_j)},{_fmt(d.leftover_j)}"
            )
        return "\n".join(lines) + "\n"

    def mean_of(self, policy: str, sweep_value: float | None = None) -> float:
        for s in self.stats:
            if s.policy == policy and (sweep_value is None or s.sweep_value == sweep_value):
                return s.mean_bps
        raise KeyError(f"no stats row for {policy!r} at {sweep_value!r}")

    def stderr_of(self, policy: str, sweep_value: float | None = None) -> float:
        for s in self.stats:
            if s.policy == policy and (sweep_value is None or s.sweep_value == sweep_value):
                return s.stderr_bps
        raise KeyError(f"no stats row for {policy!r} at {sweep_value!r}")


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _worker_count(workers: int | None) -> int:
    if workers is not None:
        return max(1, workers)
    env = os.environ.get("EHSCHED_THREADS")
    return max(1, int(env)) if env else 1


def run_experiment(
    config: ExperimentConfig,
    policies: list[str],
    dp_table: ValueTable | None = None,
    workers: int | None = None,
) -> ExperimentReport:
    """Evaluate every policy on common realizations, per sweep point.

    Each realization also contributes an ``offline`` row (full-knowledge
    optimum) and an ``upper_bound`` row (causality-free relaxation).  The
    report aggregates means and standard errors per (sweep value, policy).
    """
    sweep_values = list(config.sweep.values) if config.sweep else [None]
    sweep_var = config.sweep.var if config.sweep else "none"
    n_workers = _worker_count(workers)

    stats: list[PolicyStats] = []
    details: list[RealizationDetail] = []

    for sweep_idx, value in enumerate(sweep_values):
        scenario = config.scenario_at(value)
        table = None
        if "dp" in policies:
            if dp_table is not None:
                check_compatible(dp_table, scenario.horizon, scenario.e_max)
                table = dp_table
            else:
                table = build_dp_table(scenario, config.dp)
        policy_objs = {spec: make_policy(spec, scenario, table) for spec in policies}

        seeds = np.random.SeedSequence([scenario.seed, sweep_idx]).spawn(
            scenario.n_realizations
        )

        def one_realization(i: int):
            rng = np.random.default_rng(seeds[i])
            timeline = generate_realization(scenario, rng)
            row = {}
            if timeline.total_injected > 0.0:
                row["offline"] = (
                    waterfill(timeline, scenario.rate).objective_bits,
                    0.0,
                    0.0,
                )
                row["upper_bound"] = (
                    upper_bound(timeline, scenario) * timeline.horizon,
                    0.0,
                    0.0,
                )
            else:
                row["offline"] = (0.0, 0.0, 0.0)
                row["upper_bound"] = (0.0, 0.0, 0.0)
            for spec, policy in policy_objs.items():
                trace = simulate(policy, timeline, scenario)
                row[spec] = (trace.delivered_bits, trace.wasted_j, trace.leftover_j)
            return row

        n = scenario.n_realizations
        if n_workers > 1:
            with ThreadPoolExecutor(max_workers=n_workers) as pool:
                rows = list(pool.map(one_realization, range(n)))
        else:
            rows = [one_realization(i) for i in range(n)]

        value_f = float(value) if value is not None else 0.0
        for name in list(policies) + ["offline", "upper_bound"]:
            bps = np.array([rows[i][name][0] / scenario.horizon for i in range(n)])
            mean = float(bps.mean())
            stderr = float(bps.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
            stats.append(PolicyStats(value_f, name, mean, stderr, n))
            for i in range(n):
                bits, wasted, leftover = rows[i][name]
                details.append(
                    RealizationDetail(
                        value_f, i, name, bits, bits / scenario.horizon, wasted, leftover
                    )
                )

    echo: dict = {
        "base": scenario_to_json(config.base),
        "sweep": {"var": sweep_var, "values": [float(v) for v in (config.sweep.values if config.sweep else [])]},
        "dp": dataclasses.asdict(config.dp),
        "policies": list(policies),
    }
    return ExperimentReport(
        config_echo=echo, sweep_var=sweep_var, stats=tuple(stats), details=tuple(details)
    )


# ── presets and config JSON ────────────────────────────────────────────────


def scenario_to_json(config: ScenarioConfig) -> dict:
    return {
        "horizon_s": config.horizon,
        "e_max_j": config.e_max,
        "lambda_e": config.lambda_e,
        "lambda_f": config.lambda_f,
        "energy": energy_to_json(config.energy_model),
        "fading": fading_to_json(config.fading_model),
        "rate": rate_to_json(config.rate),
        "seed": config.seed,
        "n_realizations": config.n_realizations,
    }


PRESETS = ("fig5", "fig6", "fig7", "fig8")


def preset(name: str, seed: int = 1, n_realizations: int = 1000) -> ExperimentConfig:
    """Named experiment configurations mirroring the standard study setups.

    All use unit Poisson rates for both event processes and a 1 MHz
    bandwidth rate model.

    * fig5: Rayleigh fading (0 dB), T=10 s, battery 10 J, recharge sweep.
    * fig6: same but a 1 J battery, low-recharge sweep.
    * fig7: Nakagami m=3 fading (5 dB), T=10 s, battery 10 J, recharge sweep.
    * fig8: Nakagami m=5 fading, recharge 0.5 W, deadline sweep.
    """
    common = dict(
        lambda_e=1.0,
        lambda_f=1.0,
        rate=bandwidth(1e6),
        seed=seed,
        n_realizations=n_realizations,
    )
    if name == "fig5":
        base = ScenarioConfig(
            horizon=10.0, e_max=10.0,
            energy_model=UniformEnergy(0.5), fading_model=RayleighFading(1.0),
            **common,
        )
        sweep = SweepSpec("recharge_rate", tuple(round(0.1 * k, 10) for k in range(1, 11)))
    elif name == "fig6":
        base = ScenarioConfig(
            horizon=10.0, e_max=1.0,
            energy_model=UniformEnergy(0.1), fading_model=RayleighFading(1.0),
            **common,
        )
        sweep = SweepSpec("recharge_rate", tuple(round(0.05 * k, 10) for k in range(1, 10)))
    elif name == "fig7":
        base = ScenarioConfig(
            horizon=10.0, e_max=10.0,
            energy_model=UniformEnergy(0.5),
            fading_model=NakagamiFading(m=3.0, mean=10.0**0.5),
            **common,
        )
        sweep = SweepSpec("recharge_rate", tuple(round(0.1 * k, 10) for k in range(1, 11)))
    elif name == "fig8":
        base = ScenarioConfig(
            horizon=10.0, e_max=10.0,
            energy_model=UniformEnergy(0.5),
            fading_model=NakagamiFading(m=5.0, mean=1.0),
            **common,
        )
        sweep = SweepSpec("horizon", (5.0, 10.0, 20.0, 40.0))
    else:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")
    return ExperimentConfig(base=base, sweep=sweep)
