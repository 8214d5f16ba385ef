"""Event-based causal transmit policies.

Each policy maps the causally observable state (battery energy, current
fade, time, triggering event kind) to a transmit power that is held until
the next event.  Three threshold rules share the cutoff-fade machinery:

* constant water level -- one cutoff solved up front from the mean
  recharge rate; reacts to fade observations (recomputing on an arrival
  returns the same power, so ``decide`` is stateless across triggers);
* energy adaptive -- cutoff re-solved at every event with the current
  battery energy as the budget;
* time-energy adaptive -- budget is energy over remaining time, so the
  policy leans harder on the battery as the deadline nears.

``DpLookupPolicy`` and ``FixedPowerPolicy`` complete the roster so the
simulator can drive every policy kind through one interface.  Policies are
immutable; any run state (current power) lives in the simulator.
"""

from __future__ import annotations

from dataclasses import dataclass

from .fading import FadingModel, solve_cutoff
from .online_dp import ValueTable, optimal_power

#: Remaining-time floor that caps the budget blow-up near the deadline.
TIME_FLOOR = 1e-6

#: Event kinds the simulator reports to ``decide``.
TRIGGERS = ("init", "arrival", "fade")


@dataclass(frozen=True)
class PolicyDecision:
    power: float
    cutoff_used: float | None
    reason: str


@dataclass(frozen=True)
class ConstantWaterPolicy:
    kind = "constant_water"
    fading: FadingModel
    mean_recharge: float
    cutoff: float


@dataclass(frozen=True)
class EnergyAdaptivePolicy:
    kind = "energy_adaptive"
    fading: FadingModel


@dataclass(frozen=True)
class TimeEnergyAdaptivePolicy:
    kind = "time_energy_adaptive"
    fading: FadingModel
    horizon: float
    arrivals_only: bool = False


@dataclass(frozen=True)
class DpLookupPolicy:
    kind = "dp"
    table: ValueTable


@dataclass(frozen=True)
class FixedPowerPolicy:
    kind = "fixed"
    power: float

    def __post_init__(self):
        if self.power < 0:
            raise ValueError("fixed power must be >= 0")


CausalPolicy = (
    ConstantWaterPolicy
    | EnergyAdaptivePolicy
    | TimeEnergyAdaptivePolicy
    | DpLookupPolicy
    | FixedPowerPolicy
)


def make_constant_water(fading: FadingModel, mean_recharge: float) -> ConstantWaterPolicy:
    """Fix the cutoff once from the long-run average recharge rate."""
    return ConstantWaterPolicy(
        fading=fading,
        mean_recharge=mean_recharge,
        cutoff=solve_cutoff(fading, mean_recharge),
    )


def make_energy_adaptive(fading: FadingModel) -> EnergyAdaptivePolicy:
    return EnergyAdaptivePolicy(fading=fading)


def make_time_energy_adaptive(
    fading: FadingModel, horizon: float, arrivals_only: bool = False
) -> TimeEnergyAdaptivePolicy:
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    return TimeEnergyAdaptivePolicy(fading=fading, horizon=horizon, arrivals_only=arrivals_only)


def _threshold_power(cutoff: float, fade: float) -> float:
    return max(1.0 / cutoff - 1.0 / fade, 0.0)


def decide(
    policy: CausalPolicy, e: float, h: float, t: float, trigger: str
) -> PolicyDecision | None:
    """New power for the current state, or None to keep the previous one.

    Only a time-energy-adaptive policy restricted to arrival triggers ever
    returns None (on a pure fade change); every other kind re-decides on
    any event.  An empty battery always decides power zero.
    """
    if trigger not in TRIGGERS:
        raise ValueError(f"unknown trigger {trigger!r}")

    if isinstance(policy, FixedPowerPolicy):
        power = policy.power if e > 0.0 else 0.0
        return PolicyDecision(power=power, cutoff_used=None, reason=trigger)

    if isinstance(policy, DpLookupPolicy):
        power = optimal_power(policy.table, e, h, t) if e > 0.0 else 0.0
        return PolicyDecision(power=power, cutoff_used=None, reason=trigger)

    if isinstance(policy, ConstantWaterPolicy):
        power = _threshold_power(policy.cutoff, h) if e > 0.0 else 0.0
        return PolicyDecision(power=power, cutoff_used=policy.cutoff, reason=trigger)

    if isinstance(policy, EnergyAdaptivePolicy):
        if e <= 0.0:
            return PolicyDecision(power=0.0, cutoff_used=None, reason=trigger)
        cutoff = solve_cutoff(policy.fading, e)
        return PolicyDecision(power=_threshold_power(cutoff, h), cutoff_used=cutoff, reason=trigger)

    if isinstance(policy, TimeEnergyAdaptivePolicy):
        if policy.arrivals_only and trigger == "fade":
            return None
        remaining = policy.horizon - t
        if e <= 0.0 or remaining <= 0.0:
            return PolicyDecision(power=0.0, cutoff_used=None, reason=trigger)
        budget = e / max(remaining, TIME_FLOOR)
        cutoff = solve_cutoff(policy.fading, budget)
        return PolicyDecision(power=_threshold_power(cutoff, h), cutoff_used=cutoff, reason=trigger)

    raise TypeError(f"not a causal policy: {policy!r}")
