"""Transmit-power scheduling for an energy-harvesting transmitter.

Offline: directional water-filling over a known event timeline, a maximum
departure curve, and completion-time minimization.  Online: a dynamic
programming policy on a quantized time grid plus three event-based
threshold heuristics.  A Monte Carlo harness evaluates everything against
the offline optimum and a non-causal upper bound.
"""

from .departure import (
    CompletionResult,
    DepartureCurve,
    departure_at,
    min_completion_time,
    sample_curve,
)
from .fading import (
    DiscreteFading,
    NakagamiFading,
    PointMassEnergy,
    PointMassFading,
    RayleighFading,
    UniformEnergy,
    discretize,
    implied_average_power,
    solve_cutoff,
)
from .harness import (
    DpSettings,
    ExperimentConfig,
    ScenarioConfig,
    SimulationTrace,
    SweepSpec,
    build_dp_table,
    generate_realization,
    make_policy,
    preset,
    run_experiment,
    simulate,
    upper_bound,
)
from .heuristics import (
    ConstantWaterPolicy,
    DpLookupPolicy,
    EnergyAdaptivePolicy,
    FixedPowerPolicy,
    PolicyDecision,
    TimeEnergyAdaptivePolicy,
    decide,
    make_constant_water,
    make_energy_adaptive,
    make_time_energy_adaptive,
)
from .offline import (
    KktCertificate,
    WaterfillSolution,
    oracle_solve,
    throughput,
    verify_kkt,
    waterfill,
)
from .online_dp import (
    DpConfig,
    ValueTable,
    build_value_function,
    load_table,
    optimal_power,
    save_table,
)
from .rate import THEORY, RateModel, bandwidth, parse_rate
from .timeline import (
    EnergyArrival,
    EventTimeline,
    FadeChange,
    PowerSchedule,
    build_timeline,
    check_feasibility,
    timeline_from_json,
    timeline_to_json,
    truncate,
)

__version__ = "0.1.0"
