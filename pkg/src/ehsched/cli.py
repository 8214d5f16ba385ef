"""Command-line interface.

Subcommands:

* ``waterfill``  -- offline optimum for a scenario file, as JSON;
* ``departure``  -- maximum departure curve on a time grid, as CSV;
* ``mintime``    -- minimum completion time for a bit target, as JSON;
* ``dp-build``   -- backward-induction value table, serialized to disk;
* ``dp-query``   -- power lookup in a serialized table;
* ``experiment`` -- Monte Carlo policy comparison, as CSV.

All outputs are deterministic functions of the inputs (plus --seed where
randomness is involved), so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .departure import min_completion_time, sample_curve
from .fading import energy_from_json, fading_from_json
from .offline import verify_kkt, waterfill
from .online_dp import DpConfig, build_value_function, load_table, optimal_power, save_table
from .rate import THEORY, RateModel, parse_rate, rate_from_json, rate_to_json
from .timeline import timeline_from_json


def _load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _dump_json(obj: dict, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _write_text(text: str, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _parse_grid(spec: str) -> list[float]:
    """start:stop:step, endpoint included when it lands on the grid."""
    try:
        start, stop, step = (float(tok) for tok in spec.split(":"))
    except ValueError as exc:
        raise SystemExit(f"bad grid spec {spec!r}; expected start:stop:step") from exc
    if step <= 0 or stop < start:
        raise SystemExit(f"bad grid spec {spec!r}")
    n = int((stop - start) / step + 1e-9)
    return [start + i * step for i in range(n + 1)]


def _rate_from_args(args) -> RateModel:
    return parse_rate(args.rate)


def cmd_waterfill(args) -> int:
    timeline = timeline_from_json(_load_json(args.scenario))
    rate = _rate_from_args(args)
    solution = waterfill(timeline, rate)
    cert = verify_kkt(timeline, solution.schedule)
    out = {
        "objective_bits": solution.objective_bits,
        "rate": rate_to_json(rate),
        "epochs": [
            {
                "start_s": ep.start,
                "length_s": ep.length,
                "h": ep.fade,
                "power_w": p,
                "water_level": nu,
            }
            for ep, p, nu in zip(
                timeline.epochs, solution.schedule.powers, solution.water_levels
            )
        ],
        "tap_transfers": [
            {"epoch": idx, "joules": x}
            for idx, x in zip(solution.wall_epochs, solution.tap_transfers)
        ],
        "certificate": {
            "feasible": cert.feasible,
            "terminal_tight": cert.terminal_tight,
            "optimal": cert.optimal,
        },
    }
    _dump_json(out, args.out)
    return 0


def cmd_departure(args) -> int:
    timeline = timeline_from_json(_load_json(args.scenario))
    rate = _rate_from_args(args)
    grid = _parse_grid(args.grid)
    pairs = sample_curve(timeline, grid, rate)
    lines = ["t_s,bits"] + [f"{t:.12g},{d:.12g}" for t, d in pairs]
    _write_text("\n".join(lines) + "\n", args.out)
    return 0


def cmd_mintime(args) -> int:
    timeline = timeline_from_json(_load_json(args.scenario))
    rate = _rate_from_args(args)
    result = min_completion_time(timeline, args.bits, rate, tol=args.tol)
    out = {
        "t_star_s": result.t_star,
        "bits_target": result.bits_target,
        "bits_at_t_star": result.bits_at_t_star,
        "bracket_s": list(result.bracket),
        "powers_w": list(result.schedule.powers),
    }
    _dump_json(out, args.out)
    return 0


def cmd_dp_build(args) -> int:
    spec = _load_json(args.config)
    known = {
        "delta", "horizon_s", "e_max_j", "energy_grid", "fade_points",
        "power_grid", "energy_points", "lambda_e", "lambda_f",
        "fading", "energy", "rate",
    }
    unknown = set(spec) - known
    if unknown:
        raise SystemExit(f"unknown dp config fields: {sorted(unknown)}")
    fading = fading_from_json(spec["fading"]).discretize(int(spec.get("fade_points", 32)))
    energy = energy_from_json(spec["energy"]) if "energy" in spec else None
    rate = rate_from_json(spec["rate"]) if "rate" in spec else THEORY
    config = DpConfig(
        delta=float(spec["delta"]),
        horizon=float(spec["horizon_s"]),
        e_max=float(spec["e_max_j"]),
        energy_grid=int(spec.get("energy_grid", 201)),
        fading=fading,
        lambda_e=float(spec.get("lambda_e", 0.0)),
        lambda_f=float(spec.get("lambda_f", 0.0)),
        energy_model=energy,
        rate=rate,
        power_grid=int(spec.get("power_grid", 16)),
        energy_points=int(spec.get("energy_points", 16)),
    )
    table = build_value_function(config)
    save_table(table, args.out)
    return 0


def cmd_dp_query(args) -> int:
    table = load_table(args.table)
    power = optimal_power(table, args.e, args.h, args.t)
    _dump_json({"power_w": power, "e_j": args.e, "h": args.h, "t_s": args.t}, args.out)
    return 0


def cmd_experiment(args) -> int:
    if args.preset and args.config:
        raise SystemExit("give --preset or --config, not both")
    if args.preset:
        config = harness.preset(args.preset, seed=args.seed, n_realizations=args.n)
    elif args.config:
        config = _experiment_from_json(_load_json(args.config), args.seed, args.n)
    else:
        raise SystemExit("need --preset or --config")

    if args.dp_delta is not None:
        import dataclasses

        config = dataclasses.replace(
            config, dp=dataclasses.replace(config.dp, delta=args.dp_delta)
        )

    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    dp_table = load_table(args.dp_table) if args.dp_table else None
    report = harness.run_experiment(config, policies, dp_table=dp_table)
    _write_text(report.to_csv(), args.out)
    if args.detail:
        _write_text(report.details_csv(), args.detail)
    return 0


def _experiment_from_json(spec: dict, seed: int, n: int) -> harness.ExperimentConfig:
    known = {
        "horizon_s", "e_max_j", "lambda_e", "lambda_f", "fading", "energy",
        "rate", "sweep", "dp", "n_realizations",
    }
    unknown = set(spec) - known
    if unknown:
        raise SystemExit(f"unknown experiment fields: {sorted(unknown)}")
    base = harness.ScenarioConfig(
        horizon=float(spec["horizon_s"]),
        e_max=float(spec["e_max_j"]),
        lambda_e=float(spec["lambda_e"]),
        lambda_f=float(spec["lambda_f"]),
        energy_model=energy_from_json(spec["energy"]),
        fading_model=fading_from_json(spec["fading"]),
        rate=rate_from_json(spec["rate"]) if "rate" in spec else THEORY,
        seed=seed,
        n_realizations=n if n else int(spec.get("n_realizations", 1000)),
    )
    sweep = None
    if "sweep" in spec:
        sweep = harness.SweepSpec(
            var=spec["sweep"]["var"], values=tuple(map(float, spec["sweep"]["values"]))
        )
    dp = harness.DpSettings(**spec.get("dp", {}))
    return harness.ExperimentConfig(base=base, sweep=sweep, dp=dp)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ehsched",
        description="Transmit-power scheduling for an energy-harvesting transmitter.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("waterfill", help="offline optimal schedule for a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--rate", default="theory", help="theory | bandwidth:<Hz>")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_waterfill)

    p = sub.add_parser("departure", help="maximum departure curve on a grid")
    p.add_argument("--scenario", required=True)
    p.add_argument("--grid", required=True, help="start:stop:step seconds")
    p.add_argument("--rate", default="theory")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_departure)

    p = sub.add_parser("mintime", help="minimum completion time for a bit target")
    p.add_argument("--scenario", required=True)
    p.add_argument("--bits", type=float, required=True)
    p.add_argument("--rate", default="theory")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_mintime)

    p = sub.add_parser("dp-build", help="build and serialize a value table")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dp_build)

    p = sub.add_parser("dp-query", help="look up the optimal power in a table")
    p.add_argument("--table", required=True)
    p.add_argument("--e", type=float, required=True, help="battery energy, J")
    p.add_argument("--h", type=float, required=True, help="fade level")
    p.add_argument("--t", type=float, required=True, help="time, s")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_dp_query)

    p = sub.add_parser("experiment", help="Monte Carlo policy comparison")
    p.add_argument("--preset", choices=harness.PRESETS, default=None)
    p.add_argument("--config", default=None, help="experiment JSON file")
    p.add_argument(
        "--policies",
        default="constant_water,energy_adaptive,time_energy_adaptive",
        help="comma-separated policy specs; dp needs a table or dp settings",
    )
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--n", type=int, default=1000, help="realizations per sweep point")
    p.add_argument("--dp-table", default=None, help="prebuilt table for the dp policy")
    p.add_argument("--dp-delta", type=float, default=None, help="override dp time step")
    p.add_argument("--out", required=True)
    p.add_argument("--detail", default=None, help="also write per-realization rows")
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
