"""Optimal online policy by backward induction on a quantized time grid.

The state is (stored energy e, fade level h, time t).  Time is cut into
steps of length ``delta``; per step, a fade redraw happens with probability
``1 - exp(-lambda_f * delta)`` and an energy arrival with probability
``1 - exp(-lambda_e * delta)`` (independently; the joint case is kept).
Energy lives on a uniform grid with linear interpolation, fades on the
support of a discretized fading model, arrival amounts on a quantile
discretization of the energy model.

``build_value_function`` fills the value array J(e, h, k) backward from the
zero terminal layer and records the maximizing transmit power g(e, h, k).
No explicit terminal penalty forces the battery empty: throughput is
strictly increasing in spent energy, so the maximizer drains the battery
as the horizon closes on its own.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import GridTooCoarse, IncompatibleTable, OutOfMemoryBudget
from .fading import DiscreteFading, EnergyModel, energy_from_json, energy_to_json
from .rate import THEORY, RateModel, rate_from_json, rate_to_json

#: Fixed golden-section refinement depth of the per-cell action search.
GOLDEN_ITERS = 40

_MAGIC = b"EHDPTBL1"


@dataclass(frozen=True)
class DpConfig:
    delta: float
    horizon: float
    e_max: float
    energy_grid: int
    fading: DiscreteFading
    lambda_e: float
    lambda_f: float
    energy_model: EnergyModel | None = None
    rate: RateModel = THEORY
    power_grid: int = 16
    energy_points: int = 16
    memory_cap_bytes: int = 1_500_000_000

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.horizon <= 0 or self.e_max <= 0:
            raise ValueError("horizon and e_max must be > 0")
        if self.lambda_e < 0 or self.lambda_f < 0:
            raise ValueError("event rates must be >= 0")
        if self.delta * max(self.lambda_e, self.lambda_f) > 0.1:
            raise ValueError("delta too large for the event rates (need delta*rate <= 0.1)")
        if self.energy_grid < 2:
            raise ValueError("energy grid needs at least 2 points")
        if self.power_grid < 2:
            raise ValueError("power grid needs at least 2 points")
        if self.lambda_e > 0 and self.energy_model is None:
            raise ValueError("lambda_e > 0 requires an energy model")
        steps = self.horizon / self.delta
        if abs(steps - round(steps)) > 1e-6 * max(1.0, steps):
            raise ValueError("horizon must be an integer multiple of delta")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.delta))


@dataclass(frozen=True)
class ValueTable:
    """Value array J(e, h, k) and greedy powers g(e, h, k) on the grid."""

    values: np.ndarray = field(repr=False)  # (n_e, n_h, n_steps + 1)
    policy: np.ndarray = field(repr=False)  # (n_e, n_h, n_steps)
    e_grid: np.ndarray = field(repr=False)
    h_points: np.ndarray = field(repr=False)
    delta: float
    horizon: float
    e_max: float
    meta: dict = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        return self.policy.shape[2]


def _event_mix(
    j_next: np.ndarray,
    fade_masses: np.ndarray,
    q_fade: float,
    q_arrival: float,
    arr_weights,
    arr_idx,
    arr_frac,
) -> np.ndarray:
    """Expected continuation value over the per-step event outcomes.

    Input and output are indexed by (post-consumption energy, current fade).
    """
    out = (1.0 - q_arrival) * (1.0 - q_fade) * j_next
    j_fade = None
    if q_fade > 0.0:
        j_fade = j_next @ fade_masses  # (n_e,)
        out = out + (1.0 - q_arrival) * q_fade * j_fade[:, None]
    if q_arrival > 0.0:
        lo = j_next[arr_idx]  # (n_e, n_arr, n_h)
        hi = j_next[arr_idx + 1]
        j_arr = np.einsum("a,iah->ih", arr_weights, lo + arr_frac[:, :, None] * (hi - lo))
        out = out + q_arrival * (1.0 - q_fade) * j_arr
        if q_fade > 0.0:
            lo_f = j_fade[arr_idx]
            hi_f = j_fade[arr_idx + 1]
            j_arr_fade = (arr_weights[None, :] * (lo_f + arr_frac * (hi_f - lo_f))).sum(axis=1)
            out = out + q_arrival * q_fade * j_arr_fade[:, None]
    return out


def build_value_function(config: DpConfig) -> ValueTable:
    """Backward induction over the full grid; see the module docstring."""
    n_e = config.energy_grid
    h_points = np.asarray(config.fading.points, dtype=float)
    fade_masses = np.asarray(config.fading.masses, dtype=float)
    n_h = h_points.shape[0]
    n_steps = config.n_steps

    need = 8 * n_e * n_h * (2 * n_steps + 1)
    if need > config.memory_cap_bytes:
        raise OutOfMemoryBudget(
            f"value table needs ~{need} bytes, cap is {config.memory_cap_bytes}; "
            "coarsen the grids or raise memory_cap_bytes"
        )

    e_grid = np.linspace(0.0, config.e_max, n_e)
    de = e_grid[1] - e_grid[0]
    q_fade = -math.expm1(-config.lambda_f * config.delta)
    q_arrival = -math.expm1(-config.lambda_e * config.delta)

    arr_weights = arr_idx = arr_frac = None
    if q_arrival > 0.0:
        arr_points, arr_weights = config.energy_model.discretize(config.energy_points)
        landed = np.minimum(e_grid[:, None] + arr_points[None, :], config.e_max)
        pos = landed / de
        arr_idx = np.clip(pos.astype(np.int64), 0, n_e - 2)
        arr_frac = pos - arr_idx

    rate_coeff = config.delta * config.rate.nat_scale
    values = np.zeros((n_e, n_h, n_steps + 1))
    policy = np.zeros((n_e, n_h, n_steps))

    for k in range(n_steps - 1, -1, -1):
        w = _event_mix(
            values[:, :, k + 1], fade_masses, q_fade, q_arrival,
            arr_weights, arr_idx, arr_frac,
        )
        j_new, p_new = _kernels.layer_update(
            np.ascontiguousarray(w), e_grid, h_points,
            rate_coeff, config.delta, config.power_grid, GOLDEN_ITERS,
        )
        drops = np.diff(j_new, axis=0)
        tol = 1e-8 * max(1.0, float(j_new.max()))
        if drops.min(initial=0.0) < -tol:
            raise GridTooCoarse(
                f"value function decreases in energy at step {k} "
                f"(worst drop {-drops.min():.3e}); refine the grids"
            )
        values[:, :, k] = j_new
        policy[:, :, k] = p_new

    meta = {
        "lambda_e": config.lambda_e,
        "lambda_f": config.lambda_f,
        "energy_model": energy_to_json(config.energy_model) if config.energy_model else None,
        "rate": rate_to_json(config.rate),
        "power_grid": config.power_grid,
        "energy_points": config.energy_points,
        "fade_masses": fade_masses.tolist(),
        "backend": _kernels.backend(),
    }
    return ValueTable(
        values=values, policy=policy, e_grid=e_grid, h_points=h_points,
        delta=config.delta, horizon=config.horizon, e_max=config.e_max, meta=meta,
    )


def optimal_power(table: ValueTable, e: float, h: float, t: float) -> float:
    """Greedy power lookup: nearest fade point, linear in energy, clamped.

    The clamp to ``[0, e/delta]`` guarantees the battery cannot go negative
    within one step no matter how the interpolation lands.
    """
    if e <= 0.0:
        return 0.0
    e = min(e, table.e_max)
    k = int(math.floor(t / table.delta + 1e-9))
    k = min(max(k, 0), table.n_steps - 1)
    j = int(np.argmin(np.abs(table.h_points - h)))
    de = table.e_grid[1] - table.e_grid[0]
    pos = e / de
    i0 = min(max(int(pos), 0), table.e_grid.shape[0] - 2)
    frac = pos - i0
    p = table.policy[i0, j, k] * (1.0 - frac) + table.policy[i0 + 1, j, k] * frac
    return float(min(max(p, 0.0), e / table.delta))


def expected_bits(table: ValueTable, e: float, h: float, t: float = 0.0) -> float:
    """Interpolated value J(e, h, t): expected bits from state (e, h) at t."""
    e = min(max(e, 0.0), table.e_max)
    k = int(math.floor(t / table.delta + 1e-9))
    k = min(max(k, 0), table.values.shape[2] - 1)
    j = int(np.argmin(np.abs(table.h_points - h)))
    de = table.e_grid[1] - table.e_grid[0]
    pos = e / de
    i0 = min(max(int(pos), 0), table.e_grid.shape[0] - 2)
    frac = pos - i0
    return float(table.values[i0, j, k] * (1.0 - frac) + table.values[i0 + 1, j, k] * frac)


# ── table serialization ─────────────────────────────────────────────────────


def save_table(table: ValueTable, path) -> None:
    """Write a table with a versioned, hash-checked header."""
    header = {
        "version": 1,
        "delta": table.delta,
        "horizon": table.horizon,
        "e_max": table.e_max,
        "n_e": int(table.e_grid.shape[0]),
        "h_points": table.h_points.tolist(),
        "n_steps": table.n_steps,
        "meta": table.meta,
        "values_sha256": hashlib.sha256(np.ascontiguousarray(table.values).tobytes()).hexdigest(),
        "policy_sha256": hashlib.sha256(np.ascontiguousarray(table.policy).tobytes()).hexdigest(),
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        np.save(fh, table.values, allow_pickle=False)
        np.save(fh, table.policy, allow_pickle=False)


def load_table(path) -> ValueTable:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise IncompatibleTable(f"{path}: not a value-table file")
        (blob_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(blob_len).decode())
        if header.get("version") != 1:
            raise IncompatibleTable(f"unsupported table version {header.get('version')}")
        values = np.load(fh, allow_pickle=False)
        policy = np.load(fh, allow_pickle=False)

    for name, arr in (("values", values), ("policy", policy)):
        digest = hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()
        if digest != header[f"{name}_sha256"]:
            raise IncompatibleTable(f"{path}: {name} array fails its checksum")

    e_grid = np.linspace(0.0, header["e_max"], header["n_e"])
    return ValueTable(
        values=values,
        policy=policy,
        e_grid=e_grid,
        h_points=np.asarray(header["h_points"], dtype=float),
        delta=header["delta"],
        horizon=header["horizon"],
        e_max=header["e_max"],
        meta=header["meta"],
    )


def check_compatible(table: ValueTable, horizon: float, e_max: float) -> None:
    """Raise IncompatibleTable when a table cannot drive a simulation."""
    if abs(table.horizon - horizon) > 1e-9 * max(1.0, horizon):
        raise IncompatibleTable(
            f"table horizon {table.horizon} != scenario horizon {horizon}"
        )
    if abs(table.e_max - e_max) > 1e-9 * max(1.0, e_max):
        raise IncompatibleTable(f"table e_max {table.e_max} != scenario e_max {e_max}")


def table_meta_rate(table: ValueTable) -> RateModel:
    return rate_from_json(table.meta["rate"])


def table_meta_energy(table: ValueTable) -> EnergyModel | None:
    spec = table.meta.get("energy_model")
    return energy_from_json(spec) if spec else None
