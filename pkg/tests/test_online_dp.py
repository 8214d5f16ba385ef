"""Backward-induction value tables: construction, lookups, serialization."""

import math

import numpy as np
import pytest

from ehsched import build_timeline
from ehsched.errors import IncompatibleTable, OutOfMemoryBudget
from ehsched.fading import DiscreteFading, PointMassFading, UniformEnergy
from ehsched.offline import waterfill
from ehsched.online_dp import (
    DpConfig,
    build_value_function,
    check_compatible,
    expected_bits,
    load_table,
    optimal_power,
    save_table,
)
from ehsched.rate import THEORY


def _det_config(e_max=1.0, horizon=1.0, delta=0.01, n_e=201):
    return DpConfig(
        delta=delta,
        horizon=horizon,
        e_max=e_max,
        energy_grid=n_e,
        fading=PointMassFading(1.0).discretize(2),
        lambda_e=0.0,
        lambda_f=0.0,
    )


def _stochastic_config(delta=0.02, horizon=2.0, e_max=2.0):
    fading = DiscreteFading((0.5, 1.0, 2.0), (0.25, 0.5, 0.25))
    return DpConfig(
        delta=delta,
        horizon=horizon,
        e_max=e_max,
        energy_grid=81,
        fading=fading,
        lambda_e=1.0,
        lambda_f=1.0,
        energy_model=UniformEnergy(0.5),
    )


def test_config_validation():
    with pytest.raises(ValueError, match="delta"):
        _det_config(delta=0.0)
    with pytest.raises(ValueError, match="integer multiple"):
        _det_config(horizon=1.005, delta=0.01)
    with pytest.raises(ValueError, match="energy grid"):
        _det_config(n_e=1)
    with pytest.raises(ValueError, match="delta\\*rate"):
        DpConfig(
            delta=0.2, horizon=1.0, e_max=1.0, energy_grid=11,
            fading=PointMassFading(1.0).discretize(2),
            lambda_e=1.0, lambda_f=1.0, energy_model=UniformEnergy(0.4),
        )
    with pytest.raises(ValueError, match="energy model"):
        DpConfig(
            delta=0.01, horizon=1.0, e_max=1.0, energy_grid=11,
            fading=PointMassFading(1.0).discretize(2),
            lambda_e=1.0, lambda_f=0.0,
        )


def test_memory_cap():
    cfg = DpConfig(
        delta=0.001, horizon=10.0, e_max=1.0, energy_grid=401,
        fading=PointMassFading(1.0).discretize(2),
        lambda_e=0.0, lambda_f=0.0, memory_cap_bytes=10_000_000,
    )
    with pytest.raises(OutOfMemoryBudget):
        build_value_function(cfg)


def test_terminal_layer_zero_and_empty_battery():
    table = build_value_function(_det_config())
    assert table.values[:, :, -1].max() == 0.0
    assert table.values[0, :, :].max() == 0.0  # no energy, no bits (lambda_e=0)
    assert optimal_power(table, 0.0, 1.0, 0.5) == 0.0


def test_deterministic_recovers_constant_power_optimum():
    # lambda=0, static fade: the offline optimum drains e0 evenly over T
    for e0, horizon in ((1.0, 1.0), (0.5, 2.0), (2.0, 4.0)):
        cfg = _det_config(e_max=e0, horizon=horizon)
        table = build_value_function(cfg)
        want = horizon * THEORY.bits_per_second(e0 / horizon, 1.0)
        got = expected_bits(table, e0, 1.0, 0.0)
        assert abs(got - want) <= 0.02 * want


def test_policy_is_even_drain_mid_horizon():
    table = build_value_function(_det_config(e_max=1.0, horizon=1.0))
    p = optimal_power(table, 0.5, 1.0, 0.5)
    assert abs(p - 1.0) <= 0.05  # e/(T-t) = 0.5/0.5


def test_value_monotone_in_energy_and_time():
    table = build_value_function(_stochastic_config())
    j = table.values
    assert (np.diff(j, axis=0) >= -1e-8).all()  # more energy never hurts
    assert (np.diff(j, axis=2) <= 1e-8).all()  # less remaining time never helps


def test_optimal_power_clamped_to_drain_rate():
    table = build_value_function(_stochastic_config())
    for e in (0.0, 1e-4, 0.3, 1.7, 2.0):
        for t in (0.0, 0.5, 1.99):
            p = optimal_power(table, e, 1.0, t)
            assert 0.0 <= p <= e / table.delta + 1e-12


def test_off_support_fade_snaps_to_nearest():
    table = build_value_function(_stochastic_config())
    assert optimal_power(table, 1.0, 0.49, 1.0) == optimal_power(table, 1.0, 0.5, 1.0)
    assert optimal_power(table, 1.0, 100.0, 1.0) == optimal_power(table, 1.0, 2.0, 1.0)


def test_refinement_stability_deterministic():
    cfg = _det_config(e_max=1.0, horizon=1.0, delta=0.01, n_e=101)
    fine = DpConfig(
        delta=cfg.delta / 2, horizon=cfg.horizon, e_max=cfg.e_max,
        energy_grid=2 * cfg.energy_grid, fading=cfg.fading,
        lambda_e=0.0, lambda_f=0.0,
    )
    j0 = expected_bits(build_value_function(cfg), 1.0, 1.0, 0.0)
    j1 = expected_bits(build_value_function(fine), 1.0, 1.0, 0.0)
    assert abs(j1 - j0) <= 0.02 * max(j0, j1)


def test_dp_never_beats_offline_bound():
    # with lambda=0 the value function cannot exceed the offline optimum
    cfg = _det_config(e_max=1.5, horizon=3.0)
    table = build_value_function(cfg)
    tl = build_timeline(3.0, 1.5, 1.5, [], [(0.0, 1.0)])
    offline = waterfill(tl).objective_bits
    assert expected_bits(table, 1.5, 1.0, 0.0) <= offline + 1e-9


# ── serialization ────────────────────────────────────────────────────────────


def test_save_load_round_trip(tmp_path):
    table = build_value_function(_stochastic_config())
    path = tmp_path / "table.bin"
    save_table(table, path)
    loaded = load_table(path)
    assert np.array_equal(loaded.values, table.values)
    assert np.array_equal(loaded.policy, table.policy)
    assert loaded.delta == table.delta
    assert loaded.meta["lambda_e"] == 1.0
    # byte-identical on re-save
    path2 = tmp_path / "table2.bin"
    save_table(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_load_rejects_corruption(tmp_path):
    table = build_value_function(_det_config(n_e=11, delta=0.1))
    path = tmp_path / "table.bin"
    save_table(table, path)
    blob = bytearray(path.read_bytes())
    blob[-9] ^= 0xFF  # flip a byte inside the policy array
    path.write_bytes(bytes(blob))
    with pytest.raises(IncompatibleTable, match="checksum"):
        load_table(path)
    with pytest.raises(IncompatibleTable, match="not a value-table"):
        bad = tmp_path / "junk.bin"
        bad.write_bytes(b"not a table")
        load_table(bad)


def test_compatibility_check():
    table = build_value_function(_det_config(e_max=1.0, horizon=1.0))
    check_compatible(table, 1.0, 1.0)
    with pytest.raises(IncompatibleTable, match="horizon"):
        check_compatible(table, 2.0, 1.0)
    with pytest.raises(IncompatibleTable, match="e_max"):
        check_compatible(table, 1.0, 2.0)
