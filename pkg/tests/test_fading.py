"""Distributions: densities, discretization, sampling, cutoff solving.

The cutoff gap function is cross-checked against adaptive quadrature of
the defining integral, which stays independent of the closed forms used
by the implementation.
"""

import math

import numpy as np
import pytest
from scipy import integrate

from ehsched.errors import NonPositiveBudget, UnsupportedForDiscrete
from ehsched.fading import (
    DiscreteFading,
    NakagamiFading,
    PointMassEnergy,
    PointMassFading,
    RayleighFading,
    UniformEnergy,
    energy_from_json,
    energy_to_json,
    fading_from_json,
    fading_to_json,
    implied_average_power,
    solve_cutoff,
)


# ── densities ────────────────────────────────────────────────────────────────


def test_rayleigh_density_values():
    ray = RayleighFading(1.0)
    assert math.isclose(ray.density(0.0), 1.0)
    assert math.isclose(ray.density(1.0), math.exp(-1.0), rel_tol=1e-12)


def test_nakagami_m1_reduces_to_rayleigh():
    nak = NakagamiFading(m=1.0, mean=1.0)
    ray = RayleighFading(1.0)
    assert abs(nak.density(0.5) - ray.density(0.5)) < 1e-12


def test_density_integrates_to_one():
    nak = NakagamiFading(m=3.0, mean=10.0**0.5)
    total, _ = integrate.quad(nak.density, 0, np.inf)
    assert math.isclose(total, 1.0, rel_tol=1e-9)


def test_no_density_for_discrete_kinds():
    with pytest.raises(UnsupportedForDiscrete):
        DiscreteFading((1.0,), (1.0,)).density(1.0)
    with pytest.raises(UnsupportedForDiscrete):
        PointMassFading(1.0).density(1.0)


def test_model_invariants():
    with pytest.raises(ValueError):
        NakagamiFading(m=0.3, mean=1.0)
    with pytest.raises(ValueError):
        RayleighFading(0.0)
    with pytest.raises(ValueError):
        DiscreteFading((1.0, 2.0), (0.6, 0.6))
    with pytest.raises(ValueError):
        DiscreteFading((2.0, 1.0), (0.5, 0.5))
    with pytest.raises(ValueError):
        UniformEnergy(-1.0)


# ── discretization ───────────────────────────────────────────────────────────


def test_point_mass_discretizes_to_itself():
    table = PointMassFading(1.0).discretize(2)
    assert table.points == (1.0,)
    assert table.masses == (1.0,)


def test_rayleigh_discretization_mean():
    table = RayleighFading(1.0).discretize(10000)
    assert abs(table.mean - 1.0) < 1e-2
    assert math.isclose(sum(table.masses), 1.0, abs_tol=1e-12)


def test_quantile_cells_preserve_first_moment():
    for model in (RayleighFading(2.5), NakagamiFading(m=3.0, mean=10.0**0.5)):
        for n in (2, 64, 333):
            table = model.discretize(n)
            assert len(table.points) == n
            assert abs(table.mean - model.mean) <= 0.01 * model.mean
            assert math.isclose(sum(table.masses), 1.0, abs_tol=1e-12)


def test_discrete_table_passthrough():
    table = DiscreteFading((0.5, 2.0), (0.5, 0.5))
    assert table.discretize(5) is table


def test_uniform_energy_discretization():
    points, masses = UniformEnergy(0.5).discretize(4)
    assert np.allclose(points, [0.125, 0.375, 0.625, 0.875])
    assert np.allclose(masses, 0.25)
    assert math.isclose(float(points @ masses), 0.5)


# ── sampling ─────────────────────────────────────────────────────────────────


def test_point_mass_sampling():
    rng = np.random.default_rng(0)
    assert PointMassFading(2.0).sample(rng) == 2.0
    assert PointMassEnergy(0.3).sample(rng) == 0.3


def test_uniform_energy_sampling_moments():
    rng = np.random.default_rng(1)
    xs = UniformEnergy(0.5).sample(rng, size=100000)
    assert abs(xs.mean() - 0.5) < 0.01
    assert xs.max() <= 1.0
    assert xs.min() >= 0.0


def test_nakagami_sampling_moment():
    rng = np.random.default_rng(2)
    mean = 10.0**0.5
    xs = NakagamiFading(m=3.0, mean=mean).sample(rng, size=100000)
    assert abs(xs.mean() - mean) < 0.02 * mean


def test_sampling_deterministic_under_seed():
    a = RayleighFading(1.0).sample(np.random.default_rng(9), size=10)
    b = RayleighFading(1.0).sample(np.random.default_rng(9), size=10)
    assert np.array_equal(a, b)


def test_discrete_sampling_support():
    rng = np.random.default_rng(3)
    table = DiscreteFading((0.5, 2.0), (0.25, 0.75))
    xs = table.sample(rng, size=2000)
    assert set(np.unique(xs)) == {0.5, 2.0}


# ── cutoff solving ───────────────────────────────────────────────────────────


def test_point_mass_cutoffs_closed_form():
    assert solve_cutoff(PointMassFading(1.0), 1.0) == 0.5
    assert solve_cutoff(PointMassFading(1.0), 99.0) == 0.01


def test_discrete_cutoff_hand_computed():
    table = DiscreteFading((0.5, 2.0), (0.5, 0.5))
    # gap(0.5) = 1/0.5 - 0.5*(1/0.5 + 1/2) = 0.75
    assert math.isclose(table.cutoff_gap(0.5), 0.75, rel_tol=1e-12)
    assert abs(solve_cutoff(table, 0.75) - 0.5) < 1e-6


def test_non_positive_budget():
    with pytest.raises(NonPositiveBudget):
        solve_cutoff(RayleighFading(1.0), 0.0)


def _quad_gap(model, h0):
    val, _ = integrate.quad(
        lambda h: (1.0 / h0 - 1.0 / h) * model.density(h), h0, np.inf
    )
    return val


@pytest.mark.parametrize(
    "model",
    [
        RayleighFading(1.0),
        RayleighFading(3.0),
        NakagamiFading(m=3.0, mean=10.0**0.5),
        NakagamiFading(m=5.0, mean=1.0),
        NakagamiFading(m=0.5, mean=2.0),
    ],
)
def test_gap_matches_quadrature(model):
    for h0 in (0.05, 0.3, 1.0, 2.7):
        assert math.isclose(model.cutoff_gap(h0), _quad_gap(model, h0), rel_tol=1e-8, abs_tol=1e-12)


@pytest.mark.parametrize(
    "model",
    [
        RayleighFading(1.0),
        NakagamiFading(m=3.0, mean=10.0**0.5),
        DiscreteFading((0.2, 0.9, 1.7, 4.0), (0.2, 0.3, 0.4, 0.1)),
    ],
)
def test_cutoff_round_trip_and_antitone(model):
    budgets = [0.05, 0.2, 0.5, 1.0, 4.0]
    cutoffs = [solve_cutoff(model, b) for b in budgets]
    for b, h0 in zip(budgets, cutoffs):
        assert abs(implied_average_power(model, h0) - b) <= 1e-9 * max(1.0, b)
    assert all(c1 > c2 for c1, c2 in zip(cutoffs, cutoffs[1:]))


# ── model JSON ───────────────────────────────────────────────────────────────


def test_fading_json_round_trip():
    for model in (
        PointMassFading(1.5),
        RayleighFading(2.0),
        NakagamiFading(m=3.0, mean=10.0**0.5),
        DiscreteFading((0.5, 2.0), (0.5, 0.5)),
    ):
        assert fading_from_json(fading_to_json(model)) == model


def test_fading_json_db_units():
    model = fading_from_json({"kind": "nakagami", "m": 3, "mean_snr_db": 5})
    assert math.isclose(model.mean, 10.0**0.5)
    with pytest.raises(ValueError):
        fading_from_json({"kind": "nakagami", "m": 3, "mean_snr_db": 5, "extra": 1})
    with pytest.raises(ValueError):
        fading_from_json({"kind": "laplace", "mean_snr": 1})


def test_energy_json_round_trip():
    for model in (PointMassEnergy(0.5), UniformEnergy(0.25)):
        assert energy_from_json(energy_to_json(model)) == model
    with pytest.raises(ValueError):
        energy_from_json({"kind": "uniform_mean", "p_j_per_s": 0.5, "w": 2})
