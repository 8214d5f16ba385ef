"""Fade-level and energy-amount distributions.

All fading models live on the squared-gain (SNR) axis ``h``:

* ``PointMassFading(h)`` -- a static channel;
* ``RayleighFading(mean)`` -- exponential density ``exp(-h/mean)/mean``;
* ``NakagamiFading(m, mean)`` -- Gamma density with shape ``m`` and scale
  ``mean/m`` (reduces to Rayleigh at ``m=1``);
* ``DiscreteFading(points, masses)`` -- an explicit probability table.

Energy amounts are either a point mass or uniform on ``[0, 2*mean]``.

The module also solves for the cutoff fade level ``h0`` of threshold
water-filling policies: the unique root of

    integral_{h0}^inf (1/h0 - 1/h) f(h) dh  =  budget.

For the parametric models the left-hand side has a closed form through
(incomplete) gamma functions; for tables it is an exact sum.  The root is
found by bracketed bisection, which is robust against the blow-up of the
integral as ``h0 -> 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import NonPositiveBudget, UnsupportedForDiscrete

_MASS_TOL = 1e-12


# ── fading models ──────────────────────────────────────────────────────────


@dataclass(frozen=True)
class PointMassFading:
    kind = "point_mass"
    h: float

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("fade level must be > 0")

    @property
    def mean(self) -> float:
        return self.h

    def density(self, h: float) -> float:
        raise UnsupportedForDiscrete("a point mass has no density")

    def sample(self, rng: np.random.Generator, size=None):
        if size is None:
            return self.h
        return np.full(size, self.h)

    def discretize(self, n: int) -> "DiscreteFading":
        _check_cells(n)
        return DiscreteFading((self.h,), (1.0,))

    def cutoff_gap(self, h0: float) -> float:
        return max(1.0 / h0 - 1.0 / self.h, 0.0) if h0 <= self.h else 0.0


class _GammaFading:
    """Common math for fading with a Gamma density on the h axis."""

    #: shape parameter; subclasses define it
    m: float
    mean: float

    @property
    def _scale(self) -> float:
        return self.mean / self.m

    def density(self, h: float) -> float:
        if h < 0:
            raise ValueError("fade level must be >= 0")
        m, th = self.m, self._scale
        if h == 0.0:
            if m > 1:
                return 0.0
            if m == 1:
                return 1.0 / th
            return float("inf")
        return float(h ** (m - 1) * math.exp(-h / th) / (special.gamma(m) * th**m))

    def sample(self, rng: np.random.Generator, size=None):
        val = rng.gamma(shape=self.m, scale=self._scale, size=size)
        return float(val) if size is None else val

    def discretize(self, n: int) -> "DiscreteFading":
        """Equal-mass quantile cells, each represented by its conditional mean.

        The construction preserves total mass and the first moment exactly.
        """
        _check_cells(n)
        m, th = self.m, self._scale
        u = np.linspace(0.0, 1.0, n + 1)
        edges = special.gammaincinv(m, u)  # z = h/theta cell edges
        upper = special.gammainc(m + 1, edges)
        points = th * m * np.diff(upper) * n
        masses = np.full(n, 1.0 / n)
        return DiscreteFading(tuple(points), tuple(masses))

    def cutoff_gap(self, h0: float) -> float:
        """Value of integral_{h0}^inf (1/h0 - 1/h) f(h) dh."""
        m, th = self.m, self._scale
        z = h0 / th
        survival = float(special.gammaincc(m, z))
        if m == 1.0:
            tail_inv = float(special.exp1(z)) / th
        else:
            upper_m = float(special.gammaincc(m, z)) * special.gamma(m)
            upper_m1 = (upper_m - z ** (m - 1) * math.exp(-z)) / (m - 1)
            tail_inv = upper_m1 / (special.gamma(m) * th)
        return survival / h0 - tail_inv


@dataclass(frozen=True)
class RayleighFading(_GammaFading):
    kind = "rayleigh"
    mean: float
    m = 1.0

    def __post_init__(self):
        if self.mean <= 0:
            raise ValueError("mean SNR must be > 0")


@dataclass(frozen=True)
class NakagamiFading(_GammaFading):
    kind = "nakagami"
    m: float
    mean: float

    def __post_init__(self):
        if self.mean <= 0:
            raise ValueError("mean SNR must be > 0")
        if self.m < 0.5:
            raise ValueError("Nakagami shape must be >= 0.5")


@dataclass(frozen=True)
class DiscreteFading:
    kind = "discrete"
    points: tuple[float, ...]
    masses: tuple[float, ...]

    def __post_init__(self):
        pts = self.points
        ms = self.masses
        if len(pts) != len(ms) or not pts:
            raise ValueError("points and masses must be nonempty and equal length")
        if any(p <= 0 for p in pts):
            raise ValueError("fade points must be > 0")
        if any(p2 <= p1 for p1, p2 in zip(pts, pts[1:])):
            raise ValueError("fade points must be strictly increasing")
        if any(m < 0 for m in ms):
            raise ValueError("masses must be nonnegative")
        if abs(sum(ms) - 1.0) > _MASS_TOL:
            raise ValueError("masses must sum to 1")

    @property
    def mean(self) -> float:
        return float(np.dot(self.points, self.masses))

    def density(self, h: float) -> float:
        raise UnsupportedForDiscrete("a discrete fade table has no density")

    def sample(self, rng: np.random.Generator, size=None):
        val = rng.choice(np.asarray(self.points), size=size, p=np.asarray(self.masses))
        return float(val) if size is None else val

    def discretize(self, n: int) -> "DiscreteFading":
        # Already discrete; the table passes through unchanged.
        _check_cells(n)
        return self

    def cutoff_gap(self, h0: float) -> float:
        pts = np.asarray(self.points)
        ms = np.asarray(self.masses)
        above = pts > h0
        return float(np.sum(ms[above]) / h0 - np.sum(ms[above] / pts[above]))


FadingModel = PointMassFading | RayleighFading | NakagamiFading | DiscreteFading


def _check_cells(n: int):
    if n < 2:
        raise ValueError("discretization needs at least 2 cells")


# ── energy models ──────────────────────────────────────────────────────────


@dataclass(frozen=True)
class PointMassEnergy:
    kind = "point_mass"
    amount: float

    def __post_init__(self):
        if self.amount <= 0:
            raise ValueError("energy amount must be > 0")

    @property
    def mean(self) -> float:
        return self.amount

    def sample(self, rng: np.random.Generator, size=None):
        if size is None:
            return self.amount
        return np.full(size, self.amount)

    def discretize(self, n: int):
        return np.array([self.amount]), np.array([1.0])


@dataclass(frozen=True)
class UniformEnergy:
    """Energy amounts uniform on [0, 2*mean]."""

    kind = "uniform_mean"
    mean: float

    def __post_init__(self):
        if self.mean <= 0:
            raise ValueError("mean recharge must be > 0")

    def sample(self, rng: np.random.Generator, size=None):
        val = rng.uniform(0.0, 2.0 * self.mean, size=size)
        return float(val) if size is None else val

    def discretize(self, n: int):
        """Equal-width cell midpoints (= conditional means for a uniform law)."""
        _check_cells(n)
        points = (np.arange(n) + 0.5) * (2.0 * self.mean / n)
        return points, np.full(n, 1.0 / n)


EnergyModel = PointMassEnergy | UniformEnergy


# ── shared operations ──────────────────────────────────────────────────────


def density(model: FadingModel, h: float) -> float:
    return model.density(h)


def discretize(model: FadingModel, n: int) -> DiscreteFading:
    return model.discretize(n)


def sample(model, rng: np.random.Generator, size=None):
    return model.sample(rng, size=size)


def implied_average_power(model: FadingModel, h0: float) -> float:
    """Average power spent by a cutoff-``h0`` water-filling rule."""
    if h0 <= 0:
        raise ValueError("cutoff must be > 0")
    return model.cutoff_gap(h0)


def solve_cutoff(model: FadingModel, budget: float, residual_tol: float = 1e-9) -> float:
    """Cutoff fade ``h0`` whose implied average power equals ``budget``.

    The gap function is strictly decreasing wherever positive and blows up
    as ``h0 -> 0``, so the root is unique; ``1/budget`` always bounds it
    from above because the gap never exceeds ``1/h0``.
    """
    if budget <= 0:
        raise NonPositiveBudget(f"budget must be > 0, got {budget}")
    if isinstance(model, PointMassFading):
        return model.h / (1.0 + model.h * budget)

    tol = residual_tol * max(1.0, budget)
    hi = 1.0 / budget
    guard = 0
    while model.cutoff_gap(hi) > budget:
        hi *= 2.0
        guard += 1
        if guard > 200:
            raise RuntimeError("failed to bracket cutoff from above")
    lo = hi / 2.0
    guard = 0
    while model.cutoff_gap(lo) <= budget:
        lo /= 2.0
        guard += 1
        if guard > 2000:
            raise RuntimeError("failed to bracket cutoff from below")

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gap = model.cutoff_gap(mid)
        if abs(gap - budget) <= tol:
            return mid
        if gap > budget:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ── model JSON specs ───────────────────────────────────────────────────────


def _mean_snr_from(obj: dict) -> float:
    if "mean_snr_db" in obj and "mean_snr" in obj:
        raise ValueError("give mean_snr or mean_snr_db, not both")
    if "mean_snr_db" in obj:
        return 10.0 ** (float(obj["mean_snr_db"]) / 10.0)
    if "mean_snr" in obj:
        return float(obj["mean_snr"])
    raise ValueError("fading spec needs mean_snr or mean_snr_db")


def fading_from_json(obj: dict) -> FadingModel:
    kind = obj.get("kind")
    keys = set(obj) - {"kind"}
    if kind == "point_mass":
        if keys != {"h"}:
            raise ValueError(f"point_mass fading takes h only, got {sorted(keys)}")
        return PointMassFading(float(obj["h"]))
    if kind == "rayleigh":
        if not keys <= {"mean_snr", "mean_snr_db"}:
            raise ValueError(f"unknown rayleigh fields: {sorted(keys)}")
        return RayleighFading(_mean_snr_from(obj))
    if kind == "nakagami":
        if not keys <= {"m", "mean_snr", "mean_snr_db"}:
            raise ValueError(f"unknown nakagami fields: {sorted(keys)}")
        return NakagamiFading(m=float(obj["m"]), mean=_mean_snr_from(obj))
    if kind == "discrete":
        if keys != {"points", "masses"}:
            raise ValueError("discrete fading takes points and masses")
        return DiscreteFading(tuple(map(float, obj["points"])), tuple(map(float, obj["masses"])))
    raise ValueError(f"unknown fading kind {kind!r}")


def fading_to_json(model: FadingModel) -> dict:
    if isinstance(model, PointMassFading):
        return {"kind": "point_mass", "h": model.h}
    if isinstance(model, RayleighFading):
        return {"kind": "rayleigh", "mean_snr": model.mean}
    if isinstance(model, NakagamiFading):
        return {"kind": "nakagami", "m": model.m, "mean_snr": model.mean}
    if isinstance(model, DiscreteFading):
        return {"kind": "discrete", "points": list(model.points), "masses": list(model.masses)}
    raise TypeError(f"not a fading model: {model!r}")


def energy_from_json(obj: dict) -> EnergyModel:
    kind = obj.get("kind")
    keys = set(obj) - {"kind"}
    if kind == "point_mass":
        if keys != {"e_j"}:
            raise ValueError(f"point_mass energy takes e_j only, got {sorted(keys)}")
        return PointMassEnergy(float(obj["e_j"]))
    if kind == "uniform_mean":
        if keys != {"p_j_per_s"}:
            raise ValueError(f"uniform_mean energy takes p_j_per_s only, got {sorted(keys)}")
        return UniformEnergy(float(obj["p_j_per_s"]))
    raise ValueError(f"unknown energy kind {kind!r}")


def energy_to_json(model: EnergyModel) -> dict:
    if isinstance(model, PointMassEnergy):
        return {"kind": "point_mass", "e_j": model.amount}
    if isinstance(model, UniformEnergy):
        return {"kind": "uniform_mean", "p_j_per_s": model.mean}
    raise TypeError(f"not an energy model: {model!r}")
