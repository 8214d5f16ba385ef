"""Rate model mapping (power, fade) to an instantaneous bit rate.

The rate is ``scale * log_base(1 + fade * power)``.  Two configurations
cover everything the rest of the library needs:

* theory mode: ``scale=1/2, base=2`` -- rate in bits per second per unit
  bandwidth, the form used for closed-form cross checks;
* bandwidth mode: ``scale=W`` Hz, ``base=2`` -- rate in bits per second
  for a channel of bandwidth ``W``.

Optimal schedules are invariant under the choice (positive rescaling and
base change only multiply the objective), so the solvers accept any
RateModel and only the reported objective values differ.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RateModel:
    scale: float = 0.5
    base: float = 2.0

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("rate scale must be positive")
        if self.base <= 1:
            raise ValueError("log base must exceed 1")

    @property
    def nat_scale(self) -> float:
        """Multiplier so that rate = nat_scale * ln(1 + h*p)."""
        return self.scale / math.log(self.base)

    def bits_per_second(self, power, fade):
        """Instantaneous rate; accepts scalars or numpy arrays."""
        return self.nat_scale * np.log1p(np.multiply(fade, power))


THEORY = RateModel(scale=0.5, base=2.0)


def bandwidth(w_hz: float) -> RateModel:
    """Rate model for a channel of bandwidth ``w_hz``."""
    return RateModel(scale=float(w_hz), base=2.0)


def parse_rate(text: str) -> RateModel:
    """Parse a CLI rate spec: ``theory`` or ``bandwidth:<Hz>``."""
    if text == "theory":
        return THEORY
    if text.startswith("bandwidth:"):
        return bandwidth(float(text.split(":", 1)[1]))
    raise ValueError(f"unknown rate spec {text!r}")


def rate_to_json(rate: RateModel) -> dict:
    return {"scale": rate.scale, "base": rate.base}


def rate_from_json(obj: dict) -> RateModel:
    return RateModel(scale=float(obj["scale"]), base=float(obj["base"]))
