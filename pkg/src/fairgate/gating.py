"""Zone-level feedback gating.

Each gated zone runs an incremental PI law once per signal cycle::

    r[k] = r[k-1] + K_P * (n_target - n[k]) + K_I * (n[k] - n[k-1])

The result is clamped to ``[r_min, r_max]`` and the clamped value is what the
controller remembers, so the integrator cannot wind up past the bounds.

Gates on a border shared by two gated zones ``a`` and ``b`` receive
``r_a / (r_a + r_b)`` (again clamped). The formula is asymmetric in ``a`` and
``b``; ``a`` is the first zone listed on the gate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class ControllerParams:
    """PI gains, setpoint, green-ratio bounds and cycle length.

    Attributes:
        K_P: gain on the setpoint error [1/veh].
        K_I: gain on the accumulation increment [1/veh].
        n_target: accumulation setpoint [veh].
        r_min: lower bound on the entering green ratio.
        r_max: upper bound on the entering green ratio.
        t_c: signal cycle duration [s].
    """

    K_P: float = 0.007
    K_I: float = 0.001
    n_target: float = 0.0
    r_min: float = 0.2
    r_max: float = 0.5
    t_c: float = 90.0

    def __post_init__(self):
        if not (0.0 <= self.r_min < self.r_max <= 1.0):
            raise ValueError(
                f"rate bounds must satisfy 0 <= r_min < r_max <= 1, got [{self.r_min}, {self.r_max}]"
            )
        if not (self.t_c > 0 and math.isfinite(self.t_c)):
            raise ValueError(f"cycle duration t_c must be positive, got {self.t_c}")
        if not (math.isfinite(self.K_P) and math.isfinite(self.K_I)):
            raise ValueError("controller gains must be finite")
        if not math.isfinite(self.n_target) or self.n_target < 0:
            raise ValueError(f"n_target must be a finite non-negative number, got {self.n_target}")

    @property
    def bounds(self) -> tuple[float, float]:
        return (self.r_min, self.r_max)

    def clamp(self, rate: float) -> float:
        return min(max(rate, self.r_min), self.r_max)


@dataclass
class ZoneControllerState:
    """Memory of one zone's PI controller.

    ``prev_n`` is ``None`` until the first measurement arrives; the first
    update then sees a zero accumulation increment.
    """

    zone_id: str
    prev_rate: float
    prev_n: Optional[float] = None

    @classmethod
    def initial(cls, zone_id: str, params: ControllerParams) -> "ZoneControllerState":
        return cls(zone_id=zone_id, prev_rate=params.r_max, prev_n=None)


def pi_raw(state: ZoneControllerState, n_k: float, params: ControllerParams) -> float:
    """Unclamped PI update; does not touch ``state``."""
    prev_n = n_k if state.prev_n is None else state.prev_n
    return (
        state.prev_rate
        + params.K_P * (params.n_target - n_k)
        + params.K_I * (n_k - prev_n)
    )


def pi_update(state: ZoneControllerState, n_k: float, params: ControllerParams) -> float:
    """Advance the zone controller by one cycle and return the bounded rate."""
    if n_k < 0:
        raise ValueError(f"accumulation must be non-negative, got {n_k}")
    rate = params.clamp(pi_raw(state, n_k, params))
    state.prev_rate = rate
    state.prev_n = float(n_k)
    return rate


def compute_budget(zone_rate: float, gate_count: int) -> float:
    """Total admissible entering green ratio of a zone with ``gate_count`` gates."""
    if gate_count < 1:
        raise ValueError(f"gate_count must be >= 1, got {gate_count}")
    return gate_count * zone_rate


def blend_shared(
    r_a: float,
    r_b: float,
    bounds: tuple[float, float] = (0.2, 0.5),
) -> float:
    """Rate of a gate on the border between zones ``a`` and ``b``.

    Raises:
        ValueError: if both proposed rates are zero.
    """
    if r_a < 0 or r_b < 0:
        raise ValueError(f"rates must be non-negative, got {r_a}, {r_b}")
    total = r_a + r_b
    if total <= 0:
        raise ValueError("cannot blend two zero rates")
    lo, hi = bounds
    return min(max(r_a / total, lo), hi)


def assign_rates(
    zone_rates: Mapping[str, float],
    gates: Sequence,
    bounds: tuple[float, float] = (0.2, 0.5),
) -> np.ndarray:
    """Map zone rates onto gates, blending the rates of shared-border gates.

    ``gates`` is any sequence of objects with a ``zones`` attribute (normally
    :class:`fairgate.scenario.GateSpec`). Returns one rate per gate, in order.
    """
    out = np.empty(len(gates))
    for j, gate in enumerate(gates):
        missing = [z for z in gate.zones if z not in zone_rates]
        if missing:
            raise KeyError(f"gate {gate.id!r}: no rate for zone(s) {missing}")
        if len(gate.zones) == 1:
            out[j] = zone_rates[gate.zones[0]]
        else:
            a, b = gate.zones
            out[j] = blend_shared(zone_rates[a], zone_rates[b], bounds)
    return out
