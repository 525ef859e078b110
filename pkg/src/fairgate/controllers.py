"""Perimeter control strategies consumed by :func:`fairgate.plant.run`.

A strategy exposes ``rates(n, queues)``: zone accumulations and gate queues at
the start of a cycle in, one entering green ratio per gate out.
"""

from __future__ import annotations

import numpy as np

from .balancing import balance
from .gating import ZoneControllerState, assign_rates, blend_shared, pi_update
from .scenario import ScenarioSpec

CONTROLLERS = ("none", "gating", "prop-qb", "maxmin-qb")


class Uncontrolled:
    """Every gate held at ``r_max``."""

    name = "none"

    def __init__(self, spec: ScenarioSpec):
        self._rates = np.full(len(spec.gates), spec.controller.r_max)

    def rates(self, n, queues):
        return self._rates.copy()


class Gating:
    """One PI loop per zone; gates take their zone's rate (blended on shared borders)."""

    name = "gating"

    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self.params = {z.id: spec.zone_params(z.id) for z in spec.zones}
        self.state = {zid: ZoneControllerState.initial(zid, p) for zid, p in self.params.items()}

    def zone_rates(self, n) -> dict[str, float]:
        return {
            z.id: pi_update(self.state[z.id], float(n[i]), self.params[z.id])
            for i, z in enumerate(self.spec.zones)
        }

    def rates(self, n, queues):
        return assign_rates(self.zone_rates(n), self.spec.gates, self.spec.controller.bounds)


class QueueBalancing(Gating):
    """Gating rates turned into per-zone budgets and split across gates by queue."""

    def __init__(self, spec: ScenarioSpec, mechanism: str):
        super().__init__(spec)
        if mechanism not in ("prop", "maxmin"):
            raise ValueError(f"unknown balancing mechanism {mechanism!r}")
        self.mechanism = mechanism
        self.name = f"{mechanism}-qb"
        gi = spec.gate_index
        self._cols = {z.id: [gi[g] for g in z.gate_ids] for z in spec.zones}
        self._caps = np.array([g.queue_capacity for g in spec.gates])

    def zone_grants(self, zone_rates, queues) -> dict[str, dict[int, float]]:
        bounds = self.spec.controller.bounds
        out = {}
        for z in self.spec.zones:
            cols = self._cols[z.id]
            grants = balance(zone_rates[z.id], queues[cols], self.mechanism, bounds,
                             queue_caps=self._caps[cols], gate_ids=list(z.gate_ids))
            out[z.id] = dict(zip(cols, grants))
        return out

    def rates(self, n, queues):
        queues = np.asarray(queues, dtype=float)
        grants = self.zone_grants(self.zone_rates(n), queues)
        bounds = self.spec.controller.bounds
        out = np.empty(len(self.spec.gates))
        for j, g in enumerate(self.spec.gates):
            if g.shared:
                a, b = g.zones
                out[j] = blend_shared(grants[a][j], grants[b][j], bounds)
            else:
                out[j] = grants[g.zones[0]][j]
        return out


def make_controller(name: str, spec: ScenarioSpec):
    if name == "none":
        return Uncontrolled(spec)
    if name == "gating":
        return Gating(spec)
    if name == "prop-qb":
        return QueueBalancing(spec, "prop")
    if name == "maxmin-qb":
        return QueueBalancing(spec, "maxmin")
    raise ValueError(f"unknown controller {name!r}; choose from {', '.join(CONTROLLERS)}")
