"""Accumulation-based multi-zone plant with vertical queues at the gates.

Units: accumulations and queues in vehicles, flows in veh/h, speeds in km/h,
times in seconds. Per step of length ``dt``:

1. arrivals join each gate queue;
2. each zone completes ``min(n, F(n) * dt / 3600)`` trips, with the
   Greenshields production ``F(n) = n * v_f * (1 - n / n_jam) / L``;
3. each gate attempts to admit ``min(queue, s_j * r_j * dt / 3600)``,
   split across its zones by the gate's split fractions;
4. if the attempts into a zone exceed its receiving capacity (and the room
   left below ``n_jam``), every gate feeding that zone is scaled down by the
   same factor; a shared gate takes the tighter factor of its two zones.

Every vehicle admitted completes its trip inside the zone it entered.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .scenario import ScenarioSpec, ZoneSpec, GateSpec, arrival_series


class DomainError(ValueError):
    """Accumulation outside ``[0, n_jam]``."""


def _check_domain(n: float, zone: ZoneSpec) -> None:
    if n < 0 or n > zone.n_jam:
        raise DomainError(f"zone {zone.id}: accumulation {n} outside [0, {zone.n_jam}]")


def speed(n: float, zone: ZoneSpec) -> float:
    """Space-mean speed [km/h] at accumulation ``n``."""
    _check_domain(n, zone)
    return zone.free_flow_speed * (1.0 - n / zone.n_jam)


def nfd_flow(n: float, zone: ZoneSpec) -> float:
    """Trip completion rate [veh/h] at accumulation ``n``."""
    return n * speed(n, zone) / zone.avg_trip_length


def receiving_capacity(n: float, zone: ZoneSpec, gates: Mapping[str, GateSpec] | Sequence[GateSpec]) -> float:
    """Maximum inflow [veh/h] the zone accepts at accumulation ``n``.

    Equal to the summed saturation flow of the zone's gates up to
    ``n_optimal``, then falling linearly to zero at ``n_jam``.
    """
    _check_domain(n, zone)
    if not isinstance(gates, Mapping):
        gates = {g.id: g for g in gates}
    total = sum(gates[g].saturation_flow for g in zone.gate_ids)
    if n <= zone.n_optimal:
        return total
    return max(0.0, total * (zone.n_jam - n) / (zone.n_jam - zone.n_optimal))


@dataclass(frozen=True)
class ZoneState:
    zone_id: str
    n: float
    cumulative_completed: float


@dataclass(frozen=True)
class GateState:
    gate_id: str
    queue: float
    granted_rate: float
    cumulative_arrivals: float
    cumulative_admissions: float


@dataclass
class PlantState:
    """Mutable plant state as arrays: zones along ``n``, gates along ``queue``."""

    n: np.ndarray
    completed: np.ndarray
    queue: np.ndarray
    cum_arrivals: np.ndarray
    cum_admissions: np.ndarray
    delay: np.ndarray

    @classmethod
    def empty(cls, n_zones: int, n_gates: int) -> "PlantState":
        z, g = np.zeros(n_zones), np.zeros(n_gates)
        return cls(z.copy(), z.copy(), g.copy(), g.copy(), g.copy(), g.copy())

    def copy(self) -> "PlantState":
        return PlantState(*(a.copy() for a in (self.n, self.completed, self.queue,
                                                self.cum_arrivals, self.cum_admissions, self.delay)))


class Plant:
    """Vectorised dynamics for one scenario's zones and gates."""

    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        zi = spec.zone_index
        self.n_jam = np.array([z.n_jam for z in spec.zones])
        self.n_opt = np.array([z.n_optimal for z in spec.zones])
        self.v_free = np.array([z.free_flow_speed for z in spec.zones])
        self.trip = np.array([z.avg_trip_length for z in spec.zones])
        self.sat = np.array([g.saturation_flow for g in spec.gates])
        # split[j, i]: share of gate j's admissions entering zone i
        self.split = np.zeros((len(spec.gates), len(spec.zones)))
        for j, g in enumerate(spec.gates):
            for zid, s in zip(g.zones, g.split):
                self.split[j, zi[zid]] = s
        self.member = np.zeros_like(self.split, dtype=bool)
        for j, g in enumerate(spec.gates):
            for zid in g.zones:
                self.member[j, zi[zid]] = True
        self.sat_sum = self.member.T.astype(float) @ self.sat

    def production(self, n: np.ndarray) -> np.ndarray:
        n = np.clip(n, 0.0, self.n_jam)
        return n * self.v_free * (1.0 - n / self.n_jam) / self.trip

    def speeds(self, n: np.ndarray) -> np.ndarray:
        return self.v_free * (1.0 - np.clip(n, 0.0, self.n_jam) / self.n_jam)

    def receiving(self, n: np.ndarray) -> np.ndarray:
        ramp = (self.n_jam - n) / (self.n_jam - self.n_opt)
        return self.sat_sum * np.clip(ramp, 0.0, 1.0)

    def step(self, state: PlantState, rates, arrivals, dt: float) -> np.ndarray:
        """Advance ``state`` in place by ``dt`` seconds; return per-gate admissions [veh]."""
        h = dt / 3600.0
        rates = np.asarray(rates, dtype=float)
        arrivals = np.asarray(arrivals, dtype=float)

        state.queue += arrivals
        state.cum_arrivals += arrivals

        done = np.minimum(state.n, self.production(state.n) * h)
        attempt = np.minimum(state.queue, self.sat * rates * h)
        want = attempt @ self.split
        room = np.minimum(self.receiving(state.n) * h, np.maximum(0.0, self.n_jam - state.n + done))
        over = want > room
        factor = np.divide(room, want, out=np.ones_like(want), where=over)
        gate_factor = np.where(self.member, factor, np.inf).min(axis=1)
        admit = attempt * np.minimum(gate_factor, 1.0)

        state.queue -= admit
        state.cum_admissions += admit
        state.n += admit @ self.split - done
        state.completed += done
        state.delay += state.queue * dt
        return admit


@dataclass
class SimTrace:
    """Per-cycle history of one run; row ``k`` is the state at the end of cycle ``k``.

    ``rate`` and ``admissions`` refer to the cycle that just ended, ``delay`` is
    the queue integral over it [veh*s]; ``cum_*`` and ``completed`` are running
    totals.
    """

    zone_ids: tuple[str, ...]
    gate_ids: tuple[str, ...]
    t: np.ndarray
    n: np.ndarray
    flow: np.ndarray
    speed: np.ndarray
    queue: np.ndarray
    rate: np.ndarray
    admissions: np.ndarray
    cum_arrivals: np.ndarray
    cum_admissions: np.ndarray
    completed: np.ndarray
    delay: np.ndarray
    t_c: float
    controller: str = ""
    seed: int = 0
    scenario_id: str = ""

    def __len__(self) -> int:
        return len(self.t)

    def zone_col(self, zone_id: str) -> int:
        try:
            return self.zone_ids.index(zone_id)
        except ValueError:
            raise KeyError(f"unknown zone {zone_id!r}") from None

    def gate_col(self, gate_id: str) -> int:
        try:
            return self.gate_ids.index(gate_id)
        except ValueError:
            raise KeyError(f"unknown gate {gate_id!r}") from None

    def zone_states(self, k: int) -> list[ZoneState]:
        return [ZoneState(z, float(self.n[k, i]), float(self.completed[k, i])) for i, z in enumerate(self.zone_ids)]

    def gate_states(self, k: int) -> list[GateState]:
        return [
            GateState(g, float(self.queue[k, j]), float(self.rate[k, j]),
                      float(self.cum_arrivals[k, j]), float(self.cum_admissions[k, j]))
            for j, g in enumerate(self.gate_ids)
        ]

    def conservation_error(self) -> float:
        """Relative mismatch between arrivals and (queues + accumulation + completions)."""
        arrived = self.cum_arrivals[-1].sum()
        held = self.queue[-1].sum() + self.n[-1].sum() + self.completed[-1].sum()
        return abs(arrived - held) / max(arrived, 1.0)


TRACE_COLUMNS = ("t", "zone_id", "gate_id", "n", "flow", "speed", "queue", "rate", "admissions",
                 "cum_arrivals", "cum_admissions", "completed", "delay")


def write_trace_csv(trace: SimTrace, path) -> None:
    """Long-format CSV: one zone row and one gate row per entity and cycle; unused cells empty."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for k in range(len(trace)):
            t = repr(float(trace.t[k]))
            for i, z in enumerate(trace.zone_ids):
                w.writerow([t, z, "", repr(float(trace.n[k, i])), repr(float(trace.flow[k, i])),
                            repr(float(trace.speed[k, i])), "", "", "", "", "",
                            repr(float(trace.completed[k, i])), ""])
            for j, g in enumerate(trace.gate_ids):
                w.writerow([t, "", g, "", "", "", repr(float(trace.queue[k, j])), repr(float(trace.rate[k, j])),
                            repr(float(trace.admissions[k, j])), repr(float(trace.cum_arrivals[k, j])),
                            repr(float(trace.cum_admissions[k, j])), "", repr(float(trace.delay[k, j]))])


def read_trace_csv(path, t_c: float, controller: str = "", seed: int = 0) -> SimTrace:
    """Inverse of :func:`write_trace_csv`."""
    rows = list(csv.DictReader(Path(path).open()))
    times = sorted({float(r["t"]) for r in rows})
    zone_ids = tuple(dict.fromkeys(r["zone_id"] for r in rows if r["zone_id"]))
    gate_ids = tuple(dict.fromkeys(r["gate_id"] for r in rows if r["gate_id"]))
    kz, kg = {t: i for i, t in enumerate(times)}, {t: i for i, t in enumerate(times)}
    K, Z, G = len(times), len(zone_ids), len(gate_ids)
    zarr = {c: np.zeros((K, Z)) for c in ("n", "flow", "speed", "completed")}
    garr = {c: np.zeros((K, G)) for c in ("queue", "rate", "admissions", "cum_arrivals", "cum_admissions", "delay")}
    zcol = {z: i for i, z in enumerate(zone_ids)}
    gcol = {g: j for j, g in enumerate(gate_ids)}
    for r in rows:
        t = float(r["t"])
        if r["zone_id"]:
            for c, a in zarr.items():
                a[kz[t], zcol[r["zone_id"]]] = float(r[c])
        else:
            for c, a in garr.items():
                a[kg[t], gcol[r["gate_id"]]] = float(r[c])
    return SimTrace(zone_ids=zone_ids, gate_ids=gate_ids, t=np.array(times), t_c=t_c,
                    controller=controller, seed=seed, **zarr, **garr)


def run(spec: ScenarioSpec, controller="none", seed: int = 0) -> SimTrace:
    """Simulate ``spec`` under ``controller`` for the full horizon.

    ``controller`` is a registered name (``none``, ``gating``, ``prop-qb``,
    ``maxmin-qb``) or an object with ``rates(n, queues) -> per-gate rates``.
    The plant advances at ``plant_dt``; the controller is consulted once per
    cycle with the state at the start of that cycle.
    """
    from .controllers import make_controller

    ctl = make_controller(controller, spec) if isinstance(controller, str) else controller
    name = controller if isinstance(controller, str) else getattr(controller, "name", type(controller).__name__)
    plant = Plant(spec)
    dt = spec.plant_dt
    K, per = spec.n_cycles, spec.cycle_steps
    Z, G = len(spec.zones), len(spec.gates)
    arr = np.column_stack([arrival_series(spec.profile(g.id), K * per, dt, seed) for g in spec.gates])

    state = PlantState.empty(Z, G)
    out = {c: np.zeros((K, Z)) for c in ("n", "flow", "speed", "completed")}
    out.update({c: np.zeros((K, G)) for c in ("queue", "rate", "admissions", "cum_arrivals", "cum_admissions", "delay")})
    for k in range(K):
        rates = np.asarray(ctl.rates(state.n.copy(), state.queue.copy()), dtype=float)
        state.delay[:] = 0.0
        admitted = np.zeros(G)
        base = k * per
        for s in range(per):
            admitted += plant.step(state, rates, arr[base + s], dt)
        out["n"][k] = state.n
        out["flow"][k] = plant.production(state.n)
        out["speed"][k] = plant.speeds(state.n)
        out["completed"][k] = state.completed
        out["queue"][k] = state.queue
        out["rate"][k] = rates
        out["admissions"][k] = admitted
        out["cum_arrivals"][k] = state.cum_arrivals
        out["cum_admissions"][k] = state.cum_admissions
        out["delay"][k] = state.delay
    return SimTrace(
        zone_ids=tuple(z.id for z in spec.zones),
        gate_ids=tuple(g.id for g in spec.gates),
        t=(np.arange(K) + 1) * spec.controller.t_c,
        t_c=spec.controller.t_c,
        controller=name,
        seed=seed,
        scenario_id=spec.fingerprint(),
        **out,
    )
