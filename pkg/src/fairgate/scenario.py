"""Scenario files and seeded per-gate demand.

A scenario is a YAML document with five top-level blocks::

    horizon: 28800          # s, multiple of t_c
    plant_dt: 1.0           # s, divides t_c
    controller: {K_P: 0.007, K_I: 0.001, r_min: 0.2, r_max: 0.5, t_c: 90}
    zones:
      - {id: "1", n_jam: 110, n_target: 45, free_flow_speed: 30,
         avg_trip_length: 1.0, gate_ids: [g1a, g1b]}
    gates:
      - {id: g1a, zones: ["1"], saturation_flow: 500, queue_capacity: 30}
      - {id: g13, zones: ["3", "1"], saturation_flow: 500, queue_capacity: 30,
         split: [0.5, 0.5]}
    profiles:               # optional named segment lists
      peak: [[0, 3600, 200], [3600, 28800, 400]]
    demand:
      - {gate_id: g1a, profile: peak, scale: 1.0, noise_std: 40, seed: 1}
      - {gate_id: g1b, segments: [[0, 28800, 250]], noise_std: 0, seed: 2}

``n_optimal`` may be given per zone but must equal ``n_jam / 2`` (the peak
of the Greenshields production curve); it defaults to that value. Gates
without a demand entry receive no arrivals.

Demand noise is Gaussian, piecewise constant over :data:`NOISE_BIN` seconds,
and a pure function of ``(run_seed, profile.seed, bin index)``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from .gating import ControllerParams

NOISE_BIN = 60.0

_EPS = 1e-9


class ScenarioError(ValueError):
    """A scenario violates one of its invariants."""


class ScenarioParseError(ScenarioError):
    """A scenario file could not be read or parsed."""


@dataclass(frozen=True)
class ZoneSpec:
    id: str
    n_jam: float
    n_optimal: float
    n_target: float
    free_flow_speed: float
    avg_trip_length: float
    gate_ids: tuple[str, ...]

    @property
    def capacity(self) -> float:
        """Peak production [veh/h]."""
        return self.n_optimal * self.free_flow_speed * 0.5 / self.avg_trip_length


@dataclass(frozen=True)
class GateSpec:
    id: str
    zones: tuple[str, ...]
    saturation_flow: float
    queue_capacity: float
    split: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.split:
            object.__setattr__(self, "split", tuple(1.0 / len(self.zones) for _ in self.zones) if self.zones else ())

    @property
    def shared(self) -> bool:
        return len(self.zones) == 2


@dataclass(frozen=True)
class DemandProfile:
    gate_id: str
    segments: tuple[tuple[float, float, float], ...]
    noise_std: float = 0.0
    seed: int = 0

    def base_rate(self, t: float) -> float:
        for start, end, rate in self.segments:
            if start <= t < end:
                return rate
        # Past the last segment end: hold the last rate.
        return self.segments[-1][2]


@dataclass(frozen=True)
class ScenarioSpec:
    zones: tuple[ZoneSpec, ...]
    gates: tuple[GateSpec, ...]
    demand: tuple[DemandProfile, ...]
    controller: ControllerParams
    horizon: float
    plant_dt: float = 1.0
    name: str = ""

    def __post_init__(self):
        validate(self)

    @property
    def zone_index(self) -> dict[str, int]:
        return {z.id: i for i, z in enumerate(self.zones)}

    @property
    def gate_index(self) -> dict[str, int]:
        return {g.id: j for j, g in enumerate(self.gates)}

    def zone(self, zone_id: str) -> ZoneSpec:
        for z in self.zones:
            if z.id == zone_id:
                return z
        raise KeyError(f"unknown zone {zone_id!r}")

    def gate(self, gate_id: str) -> GateSpec:
        for g in self.gates:
            if g.id == gate_id:
                return g
        raise KeyError(f"unknown gate {gate_id!r}")

    def profile(self, gate_id: str) -> Optional[DemandProfile]:
        for p in self.demand:
            if p.gate_id == gate_id:
                return p
        return None

    def zone_params(self, zone_id: str) -> ControllerParams:
        return replace(self.controller, n_target=self.zone(zone_id).n_target)

    @property
    def cycle_steps(self) -> int:
        return int(round(self.controller.t_c / self.plant_dt))

    @property
    def n_cycles(self) -> int:
        return int(round(self.horizon / self.controller.t_c))

    def fingerprint(self) -> str:
        return hashlib.sha256(repr((self.zones, self.gates, self.demand, self.controller,
                                    self.horizon, self.plant_dt)).encode()).hexdigest()[:16]


def _is_multiple(a: float, b: float) -> bool:
    ratio = a / b
    return abs(ratio - round(ratio)) < 1e-9 * max(1.0, ratio) and round(ratio) >= 1


def validate(spec: ScenarioSpec) -> None:
    """Check every scenario invariant; raise :class:`ScenarioError` naming the offender."""
    ctl = spec.controller
    if not (spec.plant_dt > 0):
        raise ScenarioError(f"plant_dt must be positive, got {spec.plant_dt}")
    if not _is_multiple(ctl.t_c, spec.plant_dt):
        raise ScenarioError(f"plant_dt {spec.plant_dt} does not divide t_c {ctl.t_c}")
    if not (spec.horizon > 0) or not _is_multiple(spec.horizon, ctl.t_c):
        raise ScenarioError(f"horizon {spec.horizon} must be a positive multiple of t_c {ctl.t_c}")
    if not spec.zones:
        raise ScenarioError("scenario has no zones")

    gate_ids = [g.id for g in spec.gates]
    if len(set(gate_ids)) != len(gate_ids):
        raise ScenarioError("duplicate gate ids")
    zone_ids = [z.id for z in spec.zones]
    if len(set(zone_ids)) != len(zone_ids):
        raise ScenarioError("duplicate zone ids")
    known_gates = set(gate_ids)

    for z in spec.zones:
        if not (0 < z.n_target <= z.n_optimal < z.n_jam):
            raise ScenarioError(
                f"zone {z.id}: need 0 < n_target <= n_optimal < n_jam, got "
                f"n_target={z.n_target}, n_optimal={z.n_optimal}, n_jam={z.n_jam}"
            )
        if abs(z.n_optimal - z.n_jam / 2) > 1e-9 * z.n_jam:
            raise ScenarioError(f"zone {z.id}: n_optimal must equal n_jam / 2 = {z.n_jam / 2}")
        if not (z.free_flow_speed > 0 and z.avg_trip_length > 0):
            raise ScenarioError(f"zone {z.id}: free_flow_speed and avg_trip_length must be positive")
        if not z.gate_ids:
            raise ScenarioError(f"zone {z.id}: gate_ids is empty")
        if len(set(z.gate_ids)) != len(z.gate_ids):
            raise ScenarioError(f"zone {z.id}: duplicate gate ids")
        for gid in z.gate_ids:
            if gid not in known_gates:
                raise ScenarioError(f"zone {z.id}: gate {gid!r} is not defined")

    listed_by = {g: {z.id for z in spec.zones if g in z.gate_ids} for g in gate_ids}
    for g in spec.gates:
        if len(g.zones) not in (1, 2) or len(set(g.zones)) != len(g.zones):
            raise ScenarioError(f"gate {g.id}: must belong to 1 or 2 distinct zones, got {list(g.zones)}")
        for zid in g.zones:
            if zid not in zone_ids:
                raise ScenarioError(f"gate {g.id}: unknown zone {zid!r}")
        if set(g.zones) != listed_by[g.id]:
            raise ScenarioError(
                f"gate {g.id}: zones {sorted(g.zones)} disagree with zones listing it {sorted(listed_by[g.id])}"
            )
        if not (g.saturation_flow > 0):
            raise ScenarioError(f"gate {g.id}: saturation_flow must be positive")
        if not (g.queue_capacity > 0):
            raise ScenarioError(f"gate {g.id}: queue_capacity must be positive")
        if len(g.split) != len(g.zones) or any(s < 0 for s in g.split) or abs(sum(g.split) - 1) > 1e-9:
            raise ScenarioError(f"gate {g.id}: split {list(g.split)} must be non-negative and sum to 1")

    seen = set()
    for p in spec.demand:
        if p.gate_id not in known_gates:
            raise ScenarioError(f"demand: unknown gate {p.gate_id!r}")
        if p.gate_id in seen:
            raise ScenarioError(f"demand: gate {p.gate_id} has more than one profile")
        seen.add(p.gate_id)
        if p.noise_std < 0:
            raise ScenarioError(f"demand {p.gate_id}: noise_std must be non-negative")
        if not isinstance(p.seed, int) or p.seed < 0:
            raise ScenarioError(f"demand {p.gate_id}: seed must be a non-negative integer")
        if not p.segments:
            raise ScenarioError(f"demand {p.gate_id}: no segments")
        t = 0.0
        for start, end, rate in p.segments:
            if abs(start - t) > _EPS:
                raise ScenarioError(f"demand {p.gate_id}: segments must be contiguous from 0 (gap at {t})")
            if not end > start:
                raise ScenarioError(f"demand {p.gate_id}: empty segment [{start}, {end})")
            if rate < 0:
                raise ScenarioError(f"demand {p.gate_id}: negative base rate {rate}")
            t = end
        if t < spec.horizon - _EPS:
            raise ScenarioError(f"demand {p.gate_id}: segments end at {t}, before the horizon {spec.horizon}")


# -- loading -----------------------------------------------------------------


def _num(block: dict, key: str, where: str, default=None) -> float:
    if key not in block:
        if default is not None:
            return default
        raise ScenarioError(f"{where}: missing key {key!r}")
    try:
        return float(block[key])
    except (TypeError, ValueError):
        raise ScenarioError(f"{where}: {key} must be numeric, got {block[key]!r}") from None


def _segments(raw, where: str) -> tuple:
    try:
        return tuple((float(a), float(b), float(c)) for a, b, c in raw)
    except (TypeError, ValueError):
        raise ScenarioError(f"{where}: segments must be [start, end, rate] triples") from None


def scenario_from_dict(doc: dict, name: str = "") -> ScenarioSpec:
    if not isinstance(doc, dict):
        raise ScenarioParseError("scenario document must be a mapping")
    for key in ("zones", "gates", "controller", "horizon"):
        if key not in doc:
            raise ScenarioError(f"scenario: missing top-level key {key!r}")

    c = doc["controller"] or {}
    try:
        controller = ControllerParams(
            K_P=_num(c, "K_P", "controller"),
            K_I=_num(c, "K_I", "controller"),
            r_min=_num(c, "r_min", "controller"),
            r_max=_num(c, "r_max", "controller"),
            t_c=_num(c, "t_c", "controller"),
        )
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"controller: {exc}") from None

    zones = []
    for raw in doc["zones"]:
        zid = str(raw.get("id", ""))
        where = f"zone {zid}"
        n_jam = _num(raw, "n_jam", where)
        zones.append(
            ZoneSpec(
                id=zid,
                n_jam=n_jam,
                n_optimal=_num(raw, "n_optimal", where, default=n_jam / 2),
                n_target=_num(raw, "n_target", where),
                free_flow_speed=_num(raw, "free_flow_speed", where),
                avg_trip_length=_num(raw, "avg_trip_length", where),
                gate_ids=tuple(str(g) for g in raw.get("gate_ids") or ()),
            )
        )

    gates = []
    for raw in doc["gates"]:
        gid = str(raw.get("id", ""))
        where = f"gate {gid}"
        gates.append(
            GateSpec(
                id=gid,
                zones=tuple(str(z) for z in raw.get("zones") or ()),
                saturation_flow=_num(raw, "saturation_flow", where),
                queue_capacity=_num(raw, "queue_capacity", where),
                split=tuple(float(s) for s in raw.get("split") or ()),
            )
        )

    profiles = doc.get("profiles") or {}
    demand = []
    for raw in doc.get("demand") or ():
        gid = str(raw.get("gate_id", ""))
        where = f"demand {gid}"
        if "segments" in raw:
            segs = _segments(raw["segments"], where)
        elif "profile" in raw:
            if raw["profile"] not in profiles:
                raise ScenarioError(f"{where}: unknown profile {raw['profile']!r}")
            segs = _segments(profiles[raw["profile"]], where)
        else:
            raise ScenarioError(f"{where}: needs 'segments' or 'profile'")
        scale = _num(raw, "scale", where, default=1.0)
        segs = tuple((a, b, r * scale) for a, b, r in segs)
        seed = raw.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ScenarioError(f"{where}: seed must be an integer, got {seed!r}")
        demand.append(
            DemandProfile(gate_id=gid, segments=segs, noise_std=_num(raw, "noise_std", where, default=0.0), seed=seed)
        )

    return ScenarioSpec(
        zones=tuple(zones),
        gates=tuple(gates),
        demand=tuple(demand),
        controller=controller,
        horizon=_num(doc, "horizon", "scenario"),
        plant_dt=_num(doc, "plant_dt", "scenario", default=1.0),
        name=name,
    )


def load_scenario(path) -> ScenarioSpec:
    """Read and validate a scenario file.

    Raises:
        ScenarioParseError: the file is missing or is not valid YAML.
        ScenarioError: an invariant is violated; the message names the entity.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioParseError(f"cannot read scenario {path}: {exc.strerror or exc}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioParseError(f"{path}: malformed YAML: {exc}") from None
    return scenario_from_dict(doc, name=path.stem)


def builtin_path(name: str = "default") -> Path:
    """Path of a scenario shipped with the package (``default``, ``heterogeneous``, ``single_zone``)."""
    return Path(str(resources.files("fairgate") / "data" / f"{name}.yaml"))


def builtin(name: str = "default") -> ScenarioSpec:
    return load_scenario(builtin_path(name))


# -- demand ------------------------------------------------------------------


@lru_cache(maxsize=200_000)
def _gauss(run_seed: int, stream: int, index: int) -> float:
    # Box-Muller on two 53-bit uniforms drawn from a SeedSequence keyed on
    # (run seed, stream, bin); independent of call order.
    w = np.random.SeedSequence([run_seed, stream, index]).generate_state(2, dtype=np.uint64)
    u1 = ((int(w[0]) >> 11) + 1) * 2.0**-53
    u2 = (int(w[1]) >> 11) * 2.0**-53
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def arrival_rate(profile: DemandProfile, t: float, run_seed: int = 0) -> float:
    """Realised arrival rate [veh/h] at time ``t``, clamped at zero."""
    rate = profile.base_rate(t)
    if profile.noise_std > 0:
        rate = rate + profile.noise_std * _gauss(run_seed, profile.seed, int(t // NOISE_BIN))
    return max(0.0, rate)


def arrivals(profile: DemandProfile, t: float, dt: float, run_seed: int = 0) -> float:
    """Vehicles arriving at the gate during ``[t, t + dt)``."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return arrival_rate(profile, t, run_seed) * dt / 3600.0


def arrival_series(profile: Optional[DemandProfile], steps: int, dt: float, run_seed: int = 0) -> np.ndarray:
    """Per-step arrivals for ``steps`` plant steps of ``dt``; equals repeated :func:`arrivals`."""
    if profile is None:
        return np.zeros(steps)
    t = np.arange(steps) * dt
    # Rates only change at segment ends and noise-bin edges, so evaluate once per piece.
    edges = sorted({0.0, *(e for _, e, _ in profile.segments)}
                   | (set(np.arange(0.0, steps * dt, NOISE_BIN)) if profile.noise_std > 0 else set()))
    out = np.empty(steps)
    bounds = np.searchsorted(t, edges, side="left").tolist() + [steps]
    for k in range(len(edges)):
        a, b = bounds[k], bounds[k + 1]
        if a >= b:
            continue
        out[a:b] = arrival_rate(profile, t[a], run_seed) * dt / 3600.0
    return out
