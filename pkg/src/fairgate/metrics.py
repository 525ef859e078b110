"""Fairness and efficiency statistics over simulation traces.

The four summary statistics map onto four fairness viewpoints:

=====  ===========  ===========================================
stat   viewpoint    focus
=====  ===========  ===========================================
mean   Harsanyian   average individual outcome
max    Rawlsian     worst individual outcome
sum    Utilitarian  society as a whole
std    Egalitarian  dispersion (population divisor, ``ddof=0``)
=====  ===========  ===========================================

Queue populations are per-gate time-mean queues; loss-time populations are
per-gate accumulated waiting delay [veh*s]. Both are pooled over the gates of
a zone (a shared-border gate counts in both of its zones).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .plant import SimTrace

AGGREGATE = "all"
STATS = ("mean", "max", "sum", "std")


@dataclass(frozen=True)
class FairnessStats:
    mean: float
    max: float
    sum: float
    std: float
    count: int

    def as_dict(self, prefix: str = "") -> dict[str, float]:
        return {f"{prefix}{k}": getattr(self, k) for k in STATS}


def fairness_stats(values) -> FairnessStats:
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("fairness statistics need a non-empty population")
    return FairnessStats(mean=float(v.mean()), max=float(v.max()), sum=float(v.sum()),
                         std=float(v.std()), count=int(v.size))


@dataclass(frozen=True)
class LossTimeRecord:
    gate_id: str
    cumulative_delay: float
    waits: np.ndarray


def _first_crossing(t: np.ndarray, cum: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """Earliest time the piecewise-linear curve ``(t, cum)`` reaches each level."""
    idx = np.searchsorted(cum, levels, side="left")
    idx = np.clip(idx, 1, len(cum) - 1)
    c0, c1 = cum[idx - 1], cum[idx]
    t0, t1 = t[idx - 1], t[idx]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(c1 > c0, (levels - c0) / (c1 - c0), 0.0)
    return t0 + np.clip(frac, 0.0, 1.0) * (t1 - t0)


def gate_loss_times(trace: SimTrace, gate_id: str) -> LossTimeRecord:
    """Waiting delay at one gate.

    ``cumulative_delay`` is the cycle-sampled queue integral ``sum_k q[k] * t_c``.
    ``waits`` holds one FIFO wait per whole admitted vehicle: the horizontal
    distance between the cumulative arrival and admission curves (sampled at
    cycle ends and joined linearly, starting from zero at ``t = 0``).
    """
    j = trace.gate_col(gate_id)
    delay = float(trace.queue[:, j].sum() * trace.t_c)
    t = np.concatenate([[0.0], trace.t])
    arr = np.maximum.accumulate(np.concatenate([[0.0], trace.cum_arrivals[:, j]]))
    adm = np.maximum.accumulate(np.concatenate([[0.0], trace.cum_admissions[:, j]]))
    count = int(np.floor(adm[-1] + 1e-9))
    if count == 0:
        return LossTimeRecord(gate_id, delay, np.zeros(0))
    levels = np.arange(1, count + 1, dtype=float)
    waits = _first_crossing(t, adm, levels) - _first_crossing(t, arr, levels)
    return LossTimeRecord(gate_id, delay, np.maximum(waits, 0.0))


def total_delay(trace: SimTrace) -> float:
    """Queue integral over all gates at plant resolution [veh*s]."""
    return float(trace.delay.sum())


def zone_gate_columns(trace: SimTrace, spec, zone_id: str) -> list[int]:
    if zone_id == AGGREGATE:
        return list(range(len(trace.gate_ids)))
    return [trace.gate_col(g) for g in spec.zone(zone_id).gate_ids]


def aggregate_speed(trace: SimTrace) -> np.ndarray:
    """Accumulation-weighted mean speed per cycle (plain mean when the network is empty)."""
    w = trace.n.sum(axis=1)
    weighted = (trace.n * trace.speed).sum(axis=1) / np.where(w > 0, w, 1.0)
    return np.where(w > 0, weighted, trace.speed.mean(axis=1))


def nfd_points(trace: SimTrace, zone_id: str) -> pd.DataFrame:
    """One ``(t, n, flow, speed)`` row per cycle; ``zone_id='all'`` sums over zones."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    if zone_id == AGGREGATE:
        n, flow, spd = trace.n.sum(axis=1), trace.flow.sum(axis=1), aggregate_speed(trace)
    else:
        i = trace.zone_col(zone_id)
        n, flow, spd = trace.n[:, i], trace.flow[:, i], trace.speed[:, i]
    return pd.DataFrame({"t": trace.t, "n": n, "flow": flow, "speed": spd})


def efficiency(trace: SimTrace, zone_id: str = AGGREGATE) -> dict[str, float]:
    pts = nfd_points(trace, zone_id)
    return {"flow": float(pts["flow"].mean()), "speed": float(pts["speed"].mean())}


def run_stats(trace: SimTrace, spec, zone_id: str) -> dict[str, float]:
    """Queue and loss-time fairness statistics plus efficiency for one run and zone."""
    cols = zone_gate_columns(trace, spec, zone_id)
    queues = trace.queue[:, cols].mean(axis=0)
    losses = [gate_loss_times(trace, trace.gate_ids[j]).cumulative_delay for j in cols]
    row = fairness_stats(queues).as_dict("queues_")
    row.update(fairness_stats(losses).as_dict("losstimes_"))
    row.update(efficiency(trace, zone_id))
    return row


REPORT_METRICS = tuple(f"{p}_{s}" for p in ("queues", "losstimes") for s in STATS) + ("flow", "speed")


def compare_report(traces: Mapping[str, Sequence[SimTrace]], spec) -> pd.DataFrame:
    """Across-seed mean and std of each statistic, per zone and controller.

    Columns: ``zone, controller`` then for every metric ``m`` a pair ``m``
    (mean over seeds) and ``m_sd`` (population std over seeds). Rows cover
    every zone and the pooled ``all`` row.

    Raises:
        ValueError: if the traces come from different scenarios, or a
            controller has no traces.
    """
    ids = {tr.scenario_id for runs in traces.values() for tr in runs}
    if len(ids) > 1:
        raise ValueError(f"traces come from different scenarios: {sorted(ids)}")
    if spec is not None and ids and ids != {spec.fingerprint()}:
        raise ValueError("traces do not belong to the given scenario")
    zones = [z.id for z in spec.zones] + [AGGREGATE]
    rows = []
    for zid in zones:
        for ctl, runs in traces.items():
            if not runs:
                raise ValueError(f"controller {ctl!r} has no runs")
            per_seed = pd.DataFrame([run_stats(tr, spec, zid) for tr in runs])
            row = {"zone": zid, "controller": ctl}
            for m in REPORT_METRICS:
                row[m] = float(per_seed[m].mean())
                row[f"{m}_sd"] = float(per_seed[m].std(ddof=0))
            rows.append(row)
    return pd.DataFrame(rows)


def format_table(report: pd.DataFrame, digits: int = 2) -> pd.DataFrame:
    """``mean (sd)`` strings in the layout of a queue / loss-time table."""
    out = report[["zone", "controller"]].copy()
    for m in REPORT_METRICS:
        out[m] = [f"{a:.{digits}f} ({b:.{digits}f})" for a, b in zip(report[m], report[f"{m}_sd"])]
    return out


def nfd_table(traces: Mapping[str, Sequence[SimTrace]], spec) -> pd.DataFrame:
    frames = []
    for ctl, runs in traces.items():
        for tr in runs:
            for zid in [z.id for z in spec.zones] + [AGGREGATE]:
                pts = nfd_points(tr, zid)
                pts.insert(0, "zone", zid)
                pts.insert(0, "seed", tr.seed)
                pts.insert(0, "controller", ctl)
                frames.append(pts)
    return pd.concat(frames, ignore_index=True)


def write_reports(traces: Mapping[str, Sequence[SimTrace]], spec, out_dir) -> tuple[Path, Path]:
    """Write ``fairness_report.csv`` and ``nfd_points.csv`` into ``out_dir``."""
    out_dir = Path(out_dir)
    fair = out_dir / "fairness_report.csv"
    nfd = out_dir / "nfd_points.csv"
    compare_report(traces, spec).to_csv(fair, index=False, float_format="%.10g", lineterminator="\n")
    nfd_table(traces, spec).to_csv(nfd, index=False, float_format="%.10g", lineterminator="\n")
    return fair, nfd
