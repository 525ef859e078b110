"""Perimetral queue balancing.

A zone's gating controller commands one rate ``r`` for the zone, which fixes
the inflow budget ``B = gate_count * r``. The allocators here split that
budget across the zone's gates according to their queues, keeping every grant
inside ``[r_min, r_max]`` and never spending more than ``B``.

Two rules are provided:

* proportional: grants proportional to queue length (clamped, with the
  clamping residual redistributed).
* max-min: every gate gets the floor ``r_min``; the surplus budget is then
  water-filled against each gate's surplus request, smallest requests first.

The max-min loop runs in green-ratio units: requests come from
:func:`demands_from_queues` and the budget from the gating rate, so the
equal share ``rho`` is a share of the remaining *budget*, not a mean of
queue lengths.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .gating import compute_budget

ATOL = 1e-12


class InfeasibleBudgetError(ValueError):
    """The budget cannot cover ``r_min`` on every gate."""


@dataclass(frozen=True)
class AllocationRequest:
    gate_id: str
    queue: float
    demand: float


@dataclass(frozen=True)
class AllocationResult:
    grants: np.ndarray
    total_granted: float
    budget: float

    @classmethod
    def from_grants(cls, grants, budget: float) -> "AllocationResult":
        grants = np.asarray(grants, dtype=float)
        return cls(grants=grants, total_granted=float(grants.sum()), budget=float(budget))


def _check_budget(budget: float, count: int, lo: float) -> None:
    if count < 1:
        raise ValueError("need at least one gate")
    if budget < count * lo - 1e-9:
        raise InfeasibleBudgetError(
            f"budget {budget:.6g} is below the floor sum {count} * {lo} = {count * lo:.6g}"
        )


def demands_from_queues(queues, queue_caps, bounds: tuple[float, float]) -> np.ndarray:
    """Requested green ratio per gate, linear in queue length up to ``queue_cap``."""
    q = np.asarray(queues, dtype=float)
    caps = np.asarray(queue_caps, dtype=float)
    if np.any(q < 0):
        raise ValueError("queues must be non-negative")
    if np.any(caps <= 0):
        raise ValueError("queue capacities must be positive")
    lo, hi = bounds
    return lo + (hi - lo) * np.minimum(1.0, q / caps)


def requests(gate_ids: Sequence[str], queues, queue_caps, bounds) -> list[AllocationRequest]:
    demands = demands_from_queues(queues, queue_caps, bounds)
    return [
        AllocationRequest(gate_id=g, queue=float(q), demand=float(d))
        for g, q, d in zip(gate_ids, np.asarray(queues, dtype=float), demands)
    ]


def _clipped_scale(shares: np.ndarray, budget: float, lo: float, hi: float) -> np.ndarray:
    """Find ``lam`` with ``sum(clip(lam * shares, lo, hi)) == budget`` and return the clip.

    ``sum(clip(lam * s))`` is piecewise linear and non-decreasing in ``lam``
    with kinks at ``lo / s_j`` and ``hi / s_j``, so the budget is located
    between two kinks and the segment solved by linear interpolation. Gates
    with zero share stay at ``lo``.
    """
    pos = shares > 0
    if not np.any(pos):
        return np.full(shares.shape, lo)
    kinks = np.unique(np.concatenate([lo / shares[pos], hi / shares[pos]]))
    totals = np.array([np.clip(k * shares, lo, hi).sum() for k in kinks])
    if budget >= totals[-1]:
        lam = kinks[-1]
    elif budget <= totals[0]:
        lam = kinks[0]
    else:
        i = int(np.searchsorted(totals, budget, side="left"))
        t0, t1 = totals[i - 1], totals[i]
        lam = kinks[i - 1] + (budget - t0) * (kinks[i] - kinks[i - 1]) / (t1 - t0)
    return np.clip(lam * shares, lo, hi)


def proportional_allocate(queues, budget: float, bounds: tuple[float, float]) -> AllocationResult:
    """Split ``budget`` in proportion to queue lengths, within bounds.

    Grants inside the bounds are exactly proportional to queues; the grant
    total is ``min(budget, n * r_max)``. With no queues anywhere the budget is
    split equally. If every queued gate saturates at ``r_max`` with budget left
    over, the rest is split equally among the empty-queue gates.

    Raises:
        InfeasibleBudgetError: if ``budget < n * r_min``.
    """
    q = np.asarray(queues, dtype=float)
    if np.any(q < 0):
        raise ValueError("queues must be non-negative")
    lo, hi = bounds
    count = q.size
    _check_budget(budget, count, lo)
    spend = min(budget, count * hi)

    total_q = q.sum()
    if total_q <= 0:
        grants = np.full(count, min(max(spend / count, lo), hi))
        return AllocationResult.from_grants(grants, budget)

    shares = q / total_q
    # Shares this small only carry rounding noise; treat them as empty queues.
    shares[shares < 1e-12] = 0.0
    grants = _clipped_scale(shares, spend, lo, hi)
    residual = spend - grants.sum()
    empty = shares == 0
    if residual > ATOL and np.any(empty):
        grants[empty] = np.minimum(hi, lo + residual / empty.sum())
    return AllocationResult.from_grants(grants, budget)


def maxmin_allocate(
    demands,
    budget: float,
    bounds: tuple[float, float],
    gate_ids: Optional[Sequence[str]] = None,
) -> AllocationResult:
    """Iterative max-min allocation of ``budget`` against per-gate requests.

    Every gate starts at ``r_min``. Remaining gates are visited in increasing
    order of request (ties by gate id); each round computes the equal share
    ``rho`` of the budget still unspent, fully serves every gate whose surplus
    request fits under ``rho`` and removes it. When no remaining gate fits,
    all of them receive ``rho`` and the loop stops.

    If the requests sum to less than the budget the surplus is left unspent;
    see :func:`balance` for how the budget is topped up.

    Raises:
        InfeasibleBudgetError: if ``budget < n * r_min``.
        ValueError: if a request lies outside the bounds.
    """
    d = np.asarray(demands, dtype=float)
    lo, hi = bounds
    count = d.size
    _check_budget(budget, count, lo)
    if np.any(d < lo - 1e-9) or np.any(d > hi + 1e-9):
        raise ValueError(f"demands must lie in [{lo}, {hi}]")
    d = np.clip(d, lo, hi)
    if gate_ids is None:
        gate_ids = [f"{j:06d}" for j in range(count)]

    grants = np.full(count, lo)
    surplus = d - lo
    remaining_budget = max(0.0, budget - count * lo)
    order = sorted(range(count), key=lambda j: (d[j], gate_ids[j]))

    pos = 0
    while pos < count:
        rho = remaining_budget / (count - pos)
        served = pos
        while served < count and surplus[order[served]] <= rho:
            served += 1
        if served == pos:
            for j in order[pos:]:
                grants[j] = lo + rho
            break
        for j in order[pos:served]:
            grants[j] = d[j]
            remaining_budget -= surplus[j]
        remaining_budget = max(0.0, remaining_budget)
        pos = served
    return AllocationResult.from_grants(grants, budget)


def _topup(grants: np.ndarray, leftover: float, hi: float) -> np.ndarray:
    """Hand out ``leftover`` as equal increments, capping each gate at ``hi``."""
    grants = grants.copy()
    head = hi - grants
    while leftover > ATOL:
        open_ = head > ATOL
        if not np.any(open_):
            break
        inc = min(leftover / open_.sum(), head[open_].min())
        grants[open_] += inc
        head[open_] -= inc
        leftover -= inc * open_.sum()
    return np.minimum(grants, hi)


def maxmin_oracle(demands, budget: float, bounds: tuple[float, float], grid: float = 0.01) -> AllocationResult:
    """Exhaustive lexicographic max-min search on a rate grid (test oracle).

    Every grant vector with entries on the grid, ``r_min <= g_j <= min(d_j,
    r_max)`` and ``sum(g) <= budget`` is a candidate; the winner has the
    lexicographically largest ascending-sorted vector. The search is a
    depth-first enumeration that skips a subtree only when the componentwise
    upper bound of every completion, once sorted, cannot beat the incumbent.

    Raises:
        ValueError: for more than 5 gates or a grid other than 0.01 / 0.005.
    """
    d = np.asarray(demands, dtype=float)
    count = d.size
    if count > 5:
        raise ValueError(f"instance too large for the oracle: {count} gates (max 5)")
    if count < 1:
        raise ValueError("need at least one gate")
    if grid not in (0.01, 0.005):
        raise ValueError(f"grid must be 0.01 or 0.005, got {grid}")
    lo, hi = bounds
    _check_budget(budget, count, lo)

    eps = 1e-9
    lo_u = int(np.ceil(lo / grid - eps))
    caps = [int(np.floor(min(dj, hi) / grid + eps)) for dj in d]
    budget_u = int(np.floor(budget / grid + eps))
    if any(c < lo_u for c in caps):
        raise ValueError("a demand is below the grid floor")

    best: list = [None]
    best_vec: list = [None]
    vec = [0] * count

    def search(j: int, spent: int) -> None:
        rest = count - j
        if j == count:
            cand = sorted(vec)
            if best[0] is None or cand > best[0]:
                best[0] = cand
                best_vec[0] = list(vec)
            return
        room = budget_u - spent - lo_u * (rest - 1)
        top = min(caps[j], room)
        for v in range(top, lo_u - 1, -1):
            vec[j] = v
            if best[0] is not None:
                left = budget_u - spent - v
                bound = sorted(vec[: j + 1] + [min(caps[i], left - lo_u * (count - j - 2)) for i in range(j + 1, count)])
                if bound <= best[0]:
                    continue
            search(j + 1, spent + v)

    search(0, 0)
    return AllocationResult.from_grants(np.array(best_vec[0], dtype=float) * grid, budget)


def balance(
    zone_rate: float,
    gate_queues,
    mechanism: str,
    bounds: tuple[float, float],
    queue_caps=None,
    gate_ids: Optional[Sequence[str]] = None,
) -> np.ndarray:
    """Redistribute one zone's budget across its gates.

    The budget is ``len(gate_queues) * zone_rate``. ``mechanism`` is
    ``"prop"`` or ``"maxmin"``; the latter needs ``queue_caps`` to turn queues
    into requests. Max-min budget left over once every request is met is
    handed out in equal increments (capped at ``r_max``), so both mechanisms
    command the same total green as plain gating.
    """
    q = np.asarray(gate_queues, dtype=float)
    lo, hi = bounds
    budget = compute_budget(zone_rate, q.size)
    if mechanism == "prop":
        return proportional_allocate(q, budget, bounds).grants
    if mechanism == "maxmin":
        if queue_caps is None:
            raise ValueError("max-min balancing needs queue capacities")
        demands = demands_from_queues(q, queue_caps, bounds)
        res = maxmin_allocate(demands, budget, bounds, gate_ids)
        spend = min(budget, q.size * hi)
        return _topup(res.grants, spend - res.total_granted, hi)
    raise ValueError(f"unknown balancing mechanism {mechanism!r}")
