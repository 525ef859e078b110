import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from fairgate.balancing import (
    InfeasibleBudgetError,
    balance,
    demands_from_queues,
    maxmin_allocate,
    maxmin_oracle,
    proportional_allocate,
)

B = (0.2, 0.5)


def bisect_scale(queues, budget, lo, hi):
    """Reference: bisect lam in sum(clip(lam * q / sum(q), lo, hi)) = budget."""
    s = np.asarray(queues, float) / np.sum(queues)
    a, b = 0.0, 1e6
    for _ in range(200):
        m = 0.5 * (a + b)
        if np.clip(m * s, lo, hi).sum() < budget:
            a = m
        else:
            b = m
    return np.clip(b * s, lo, hi)


# -- demands -----------------------------------------------------------------

def test_demands_from_queues():
    d = demands_from_queues([0, 15, 30, 90], [30, 30, 30, 30], B)
    assert d == pytest.approx([0.2, 0.35, 0.5, 0.5])


@given(st.floats(0, 100), st.floats(0, 100))
def test_demands_monotone(q1, q2):
    d = demands_from_queues([min(q1, q2), max(q1, q2)], [40, 40], B)
    assert d[0] <= d[1]


# -- proportional ------------------------------------------------------------

def test_proportional_worked_example():
    res = proportional_allocate([10, 30], 0.8, B)
    assert res.grants == pytest.approx([0.3, 0.5])
    assert res.total_granted == pytest.approx(0.8)


def test_proportional_symmetric():
    assert proportional_allocate([5, 5, 5], 0.9, B).grants == pytest.approx([0.3] * 3)


def test_proportional_all_queues_empty():
    assert proportional_allocate([0, 0, 0], 1.2, B).grants == pytest.approx([0.4] * 3)


def test_proportional_empty_gates_absorb_leftover():
    assert proportional_allocate([0, 10], 0.9, B).grants == pytest.approx([0.4, 0.5])


def test_proportional_budget_above_ceiling():
    res = proportional_allocate([1, 2, 3], 2.0, B)
    assert res.grants == pytest.approx([0.5] * 3)


def test_proportional_infeasible_budget():
    with pytest.raises(InfeasibleBudgetError):
        proportional_allocate([1, 2, 3], 0.5, B)


@given(st.lists(st.floats(0.1, 100), min_size=1, max_size=8), st.floats(0, 1))
def test_proportional_matches_bisection(queues, frac):
    n = len(queues)
    budget = n * B[0] + frac * n * (B[1] - B[0])
    got = proportional_allocate(queues, budget, B).grants
    assert got == pytest.approx(bisect_scale(queues, budget, *B), abs=1e-9)


@given(st.lists(st.floats(0.1, 100), min_size=2, max_size=8), st.floats(0, 1))
def test_proportional_interior_grants_proportional_to_queue(queues, frac):
    n = len(queues)
    budget = n * B[0] + frac * n * (B[1] - B[0])
    g = proportional_allocate(queues, budget, B).grants
    inside = (g > B[0] + 1e-9) & (g < B[1] - 1e-9)
    q = np.asarray(queues)[inside]
    if inside.sum() >= 2:
        ratio = g[inside] / q
        assert ratio == pytest.approx(np.full(ratio.shape, ratio[0]), rel=1e-9)


@given(st.lists(st.floats(5, 10), min_size=3, max_size=6), st.integers(0, 5), st.floats(0.1, 3))
def test_proportional_monotone_in_own_queue(queues, which, bump):
    which %= len(queues)
    n = len(queues)
    budget = 0.3 * n
    before = proportional_allocate(queues, budget, B).grants
    bumped = list(queues)
    bumped[which] += bump
    after = proportional_allocate(bumped, budget, B).grants
    # Unclamped regime: every gate strictly inside the bounds, before and after.
    assume(np.all((before > B[0] + 1e-6) & (before < B[1] - 1e-6)))
    assume(np.all((after > B[0] + 1e-6) & (after < B[1] - 1e-6)))
    assert after[which] > before[which]
    others = [i for i in range(n) if i != which]
    assert np.all(after[others] <= before[others] + 1e-12)


# -- max-min -----------------------------------------------------------------

def test_maxmin_worked_example():
    res = maxmin_allocate([0.25, 0.45, 0.5], 1.05, B)
    assert res.grants == pytest.approx([0.25, 0.4, 0.4])


def test_maxmin_nonbinding_budget_serves_every_request():
    d = [0.21, 0.3, 0.44]
    assert maxmin_allocate(d, 1.2, B).grants == pytest.approx(d)


def test_maxmin_identical_demands_split_equally():
    assert maxmin_allocate([0.5] * 4, 1.2, B).grants == pytest.approx([0.3] * 4)


def test_maxmin_rejects_out_of_bounds_request():
    with pytest.raises(ValueError):
        maxmin_allocate([0.1, 0.3], 0.6, B)


def test_maxmin_infeasible_budget():
    with pytest.raises(InfeasibleBudgetError):
        maxmin_allocate([0.3, 0.3], 0.3, B)


def test_maxmin_tie_break_is_order_free():
    a = maxmin_allocate([0.4, 0.4, 0.3], 1.0, B, gate_ids=["c", "b", "a"]).grants
    b = maxmin_allocate([0.4, 0.4, 0.3], 1.0, B, gate_ids=["a", "b", "c"]).grants
    assert np.array_equal(a, b)


def test_oracle_worked_example():
    res = maxmin_oracle([0.25, 0.45, 0.5], 1.05, B, grid=0.01)
    assert res.grants == pytest.approx([0.25, 0.4, 0.4])


def test_oracle_floors_only():
    assert maxmin_oracle([0.2, 0.2, 0.2], 0.9, B).grants == pytest.approx([0.2] * 3)


def test_oracle_limits():
    with pytest.raises(ValueError, match="too large"):
        maxmin_oracle([0.3] * 6, 2.0, B)
    with pytest.raises(ValueError):
        maxmin_oracle([0.3] * 2, 0.6, B, grid=0.02)


@settings(max_examples=200)
@given(st.lists(st.integers(20, 50), min_size=2, max_size=2), st.integers(40, 110))
def test_two_gate_oracle_agrees(d_units, b_units):
    d = [u / 100 for u in d_units]
    got = np.sort(maxmin_allocate(d, b_units / 100, B).grants)
    ref = np.sort(maxmin_oracle(d, b_units / 100, B, grid=0.01).grants)
    assert np.abs(got - ref).max() <= 0.01 + 1e-9


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(40, 100), min_size=1, max_size=4), st.integers(0, 200))
def test_half_grid_oracle_agrees(d_units, extra):
    d = [u / 200 for u in d_units]
    budget = (len(d) * 40 + extra) / 200
    got = np.sort(maxmin_allocate(d, budget, B).grants)
    ref = np.sort(maxmin_oracle(d, budget, B, grid=0.005).grants)
    assert np.abs(got - ref).max() <= 0.005 + 1e-9


@given(st.lists(st.floats(0.2, 0.5), min_size=2, max_size=6), st.floats(0, 1))
def test_maxmin_no_gate_can_gain_from_a_richer_one(demands, frac):
    n = len(demands)
    budget = n * 0.2 + frac * n * 0.3
    g = maxmin_allocate(demands, budget, B).grants
    d = np.clip(demands, *B)
    # Every unsatisfied gate sits at the common top level.
    short = g < d - 1e-9
    if short.any():
        assert np.all(g[short] >= g.max() - 1e-9)


# -- shared invariants -------------------------------------------------------

@st.composite
def instances(draw):
    n = draw(st.integers(1, 8))
    lo = draw(st.floats(0.0, 0.4))
    hi = draw(st.floats(lo + 0.01, 1.0))
    queues = draw(st.lists(st.floats(0, 200), min_size=n, max_size=n))
    budget = draw(st.floats(n * lo, n * 1.2))
    return np.array(queues), budget, (lo, hi)


@given(instances())
def test_feasibility_and_bounds(inst):
    queues, budget, (lo, hi) = inst
    for g in (proportional_allocate(queues, budget, (lo, hi)).grants,
              maxmin_allocate(demands_from_queues(queues, np.full(queues.size, 50.0), (lo, hi)), budget, (lo, hi)).grants):
        assert g.sum() <= budget + 1e-9
        assert np.all(g >= lo - 1e-12) and np.all(g <= hi + 1e-12)


@given(instances(), st.randoms())
def test_permutation_equivariance(inst, rnd):
    queues, budget, bounds = inst
    perm = list(range(queues.size))
    rnd.shuffle(perm)
    caps = np.full(queues.size, 50.0)
    for mech in ("prop", "maxmin"):
        base = balance(budget / queues.size, queues, mech, bounds, caps) if budget / queues.size <= bounds[1] else None
        if base is None:
            continue
        permuted = balance(budget / queues.size, queues[perm], mech, bounds, caps)
        assert permuted == pytest.approx(base[perm], abs=1e-12)


@given(instances())
def test_balance_preserves_aggregate(inst):
    queues, _, (lo, hi) = inst
    rate = 0.5 * (lo + hi)
    caps = np.full(queues.size, 40.0)
    for mech in ("prop", "maxmin"):
        g = balance(rate, queues, mech, (lo, hi), caps)
        assert g.sum() == pytest.approx(queues.size * rate, abs=1e-9)


@pytest.mark.parametrize("mech", ["prop", "maxmin"])
def test_balance_floor_rate(mech):
    g = balance(0.2, [3, 50, 0, 9], mech, B, [30] * 4)
    assert g == pytest.approx([0.2] * 4)


@pytest.mark.parametrize("mech", ["prop", "maxmin"])
def test_balance_single_gate(mech):
    assert balance(0.37, [12], mech, B, [30]) == pytest.approx([0.37])


def test_balance_heterogeneous_keeps_total():
    q = [2, 40, 5, 18, 0, 60]
    for mech in ("prop", "maxmin"):
        assert balance(0.35, q, mech, B, [30] * 6).sum() == pytest.approx(6 * 0.35)


def test_balance_unknown_mechanism():
    with pytest.raises(ValueError):
        balance(0.3, [1, 2], "alpha", B, [30, 30])
