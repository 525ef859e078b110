import numpy as np
import pytest
from hypothesis import given, strategies as st

from fairgate.gating import (
    ControllerParams,
    ZoneControllerState,
    assign_rates,
    blend_shared,
    compute_budget,
    pi_raw,
    pi_update,
)
from fairgate.scenario import GateSpec

PARAMS = ControllerParams(K_P=0.007, K_I=0.001, n_target=240, r_min=0.2, r_max=0.5, t_c=90)


def test_pi_worked_example():
    state = ZoneControllerState("3", prev_rate=0.5, prev_n=280)
    assert pi_raw(state, 300, PARAMS) == pytest.approx(0.10, abs=1e-12)
    assert pi_update(state, 300, PARAMS) == 0.2
    assert state.prev_rate == 0.2 and state.prev_n == 300


def test_pi_zero_error_keeps_rate():
    state = ZoneControllerState("3", prev_rate=0.33, prev_n=240)
    assert pi_update(state, 240, PARAMS) == pytest.approx(0.33)


def test_pi_far_below_target_stays_at_ceiling():
    state = ZoneControllerState.initial("3", PARAMS)
    assert pi_update(state, 0, PARAMS) == 0.5
    assert pi_update(state, 10, PARAMS) == 0.5


def test_first_update_has_no_increment_kick():
    state = ZoneControllerState.initial("3", PARAMS)
    assert state.prev_rate == PARAMS.r_max and state.prev_n is None
    assert pi_raw(state, 250, PARAMS) == pytest.approx(0.5 + 0.007 * (240 - 250))


def test_pi_rejects_negative_accumulation():
    with pytest.raises(ValueError):
        pi_update(ZoneControllerState.initial("1", PARAMS), -1, PARAMS)


@given(st.floats(0.2, 0.5), st.floats(0, 2000), st.floats(0, 2000))
def test_pi_output_within_bounds(prev_rate, prev_n, n_k):
    state = ZoneControllerState("z", prev_rate=prev_rate, prev_n=prev_n)
    r = pi_update(state, n_k, PARAMS)
    assert PARAMS.r_min <= r <= PARAMS.r_max
    assert state.prev_rate == r


@given(st.floats(0.2, 0.5))
def test_pi_fixed_point_at_target(r0):
    state = ZoneControllerState("z", prev_rate=r0, prev_n=PARAMS.n_target)
    seq = [pi_update(state, PARAMS.n_target, PARAMS) for _ in range(5)]
    assert seq == pytest.approx([r0] * 5)


@given(st.floats(0.2, 0.5), st.floats(0, 1000), st.floats(0.01, 100))
def test_pi_raw_strictly_decreasing_in_accumulation(r0, n, dn):
    a = pi_raw(ZoneControllerState("z", r0, n), n, PARAMS)
    b = pi_raw(ZoneControllerState("z", r0, n + dn), n + dn, PARAMS)
    assert b < a


@pytest.mark.parametrize("rate,count,expected", [(0.35, 6, 2.1), (0.4, 1, 0.4), (0.0, 7, 0.0)])
def test_compute_budget(rate, count, expected):
    assert compute_budget(rate, count) == pytest.approx(expected)


def test_compute_budget_needs_a_gate():
    with pytest.raises(ValueError):
        compute_budget(0.3, 0)


@pytest.mark.parametrize("ra,rb,expected", [(0.3, 0.3, 0.5), (0.3, 0.2, 0.5), (0.2, 0.5, 0.2 / 0.7)])
def test_blend_shared(ra, rb, expected):
    assert blend_shared(ra, rb, (0.2, 0.5)) == pytest.approx(expected)


@given(st.floats(1e-6, 1.0))
def test_blend_of_equal_rates_is_half(r):
    assert blend_shared(r, r, (0.0, 1.0)) == pytest.approx(0.5)


def test_blend_rejects_zero_pair():
    with pytest.raises(ValueError):
        blend_shared(0.0, 0.0)


def _gate(gid, *zones):
    return GateSpec(id=gid, zones=zones, saturation_flow=500, queue_capacity=30)


def test_assign_rates_cases():
    gates = [_gate("a1", "a"), _gate("ab", "a", "b"), _gate("b1", "b")]
    out = assign_rates({"a": 0.4, "b": 0.3}, gates)
    assert out == pytest.approx([0.4, 0.5, 0.3])
    out = assign_rates({"a": 0.2, "b": 0.2}, gates)
    assert out == pytest.approx([0.2, 0.5, 0.2])


def test_assign_rates_missing_zone():
    with pytest.raises(KeyError, match="ab"):
        assign_rates({"a": 0.3}, [_gate("ab", "a", "b")])


@given(st.permutations(range(4)))
def test_assign_rates_permutation_equivariant(perm):
    gates = [_gate("a1", "a"), _gate("ab", "a", "b"), _gate("b1", "b"), _gate("ba", "b", "a")]
    rates = {"a": 0.25, "b": 0.45}
    base = assign_rates(rates, gates)
    permuted = assign_rates(rates, [gates[i] for i in perm])
    assert np.array_equal(permuted, base[list(perm)])


@pytest.mark.parametrize("kw", [dict(r_min=0.5, r_max=0.5), dict(r_max=1.2), dict(t_c=0), dict(K_P=float("nan"))])
def test_controller_params_invariants(kw):
    with pytest.raises(ValueError):
        ControllerParams(**kw)
