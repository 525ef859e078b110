import textwrap

import pytest

from fairgate.scenario import scenario_from_dict

_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance verdict line; printed in the terminal summary."""

    def record(tag: str, passed: bool, detail: str) -> bool:
        _ACCEPTANCE.append(f"{'PASS' if passed else 'FAIL'}  {tag}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.line(line)


def small_scenario(horizon=900, demand=400.0, n_gates=2, noise_std=0.0, **zone):
    """One-zone scenario dict with ``n_gates`` identical gates."""
    gates = [dict(id=f"g{i}", zones=["1"], saturation_flow=500, queue_capacity=30) for i in range(n_gates)]
    z = dict(id="1", n_jam=120, n_target=45, free_flow_speed=30, avg_trip_length=1.0,
             gate_ids=[g["id"] for g in gates])
    z.update(zone)
    return dict(
        horizon=horizon,
        plant_dt=1.0,
        controller=dict(K_P=0.007, K_I=0.001, r_min=0.2, r_max=0.5, t_c=90),
        zones=[z],
        gates=gates,
        demand=[dict(gate_id=g["id"], segments=[[0, horizon, demand]], noise_std=noise_std, seed=i)
                for i, g in enumerate(gates)],
    )


@pytest.fixture
def small_spec():
    return scenario_from_dict(small_scenario())


@pytest.fixture
def write_yaml(tmp_path):
    def write(text: str, name="scenario.yaml"):
        path = tmp_path / name
        path.write_text(textwrap.dedent(text))
        return path

    return write
