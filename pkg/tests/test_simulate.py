import math

import numpy as np
import pytest
from scipy import integrate

from powersched.network import ModeSet
from powersched.schedule import Schedule
from powersched.simulate import (
    CostConfig,
    Trajectory,
    _field,
    _rk4,
    cost,
    feasibility_residual,
    integration_error,
    phase_spread,
    running_cost,
    running_cost_grad,
    simulate,
)


def test_equilibrium_stays_put(modes118):
    traj = simulate(modes118, Schedule.constant(1, 5.0), np.zeros(106))
    assert np.max(np.abs(traj.x)) <= 1e-10
    assert cost(traj) <= 1e-10


def test_grid_hits_switching_times(toy_modes, toy_x0):
    s = Schedule((1, 2, 1), (0.1234567, 0.35), 1.0)
    traj = simulate(toy_modes, s, toy_x0, step=0.01)
    for T in s.tau:
        assert T in traj.t
    assert traj.t[0] == 0.0 and traj.t[-1] == 1.0
    assert np.all(np.diff(traj.t) > 0)
    i = int(np.searchsorted(traj.t, 0.1234567))
    assert traj.point_modes[i] == 2 and traj.step_modes[i - 1] == 1


def test_glue_property(toy_modes, toy_x0):
    t1 = 0.43
    whole = simulate(toy_modes, Schedule((1, 2), (t1,), 1.0), toy_x0, 0.01)
    first = simulate(toy_modes, Schedule.constant(1, t1), toy_x0, 0.01)
    second = simulate(toy_modes, Schedule.constant(2, 1.0 - t1), first.x[-1], 0.01)
    np.testing.assert_allclose(whole.x[-1], second.x[-1], rtol=1e-12, atol=1e-12)


def test_one_switch_against_finer_step(toy_modes, toy_x0):
    s = Schedule((1, 2), (0.6,), 2.0)
    coarse = simulate(toy_modes, s, toy_x0, 1e-3)
    fine = simulate(toy_modes, s, toy_x0, 1e-4)
    np.testing.assert_allclose(coarse.x[-1], fine.x[-1], atol=1e-7)


def test_compiled_step_matches_reference(modes118, x0_118):
    s = Schedule((1, 2), (0.0505,), 0.1)
    traj = simulate(modes118, s, x0_118)
    for i, sigma in enumerate(traj.step_modes):
        f = _field(modes118, int(sigma), 53)
        ref = _rk4(f, traj.x[i], traj.t[i + 1] - traj.t[i])
        np.testing.assert_allclose(traj.x[i + 1], ref, rtol=0, atol=1e-13)


def test_running_cost_examples():
    assert running_cost(np.zeros(4)) == 0.0
    assert running_cost(np.array([0.1, -0.1, 0.0, 0.0])) == pytest.approx(0.01, abs=1e-15)
    assert running_cost(np.array([0.0, 0.0, 2.0, 0.0])) == pytest.approx(4.0 / 40.0, abs=1e-15)


def test_phase_spread_shift_invariant():
    rng = np.random.default_rng(0)
    phases = rng.normal(size=9)
    assert phase_spread(phases + 1.3) == pytest.approx(phase_spread(phases), abs=1e-12)


def test_running_cost_gradient():
    rng = np.random.default_rng(1)
    x = rng.normal(size=8)
    g = running_cost_grad(x)
    h = 1e-6
    fd = [(running_cost(x + h * e) - running_cost(x - h * e)) / (2 * h) for e in np.eye(8)]
    np.testing.assert_allclose(g, fd, atol=1e-8)


def test_cost_weights_validated():
    with pytest.raises(ValueError):
        CostConfig(phase_weight=-1.0)


def test_cost_constant_integrand():
    t = np.linspace(0.0, 5.0, 37)
    x = np.tile([0.1, -0.1, 0.0, 0.0], (len(t), 1))
    traj = Trajectory(t, x, Schedule.constant(1, 5.0), np.ones(len(t) - 1, dtype=int))
    assert cost(traj) == pytest.approx(5 * 0.01, abs=1e-12)


def test_cost_against_simpson(toy_modes, toy_x0):
    s = Schedule((1, 2, 1), (0.5, 0.9), 2.0)
    J = cost(simulate(toy_modes, s, toy_x0, 1e-3))
    fine = simulate(toy_modes, s, toy_x0, 1e-4)
    pieces = []
    for a, b in zip(s.edges, s.edges[1:]):
        m = (fine.t >= a) & (fine.t <= b)
        pieces.append(integrate.simpson(running_cost(fine.x[m]), x=fine.t[m]))
    assert J == pytest.approx(sum(pieces), rel=1e-6)


def test_cost_rejects_empty():
    traj = Trajectory(np.zeros(0), np.zeros((0, 2)), Schedule.constant(1, 1.0), np.zeros(0, dtype=int))
    with pytest.raises(ValueError):
        cost(traj)


def test_step_halving_order(toy_modes, toy_x0):
    s = Schedule.constant(1, 2.0)
    J = [cost(simulate(toy_modes, s, toy_x0, h)) for h in (0.04, 0.02, 0.01, 0.005)]
    d = np.abs(np.diff(J))
    assert np.all(d[1:] * 8 <= d[:-1])
    x = [simulate(toy_modes, s, toy_x0, h).x[-1] for h in (0.04, 0.02, 0.01)]
    assert np.linalg.norm(x[1] - x[2]) * 8 <= np.linalg.norm(x[0] - x[1])


def test_feasibility_residual_within_integration_tolerance(toy_modes, toy_x0, modes118, x0_118):
    s = Schedule((1, 2, 1), (0.31, 0.77), 1.5)
    res = feasibility_residual(simulate(toy_modes, s, toy_x0), toy_modes)
    assert res <= 10 * integration_error(toy_modes, s, toy_x0)
    s = Schedule((1, 2), (0.2,), 0.5)
    res = feasibility_residual(simulate(modes118, s, x0_118), modes118)
    assert res <= 10 * integration_error(modes118, s, x0_118)


def test_feasibility_residual_detects_wrong_mode(toy_modes, toy_x0):
    s = Schedule((1, 2), (0.5,), 1.0)
    traj = simulate(toy_modes, s, toy_x0)
    forged = Trajectory(traj.t, traj.x, s, np.ones_like(traj.step_modes))
    assert feasibility_residual(forged, toy_modes) > 1e3 * feasibility_residual(traj, toy_modes)


def test_tiny_gap_is_simulated(toy_modes, toy_x0):
    s = Schedule((1, 2, 1), (0.5, 0.5 + 1e-8), 1.0)
    traj = simulate(toy_modes, s, toy_x0)
    i = int(np.searchsorted(traj.t, 0.5))
    assert traj.t[i] == 0.5 and traj.t[i + 1] == 0.5 + 1e-8
    assert traj.step_modes[i] == 2


def test_divergence_reported():
    Y = np.array([[1 - 5j, 5j], [5j, 1 - 5j]])
    modes = ModeSet((Y, Y), np.ones(2), np.array([1.0, 0.05]), np.array([0.0, 1e4]), 2 * math.pi * 60, 0, (1, 2))
    traj = simulate(modes, Schedule.constant(1, 5.0), np.zeros(2))
    assert traj.diverged
    assert 0 < traj.diverged_at < 5.0
    assert np.all(np.linalg.norm(traj.x, axis=1) <= 1e6)
    assert cost(traj) == math.inf


def test_simulate_input_checks(toy_modes):
    with pytest.raises(ValueError):
        simulate(toy_modes, Schedule.constant(1, 1.0), np.zeros(3))
    with pytest.raises(ValueError):
        simulate(toy_modes, Schedule.constant(3, 1.0), np.zeros(2))
    with pytest.raises(ValueError):
        simulate(toy_modes, Schedule.constant(1, 1.0), np.zeros(2), step=0.0)


def test_trajectory_csv(tmp_path, toy_modes, toy_x0):
    traj = simulate(toy_modes, Schedule((1, 2), (0.005,), 0.01), toy_x0)
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,delta_1,omega_1,mode"
    assert len(lines) == len(traj.t) + 1
    assert lines[-1].endswith(",2")
