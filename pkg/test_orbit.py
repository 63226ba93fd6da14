"""
Tests for the full-orbit integrators.
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.convergence import default_initial_data
from src.errors import FieldDomainError, TruncatedTrajectoryError
from src.field_models import build_model
from src.orbit import (
    ParticleState,
    advance,
    boris_step,
    cross,
    gyroperiod,
    integrate_orbit,
    output_grid,
    rk4_step,
    speed_drift,
)

X0 = np.zeros(3)
V0 = np.array([1.0, 0.0, 1.0])


def test_cross_matches_numpy():
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((2, 3))
    assert_allclose(cross(a, b), np.cross(a, b), atol=1e-15)


def test_output_grid():
    assert_allclose(output_grid(1.0, 0.3), [0.0, 1 / 3, 2 / 3, 1.0])
    assert_allclose(output_grid(0.1, 1.0), [0.0, 0.1])
    with pytest.raises(ValueError):
        output_grid(1.0, 0.0)


def test_boris_helix_closes_every_gyroperiod(uniform):
    omega, steps = 100.0, 64
    traj = integrate_orbit(uniform, X0, V0, omega, T=10 * 2 * math.pi / omega, steps_per_gyro=steps)
    closed = traj.step_positions[::steps][:11]
    times = traj.step_times[::steps][:11]
    assert_allclose(closed[:, :2], 0.0, atol=1e-9)
    assert_allclose(closed[:, 2], times, atol=1e-9)


def test_boris_helix_error_between_gyroperiods_is_bounded(uniform, helix):
    omega, steps = 100.0, 64
    traj = integrate_orbit(uniform, X0, V0, omega, T=2 * 2 * math.pi / omega, steps_per_gyro=steps)
    rho = 1.0 / omega
    half = math.pi / steps
    bound = 2.0 * rho * (1.0 - half / math.tan(half))
    error = np.linalg.norm(traj.step_positions - helix(traj.step_times, omega), axis=1)
    assert error.max() <= bound + 1e-12


def test_rk4_matches_analytic_helix(uniform, helix):
    omega = 100.0
    traj = integrate_orbit(uniform, X0, V0, omega, T=2 * 2 * math.pi / omega, steps_per_gyro=200, scheme="rk4")
    assert_allclose(traj.positions, helix(traj.times, omega), atol=1e-8)


def test_boris_conserves_speed(slab):
    traj = integrate_orbit(slab, X0, [0.8, 0.0, 0.6], 100.0, T=5.0)
    assert speed_drift(traj) < 1e-12


def test_rk4_speed_drift_within_oracle_budget(uniform, period):
    omega = 100.0
    traj = integrate_orbit(uniform, X0, V0, omega, T=10 * period(omega), steps_per_gyro=200, scheme="rk4")
    assert speed_drift(traj) < 5e-8 * np.linalg.norm(V0)


def test_boris_is_time_reversible(slab):
    start = ParticleState(0.0, np.array([0.1, 0.0, 0.0]), np.array([0.8, 0.1, 0.6]))
    forward = advance(start, 1e-3, 500, 100.0, slab)
    back = advance(forward, -1e-3, 500, 100.0, slab)
    assert_allclose(back.x, start.x, atol=1e-12)
    assert_allclose(back.v, start.v, atol=1e-12)
    assert back.t == pytest.approx(0.0, abs=1e-12)


def test_boris_rotation_angle_is_exact(uniform):
    omega, dt = 100.0, 0.01
    state = boris_step(ParticleState(0.0, X0, V0), dt, omega, uniform)
    angle = omega * dt
    assert_allclose(state.v, [math.cos(angle), -math.sin(angle), 1.0], atol=1e-14)


def test_step_validation(uniform):
    state = ParticleState(0.0, X0, V0)
    with pytest.raises(ValueError):
        boris_step(state, 0.0, 100.0, uniform)
    with pytest.raises(ValueError):
        advance(state, 0.01, 1, 100.0, uniform, scheme="euler")


def test_rk4_step_accepts_precomputed_field(toroidal):
    state = ParticleState(0.0, np.array([1.0, 0.0, 0.0]), np.array([0.8, 0.6, 0.0]))
    a = rk4_step(state, 1e-3, 50.0, toroidal)
    b = rk4_step(state, 1e-3, 50.0, toroidal, B_start=toroidal.field(state.x))
    assert_allclose(a.x, b.x)
    assert_allclose(a.v, b.v)


@pytest.mark.parametrize("kwargs", [
    {"omega": 0.0},
    {"T": -1.0},
    {"steps_per_gyro": 8},
    {"scheme": "leapfrog"},
])
def test_integrate_orbit_rejects_bad_arguments(uniform, kwargs):
    args = {"omega": 100.0, "T": 1.0, "steps_per_gyro": 64, "scheme": "boris", **kwargs}
    with pytest.raises(ValueError):
        integrate_orbit(uniform, X0, V0, **args)


def test_initial_position_outside_domain(toroidal):
    with pytest.raises(FieldDomainError):
        integrate_orbit(toroidal, [0.1, 0.0, 0.0], V0, 100.0, 1.0)


def test_domain_exit_truncates():
    model = build_model("uniform", {"half_width": 1.0})
    with pytest.raises(TruncatedTrajectoryError) as info:
        integrate_orbit(model, X0, [0.0, 0.0, 1.0], 100.0, T=5.0)
    assert 0.9 < info.value.exit_time <= 1.0
    assert info.value.last_position[2] <= 1.0


def test_output_grid_and_endpoints(slab):
    traj = integrate_orbit(slab, X0, [0.8, 0.0, 0.6], 100.0, T=0.5, dt_out=0.01)
    assert len(traj) == 51
    assert traj.times[0] == 0.0 and traj.times[-1] == 0.5
    assert traj.step_times[-1] == 0.5
    assert_allclose(traj.positions[0], X0, atol=1e-15)
    assert_allclose(traj.velocities[0], [0.8, 0.0, 0.6], atol=1e-15)
    assert traj.covers(traj.times)
    assert not traj.covers([0.0, 0.6])
    assert traj.metadata["dt_out"] == 0.01


def test_default_output_spacing_is_an_eighth_gyroperiod(uniform, period):
    omega = 100.0
    traj = integrate_orbit(uniform, X0, V0, omega, T=period(omega))
    assert len(traj) == 9
    assert traj.metadata["dt_out"] == pytest.approx(period(omega) / 8.0)


def test_step_size_follows_local_field(slab):
    omega = 100.0
    x0 = np.array([1.0, 0.0, 0.0])
    traj = integrate_orbit(slab, x0, [0.0, 0.0, 0.5], omega, T=0.1)
    assert np.diff(traj.step_times)[0] == pytest.approx(gyroperiod(slab, x0, omega) / 64)


def test_short_window_is_degenerate(uniform):
    traj = integrate_orbit(uniform, X0, V0, 100.0, T=1e-5)
    assert traj.degenerate
    assert len(traj) == 1 and traj.n_steps == 0
    assert speed_drift(traj) == 0.0
    assert_allclose(traj.position_at(0.0), X0, atol=1e-15)


def test_state_access(uniform):
    traj = integrate_orbit(uniform, X0, V0, 100.0, T=0.1)
    states = list(traj)
    assert len(states) == len(traj) == len(traj.samples)
    assert states[3].t == traj.times[3]
    assert_allclose(states[3].x, traj.positions[3])
    assert traj.state(0).speed == pytest.approx(math.sqrt(2.0))


def test_interpolation_reproduces_raw_steps(toroidal):
    traj = integrate_orbit(toroidal, [1.0, 0.0, 0.0], [0.8, 0.6, 0.0], 100.0, T=0.2, scheme="rk4", steps_per_gyro=200)
    assert_allclose(traj.position_at(traj.step_times[5]), traj.step_positions[5], atol=1e-14)
    assert_allclose(traj.velocity_at(traj.step_times[7]), traj.step_velocities[7], atol=1e-14)


def test_boris_agrees_with_fine_rk4_on_every_model(any_model):
    omega = 1e3
    x0, v0, _ = default_initial_data(any_model)
    T = 10 * gyroperiod(any_model, x0, omega)
    boris = integrate_orbit(any_model, x0, v0, omega, T, steps_per_gyro=64, dt_out=T / 400)
    rk4 = integrate_orbit(any_model, x0, v0, omega, T, steps_per_gyro=400, scheme="rk4", dt_out=T / 400)
    assert_allclose(boris.times, rk4.times)
    assert np.max(np.linalg.norm(boris.positions - rk4.positions, axis=1)) < 1e-4
