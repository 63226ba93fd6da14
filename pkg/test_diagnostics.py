"""
Tests for trajectory diagnostics.
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.errors import CoverageError, DegeneratePitchError, UnsupportedModelError
from src.field_models import build_model, eval_field, sample_points
from src.guiding_center import gc_init, integrate_gc
from src.diagnostics import (
    gyration_rate_errors,
    gyration_windows,
    curvature_antiparallel_residual,
    guiding_center_of,
    guiding_center_series,
    gyromotion,
    gyromotion_series,
    gyrophase,
    gyroradius_rate_check,
    gyroradius_series,
    initial_frame_vector,
    instantaneous_moment,
    mean_drift_velocity,
    mean_phase_rate,
    moment_series,
    parallel_velocity_series,
    pressure_deviation,
    pressure_normal_rate,
    time_avg_gyromotion,
    trajectory_curvature,
)
from src.orbit import ParticleState, integrate_orbit

X0 = np.zeros(3)
V0 = np.array([1.0, 0.0, 1.0])


@pytest.fixture
def helix_orbit(uniform, period):
    """Four and a half gyroperiods of the uniform-field helix at omega = 100."""
    return integrate_orbit(uniform, X0, V0, 100.0, T=4.5 * period(100.0), steps_per_gyro=200, scheme="rk4")


def test_gyromotion_and_guiding_centre(uniform):
    state = ParticleState(0.0, X0, V0)
    assert_allclose(gyromotion(state, 100.0, uniform), [0.0, 0.01, 0.0], atol=1e-17)
    assert_allclose(guiding_center_of(state, 100.0, uniform), [0.0, -0.01, 0.0], atol=1e-17)


def test_gyromotion_outside_domain(toroidal):
    with pytest.raises(ValueError):
        gyromotion(ParticleState(0.0, np.array([0.1, 0.0, 0.0]), V0), 100.0, toroidal)


def test_instantaneous_moment(uniform, slab):
    assert instantaneous_moment(ParticleState(0.0, X0, V0), math.sqrt(2.0), uniform) == pytest.approx(0.5)
    state = ParticleState(0.0, np.array([1.0, 0.0, 0.0]), np.array([0.8, 0.0, 0.6]))
    assert instantaneous_moment(state, 1.0, slab) == pytest.approx(0.64 / 4.0)


def test_path_curvature_is_anti_parallel_to_gyromotion(solovev):
    rng = np.random.default_rng(4)
    for x in sample_points(solovev, 20, seed=4):
        v = rng.standard_normal(3)
        state = ParticleState(0.0, x, v)
        omega = 200.0
        B_mag = solovev.field_strength(x)
        expected = -(omega * B_mag / np.linalg.norm(v)) ** 2 * gyromotion(state, omega, solovev)
        assert_allclose(trajectory_curvature(state, omega, solovev), expected, rtol=1e-10)
        assert curvature_antiparallel_residual(state, omega, solovev) < 1e-12


def test_curvature_residual_on_every_model(any_model):
    rng = np.random.default_rng(11)
    for x in sample_points(any_model, 1000, seed=11):
        state = ParticleState(0.0, x, rng.standard_normal(3))
        assert curvature_antiparallel_residual(state, 1e3, any_model) < 1e-12


def test_curvature_degenerate_pitch(uniform):
    with pytest.raises(DegeneratePitchError):
        curvature_antiparallel_residual(ParticleState(0.0, X0, np.array([0.0, 0.0, 1.0])), 100.0, uniform)
    with pytest.raises(DegeneratePitchError):
        trajectory_curvature(ParticleState(0.0, X0, np.zeros(3)), 100.0, uniform)


def test_series_on_the_helix(uniform, helix_orbit):
    rho = gyromotion_series(helix_orbit, uniform)
    assert_allclose(np.linalg.norm(rho, axis=1), 0.01, rtol=1e-7)
    centres = guiding_center_series(helix_orbit, uniform)
    assert_allclose(centres[:, :2], np.tile([0.0, -0.01], (len(helix_orbit), 1)), atol=1e-9)
    assert_allclose(moment_series(helix_orbit, uniform), 0.5, rtol=1e-7)
    assert_allclose(parallel_velocity_series(helix_orbit, uniform), 1.0, rtol=1e-12)


def test_gyrophase_rate_is_the_gyrofrequency(uniform, helix_orbit):
    series = gyrophase(helix_orbit, uniform)
    assert_allclose(series.rate, 100.0, rtol=1e-6)
    assert series.phase[-1] - series.phase[0] == pytest.approx(9.0 * math.pi, rel=1e-6)


def test_gyration_windows_and_rate_errors(uniform, helix_orbit, period):
    series = gyrophase(helix_orbit, uniform)
    windows = gyration_windows(series.times, series.phase)
    assert len(windows) == 4
    assert windows[0][1] - windows[0][0] == pytest.approx(period(100.0), rel=1e-6)
    assert mean_phase_rate(series.times, series.phase, *windows[1]) == pytest.approx(100.0, rel=1e-6)
    assert np.all(gyration_rate_errors(helix_orbit, uniform) < 1e-6)


def test_gyration_rate_in_slowly_varying_field(slab):
    traj = integrate_orbit(slab, X0, [0.8, 0.0, 0.6], 300.0, T=0.2, steps_per_gyro=200, scheme="rk4")
    assert np.all(gyration_rate_errors(traj, slab) < 1e-2)


def test_gyration_rate_in_mirror(mirror):
    traj = integrate_orbit(mirror, X0, [0.8, 0.0, 0.6], 1e3, T=0.5, steps_per_gyro=200, scheme="rk4")
    errors = gyration_rate_errors(traj, mirror)
    assert len(errors) > 50
    assert np.all(errors < 1e-2)


def test_gyrophase_needs_perpendicular_velocity(uniform):
    traj = integrate_orbit(uniform, X0, [0.0, 0.0, 1.0], 100.0, T=0.1)
    with pytest.raises(DegeneratePitchError):
        gyrophase(traj, uniform)


def test_gyrophase_rejects_coarse_sampling(uniform, period):
    traj = integrate_orbit(uniform, X0, V0, 100.0, T=4 * period(100.0), dt_out=0.6 * period(100.0))
    with pytest.raises(ValueError, match="too coarse"):
        gyrophase(traj, uniform)


def test_mean_phase_rate_needs_a_window():
    with pytest.raises(ValueError):
        mean_phase_rate([0.0, 1.0], [0.0, 1.0], 0.5, 0.5)


def test_frame_vector_is_orthogonal():
    b = np.array([0.6, 0.0, 0.8])
    e2 = initial_frame_vector(b)
    assert abs(np.dot(e2, b)) < 1e-15
    assert np.linalg.norm(e2) == pytest.approx(1.0)


def test_gyromotion_averages_out_over_whole_gyrations(uniform, helix_orbit, period):
    avg = time_avg_gyromotion(helix_orbit, uniform, 0.0, 4 * period(100.0))
    assert np.linalg.norm(avg) < 1e-9
    single = time_avg_gyromotion(helix_orbit, uniform, 0.0, 0.0)
    assert_allclose(single, [0.0, 0.01, 0.0], atol=1e-12)


def test_time_average_window_checks(uniform, helix_orbit):
    with pytest.raises(ValueError):
        time_avg_gyromotion(helix_orbit, uniform, 0.1, 0.05)
    with pytest.raises(CoverageError):
        time_avg_gyromotion(helix_orbit, uniform, 0.0, 1.0)


def test_mean_drift_velocity_in_slab(slab):
    omega = 1e3
    traj = integrate_orbit(slab, X0, [0.8, 0.0, 0.6], omega, T=1.0, steps_per_gyro=200, scheme="rk4")
    drift = mean_drift_velocity(traj, slab)
    assert drift[1] == pytest.approx(0.32 / omega, rel=0.02)
    assert drift[2] == pytest.approx(0.6, rel=1e-6)
    assert abs(drift[0]) < 1e-4


def test_pressure_rate_vanishes_when_strength_is_a_pressure_function(screw_pinch):
    for x in sample_points(screw_pinch, 20, seed=8):
        assert abs(pressure_normal_rate(eval_field(screw_pinch, x), 1.0, 0.3)) < 1e-13


def test_pressure_rate_in_solovev_is_nonzero(solovev):
    rates = [pressure_normal_rate(eval_field(solovev, x), 1.0, 0.3) for x in sample_points(solovev, 20, seed=8)]
    assert max(abs(r) for r in rates) > 1e-6


def test_pressure_rate_needs_pressure(slab):
    with pytest.raises(UnsupportedModelError):
        pressure_normal_rate(eval_field(slab, X0), 1.0, 0.3)


def test_pressure_deviation_vanishes_for_constant_pressure():
    model = build_model("uniform", {"p0": 1.0})
    traj = integrate_orbit(model, X0, V0, 100.0, T=0.5)
    init, params = gc_init(model, X0, V0, 100.0, mode="naive", order=0)
    gc = integrate_gc(model, init, params, 0.5, dt_out=traj.metadata["dt_out"])
    deviation = pressure_deviation(traj, model, gc)
    assert_allclose(deviation.lhs, 0.0)
    assert_allclose(deviation.rhs, 0.0)
    assert_allclose(deviation.remainder, 0.0)


def test_pressure_deviation_in_screw_pinch_has_no_secular_part(screw_pinch):
    x0, v0, omega, T = np.array([0.5, 0.0, 0.0]), np.array([0.8, 0.0, 0.6]), 300.0, 0.5
    traj = integrate_orbit(screw_pinch, x0, v0, omega, T, steps_per_gyro=200, scheme="rk4", dt_out=T / 500)
    init, params = gc_init(screw_pinch, x0, v0, omega, mode="naive", order=0)
    gc = integrate_gc(screw_pinch, init, params, T, dt_out=T / 500)
    deviation = pressure_deviation(traj, screw_pinch, gc)
    assert len(deviation.times) == 501
    assert np.max(np.abs(deviation.secular)) < 1e-12
    assert deviation.lhs[0] == 0.0 and deviation.rhs[0] == pytest.approx(0.0, abs=1e-15)
    # p varies by O(1/omega) along the orbit
    assert np.max(np.abs(deviation.lhs)) < 10.0 / omega


def test_pressure_deviation_checks(slab, screw_pinch):
    traj = integrate_orbit(slab, X0, [0.8, 0.0, 0.6], 100.0, T=0.1)
    init, params = gc_init(slab, X0, [0.8, 0.0, 0.6], 100.0, mode="naive", order=0)
    gc = integrate_gc(slab, init, params, 0.1)
    with pytest.raises(UnsupportedModelError):
        pressure_deviation(traj, slab, gc)

    x0, v0 = np.array([0.5, 0.0, 0.0]), np.array([0.8, 0.0, 0.6])
    traj = integrate_orbit(screw_pinch, x0, v0, 100.0, T=0.2)
    init, params = gc_init(screw_pinch, x0, v0, 100.0, mode="naive", order=0)
    short = integrate_gc(screw_pinch, init, params, 0.1)
    with pytest.raises(CoverageError):
        pressure_deviation(traj, screw_pinch, short)


def test_gyroradius_rate_bound_in_mirror(mirror):
    init, params = gc_init(mirror, X0, [0.8, 0.0, 0.6], 1000.0, mode="naive")
    gc = integrate_gc(mirror, init, params, T=2.0 * math.pi / 0.8)
    series = gyroradius_series(gc, mirror)
    assert series.rho_star[0] == pytest.approx(math.sqrt(2.0 * 0.32) / 1000.0)
    assert gyroradius_rate_check(gc, mirror) <= 1.0 + 1e-12


def test_gyroradius_needs_perpendicular_motion(uniform):
    init, params = gc_init(uniform, X0, [0.0, 0.0, 1.0], 100.0)
    gc = integrate_gc(uniform, init, params, T=0.1)
    with pytest.raises(DegeneratePitchError):
        gyroradius_series(gc, uniform)


@pytest.mark.slow
def test_toroidal_vertical_drift(toroidal):
    omega, T = 1e3, 20.0
    traj = integrate_orbit(toroidal, [1.0, 0.0, 0.0], [0.8, 0.6, 0.0], omega, T)
    # (h^2 + mu0 |B|) / (omega |B| R) with h = 0.6, mu0 = 0.32, |B| = R = 1
    assert mean_drift_velocity(traj, toroidal)[2] == pytest.approx(0.68 / omega, rel=0.02)
