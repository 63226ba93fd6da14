"""
Trajectory Diagnostics for GyroLab

Quantities extracted from full orbits and guiding-centre paths: gyromotion,
guiding centre, instantaneous magnetic moment, gyrophase, path curvature,
averaged gyromotion, drift velocity, pressure deviation and the gyroradius
rate bound.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from .errors import CoverageError, DegeneratePitchError, UnsupportedModelError
from .field_models import FieldModel, FieldSample, Vec3, eval_field
from .guiding_center import GCTrajectory
from .orbit import ParticleState, Trajectory

logger = logging.getLogger("gyrolab.diagnostics")

DEGENERATE_PITCH_TOL = 1e-10


def _fields(model: FieldModel, positions: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """B and |B| at each row of positions."""
    B = np.array([model.field(x) for x in positions]).reshape(-1, 3)
    return B, np.linalg.norm(B, axis=1)


# --- Single-state quantities ---------------------------------------------------

def gyromotion(state: ParticleState, omega: float, model: FieldModel) -> Vec3:
    """rho = b(x) x v / (omega |B(x)|)."""
    model.require_inside(state.x)
    B = model.field(state.x)
    B_mag = float(np.linalg.norm(B))
    return np.cross(B / B_mag, state.v) / (omega * B_mag)


def guiding_center_of(state: ParticleState, omega: float, model: FieldModel) -> Vec3:
    """R = x - rho."""
    return np.asarray(state.x, dtype=float) - gyromotion(state, omega, model)


def instantaneous_moment(state: ParticleState, v0_mag: float, model: FieldModel) -> float:
    """(|v0|^2 - (b.v)^2) / (2 |B(x)|)."""
    B = model.field(state.x)
    B_mag = float(np.linalg.norm(B))
    h = float(np.dot(B, state.v)) / B_mag
    return (v0_mag * v0_mag - h * h) / (2.0 * B_mag)


def trajectory_curvature(state: ParticleState, omega: float, model: FieldModel) -> Vec3:
    """Curvature vector k N = omega v x B / |v|^2 of the particle path."""
    v = np.asarray(state.v, dtype=float)
    speed_sq = float(np.dot(v, v))
    if speed_sq == 0.0:
        raise DegeneratePitchError("a particle at rest has no path curvature")
    return omega * np.cross(v, model.field(state.x)) / speed_sq


def curvature_antiparallel_residual(state: ParticleState, omega: float, model: FieldModel) -> float:
    """| unit(v x B) + unit(rho) |; zero when the gyromotion opposes the path curvature."""
    v = np.asarray(state.v, dtype=float)
    B = model.field(state.x)
    b = B / float(np.linalg.norm(B))
    v_cross_b = np.cross(v, b)
    norm = float(np.linalg.norm(v_cross_b))
    if not norm > 1e-12 * float(np.linalg.norm(v)):
        raise DegeneratePitchError(f"velocity is parallel to b at x={np.asarray(state.x).tolist()}")
    curvature = np.cross(v, B)
    rho = gyromotion(state, omega, model)
    return float(np.linalg.norm(curvature / np.linalg.norm(curvature) + rho / np.linalg.norm(rho)))


# --- Trajectory series -------------------------------------------------------------

def gyromotion_series(traj: Trajectory, model: FieldModel) -> np.ndarray:
    B, B_mag = _fields(model, traj.positions)
    b = B / B_mag[:, None]
    return np.cross(b, traj.velocities) / (traj.omega * B_mag[:, None])


def guiding_center_series(traj: Trajectory, model: FieldModel) -> np.ndarray:
    return traj.positions - gyromotion_series(traj, model)


def moment_series(traj: Trajectory, model: FieldModel, v0_mag: Optional[float] = None) -> np.ndarray:
    """Instantaneous moment along the output samples; v0_mag defaults to |v(0)|."""
    if v0_mag is None:
        v0_mag = float(np.linalg.norm(traj.velocities[0]))
    B, B_mag = _fields(model, traj.positions)
    h = np.einsum("ij,ij->i", B, traj.velocities) / B_mag
    return (v0_mag * v0_mag - h * h) / (2.0 * B_mag)


def parallel_velocity_series(traj: Trajectory, model: FieldModel) -> np.ndarray:
    """b(x) . v along the output samples."""
    B, B_mag = _fields(model, traj.positions)
    return np.einsum("ij,ij->i", B, traj.velocities) / B_mag


class GyrophaseSeries(NamedTuple):
    times: np.ndarray
    phase: np.ndarray
    rate: np.ndarray


def initial_frame_vector(b: Vec3) -> Vec3:
    """Unit vector orthogonal to b built from the coordinate axis least aligned with b."""
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(b)))] = 1.0
    e2 = axis - np.dot(axis, b) * b
    return e2 / np.linalg.norm(e2)


def gyrophase(traj: Trajectory, model: FieldModel) -> GyrophaseSeries:
    """Unwrapped gyrophase of u = b x v / |b x v| in a minimally rotating frame.

    The frame vector e2 is carried along the samples by projecting it onto the
    plane orthogonal to the new b. The phase is the angle of u in (e2, e2 x b),
    which advances at +omega |B|.
    """
    B, B_mag = _fields(model, traj.positions)
    b = B / B_mag[:, None]
    bxv = np.cross(b, traj.velocities)
    bxv_norm = np.linalg.norm(bxv, axis=1)
    if np.any(bxv_norm < DEGENERATE_PITCH_TOL):
        i = int(np.argmin(bxv_norm))
        raise DegeneratePitchError(f"|b x v| = {bxv_norm[i]:.3g} at t={traj.times[i]:.6g}; gyrophase undefined")
    if len(traj) > 1:
        advance = traj.omega * B_mag[:-1] * np.diff(traj.times)
        if np.any(advance >= math.pi):
            raise ValueError("output spacing is too coarse to resolve the gyrophase (more than half a gyration per sample)")
    u = bxv / bxv_norm[:, None]

    raw = np.empty(len(traj))
    e2 = initial_frame_vector(b[0])
    for i in range(len(traj)):
        e2 = e2 - np.dot(e2, b[i]) * b[i]
        e2 /= np.linalg.norm(e2)
        e3 = np.cross(e2, b[i])
        raw[i] = math.atan2(float(np.dot(u[i], e3)), float(np.dot(u[i], e2)))
    phase = np.unwrap(raw)
    rate = np.gradient(phase, traj.times) if len(traj) > 1 else np.zeros(1)
    return GyrophaseSeries(traj.times.copy(), phase, rate)


def mean_phase_rate(times, phase, t_start: float, t_end: float) -> float:
    """Average gyrophase rate over [t_start, t_end]."""
    if not t_end > t_start:
        raise ValueError(f"empty window [{t_start}, {t_end}]")
    p0, p1 = np.interp([t_start, t_end], times, phase)
    return float(p1 - p0) / (t_end - t_start)


def gyration_windows(times, phase) -> List[Tuple[float, float]]:
    """Consecutive windows over which the gyrophase advances by exactly 2 pi."""
    times = np.asarray(times, dtype=float)
    phase = np.asarray(phase, dtype=float)
    turns = int(math.floor((phase[-1] - phase[0]) / (2.0 * math.pi)))
    if turns < 1:
        return []
    targets = phase[0] + 2.0 * math.pi * np.arange(turns + 1)
    edges = np.interp(targets, phase, times)
    return [(float(a), float(b)) for a, b in zip(edges[:-1], edges[1:])]


def gyration_rate_errors(traj: Trajectory, model: FieldModel) -> np.ndarray:
    """Relative error of the mean gyrophase rate against omega * mean|B| per gyration window."""
    series = gyrophase(traj, model)
    windows = gyration_windows(series.times, series.phase)
    if not windows:
        raise ValueError("trajectory does not complete a single gyration")
    errors = []
    for t0, t1 in windows:
        t = np.concatenate(([t0], traj.times[(traj.times > t0) & (traj.times < t1)], [t1]))
        _, B_mag = _fields(model, traj.position_at(t))
        expected = traj.omega * trapezoid(B_mag, t) / (t1 - t0)
        measured = mean_phase_rate(series.times, series.phase, t0, t1)
        errors.append(abs(measured - expected) / expected)
    return np.asarray(errors)


def time_avg_gyromotion(traj: Trajectory, model: FieldModel, t_start: float, t_end: float) -> Vec3:
    """Trapezoid average of rho over [t_start, t_end] (output samples plus interpolated ends)."""
    if t_end < t_start:
        raise ValueError(f"empty window [{t_start}, {t_end}]")
    if not traj.covers([t_start, t_end]):
        raise CoverageError((t_start, t_end), f"trajectory spans {traj.span}")
    if t_end == t_start:
        state = ParticleState(t_start, traj.position_at(t_start), traj.velocity_at(t_start))
        return gyromotion(state, traj.omega, model)
    inner = traj.times[(traj.times > t_start) & (traj.times < t_end)]
    t = np.concatenate(([t_start], inner, [t_end]))
    positions, velocities = traj.position_at(t), traj.velocity_at(t)
    B, B_mag = _fields(model, positions)
    rho = np.cross(B / B_mag[:, None], velocities) / (traj.omega * B_mag[:, None])
    return trapezoid(rho, t, axis=0) / (t_end - t_start)


def mean_drift_velocity(traj: Trajectory, model: FieldModel) -> Vec3:
    """Guiding-centre displacement over the trajectory divided by its duration."""
    if len(traj) < 2:
        raise ValueError("drift velocity needs at least two samples")
    first, last = traj.state(0), traj.state(len(traj) - 1)
    displacement = guiding_center_of(last, traj.omega, model) - guiding_center_of(first, traj.omega, model)
    return displacement / (last.t - first.t)


# --- Pressure surfaces ---------------------------------------------------------------

def pressure_normal_rate(sample: FieldSample, v0_mag: float, mu0: float) -> float:
    """(|v0|^2/|B| - mu0) ((B x grad p) . grad(1/|B|)), the rate of change of p along the drift."""
    if not sample.has_pressure:
        raise UnsupportedModelError("pressure rate needs a sample carrying pressure data")
    grad_inv_B = -sample.grad_B_mag / (sample.B_mag * sample.B_mag)
    prefactor = v0_mag * v0_mag / sample.B_mag - mu0
    return prefactor * float(np.dot(np.cross(sample.B, sample.grad_pressure), grad_inv_B))


@dataclass(frozen=True)
class PressureDeviation:
    """p(x_omega(t)) - p(x0) against its boundary-plus-secular expansion."""

    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    boundary: np.ndarray
    secular: np.ndarray

    @property
    def remainder(self) -> np.ndarray:
        return self.lhs - self.rhs


def pressure_deviation(traj: Trajectory, model: FieldModel, gc_zero_order: GCTrajectory) -> PressureDeviation:
    """Pressure change along a full orbit and its first-order expansion.

    Boundary terms use b, |B| and grad p at the zeroth-order path x(t) with the
    full-orbit velocity; the secular term integrates pressure_normal_rate along
    x(t) by the trapezoid rule.
    """
    if not model.has_pressure:
        raise UnsupportedModelError(f"model '{model.name}' carries no pressure function")
    times = traj.times
    if not gc_zero_order.covers(times):
        raise CoverageError((float(times[0]), float(times[-1])), f"zeroth-order path spans {gc_zero_order.span}")

    omega = traj.omega
    params = gc_zero_order.params
    x0 = traj.positions[0]
    p0 = model.pressure(x0)
    lhs = np.array([model.pressure(x) for x in traj.positions]) - p0

    path = gc_zero_order.position_at(times)
    oscillation = np.empty(times.size)
    integrand = np.empty(times.size)
    for i, (x, v) in enumerate(zip(path, traj.velocities)):
        sample = eval_field(model, x)
        oscillation[i] = float(np.dot(np.cross(sample.b, v), sample.grad_pressure)) / (sample.B_mag * omega)
        integrand[i] = pressure_normal_rate(sample, params.v0_mag, params.mu0)

    start = eval_field(model, x0)
    v0 = traj.velocities[0]
    initial = float(np.dot(np.cross(start.b, v0), start.grad_pressure)) / (start.B_mag * omega)
    boundary = oscillation - initial
    secular = cumulative_trapezoid(integrand, times, initial=0.0) / omega
    logger.info(
        f"Pressure deviation on {model.name}: omega={omega:g}, max|lhs|={np.max(np.abs(lhs)):.3e}, "
        f"max|lhs-rhs|={np.max(np.abs(lhs - boundary - secular)):.3e}"
    )
    return PressureDeviation(times.copy(), lhs, boundary + secular, boundary, secular)


# --- Gyroradius ------------------------------------------------------------------------

class GyroradiusSeries(NamedTuple):
    times: np.ndarray
    rho_star: np.ndarray
    rate: np.ndarray
    bound: np.ndarray


def gyroradius_series(gc_traj: GCTrajectory, model: FieldModel) -> GyroradiusSeries:
    """rho* = sqrt(2 mu0 / |B(R)|) / omega, its rate -(h/2)(b.grad|B|/|B|) rho* and the bound (|h|/2) rho* |grad|B||/|B|."""
    params = gc_traj.params
    if not params.mu0 > 0.0:
        raise DegeneratePitchError("gyroradius is identically zero for mu0 = 0")
    n = len(gc_traj)
    rho_star, rate, bound = np.empty(n), np.empty(n), np.empty(n)
    for i, (R, h) in enumerate(zip(gc_traj.positions, gc_traj.h)):
        sample = eval_field(model, R)
        rho_star[i] = math.sqrt(2.0 * params.mu0 / sample.B_mag) / params.omega
        rate[i] = -0.5 * h * float(np.dot(sample.b, sample.grad_B_mag)) / sample.B_mag * rho_star[i]
        bound[i] = 0.5 * abs(h) * rho_star[i] * float(np.linalg.norm(sample.grad_B_mag)) / sample.B_mag
    return GyroradiusSeries(gc_traj.times.copy(), rho_star, rate, bound)


def gyroradius_rate_check(gc_traj: GCTrajectory, model: FieldModel) -> float:
    """max over t of |d rho*/dt| / bound, skipping samples where the bound vanishes."""
    series = gyroradius_series(gc_traj, model)
    usable = series.bound > 0.0
    if not np.any(usable):
        return 0.0
    return float(np.max(np.abs(series.rate[usable]) / series.bound[usable]))
