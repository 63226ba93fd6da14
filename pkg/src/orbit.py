"""
Full-orbit integration for GyroLab

Integrates the normalized Lorentz equation x'' = omega x' x B(x) with a
speed-preserving Boris scheme or classical RK4 (short-run reference). The step
size follows the local gyroperiod, the raw step record is kept, and output is
resampled onto a uniform grid by cubic Hermite interpolation.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, List, Optional, Tuple

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import TruncatedTrajectoryError
from .field_models import FieldModel, Vec3

logger = logging.getLogger("gyrolab.orbit")

SCHEMES = ("boris", "rk4")
MIN_STEPS_PER_GYRO = 16


def cross(a, b) -> np.ndarray:
    """3-vector cross product (np.cross is slow for single vectors)."""
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


@dataclass(frozen=True)
class ParticleState:
    t: float
    x: Vec3
    v: Vec3

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.v))


def boris_step(state: ParticleState, dt: float, omega: float, model: FieldModel) -> ParticleState:
    """One Boris step: half drift, exact rotation about b(x_mid) by omega|B|dt, half drift.

    Any nonzero dt is accepted; a negative dt runs the step backward and undoes
    the matching forward step up to rounding.
    """
    if dt == 0.0:
        raise ValueError("dt must be nonzero")
    x_mid = state.x + 0.5 * dt * state.v
    B = model.field(x_mid)
    B_mag = math.sqrt(B[0] * B[0] + B[1] * B[1] + B[2] * B[2])
    v = state.v
    if B_mag > 0.0:
        half_angle = 0.5 * omega * B_mag * dt
        t_vec = B * (math.tan(half_angle) / B_mag)
        s_vec = t_vec * (2.0 / (1.0 + float(t_vec @ t_vec)))
        v_prime = v + cross(v, t_vec)
        v = v + cross(v_prime, s_vec)
    x_new = x_mid + 0.5 * dt * v
    return ParticleState(state.t + dt, x_new, v)


def rk4_step(state: ParticleState, dt: float, omega: float, model: FieldModel,
             B_start: Optional[Vec3] = None) -> ParticleState:
    """Classical RK4 step of (x' = v, v' = omega v x B(x)).

    B_start, when given, is B at state.x and saves one field evaluation.
    """
    x, v = state.x, state.v
    B1 = model.field(x) if B_start is None else B_start
    k1x, k1v = v, omega * cross(v, B1)

    v2 = v + 0.5 * dt * k1v
    k2x, k2v = v2, omega * cross(v2, model.field(x + 0.5 * dt * k1x))

    v3 = v + 0.5 * dt * k2v
    k3x, k3v = v3, omega * cross(v3, model.field(x + 0.5 * dt * k2x))

    v4 = v + dt * k3v
    k4x, k4v = v4, omega * cross(v4, model.field(x + dt * k3x))

    x_new = x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    v_new = v + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return ParticleState(state.t + dt, x_new, v_new)


def advance(state: ParticleState, dt: float, n_steps: int, omega: float, model: FieldModel,
            scheme: str = "boris") -> ParticleState:
    """Take n_steps fixed steps of size dt (dt may be negative for Boris)."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme '{scheme}'; expected one of {SCHEMES}")
    step = boris_step if scheme == "boris" else rk4_step
    for _ in range(n_steps):
        state = step(state, dt, omega, model)
    return state


def gyroperiod(model: FieldModel, x, omega: float) -> float:
    """Local gyroperiod 2 pi / (omega |B(x)|)."""
    return 2.0 * math.pi / (omega * model.field_strength(x))


def output_grid(T: float, dt_out: float) -> np.ndarray:
    """Uniform grid linspace(0, T, n + 1) with n = max(1, round(T / dt_out))."""
    if not dt_out > 0.0:
        raise ValueError(f"dt_out must be positive, got {dt_out}")
    n = max(1, int(round(T / dt_out)))
    return np.linspace(0.0, T, n + 1)


class _StepRecord:
    """Growable (t, x, v, B) storage for the raw integrator steps."""

    def __init__(self, capacity: int):
        self.n = 0
        self.t = np.empty(capacity)
        self.x = np.empty((capacity, 3))
        self.v = np.empty((capacity, 3))
        self.B = np.empty((capacity, 3))

    def append(self, t: float, x, v, B) -> None:
        if self.n == self.t.size:
            self._grow()
        i = self.n
        self.t[i] = t
        self.x[i] = x
        self.v[i] = v
        self.B[i] = B
        self.n += 1

    def _grow(self) -> None:
        size = 2 * self.t.size
        self.t = np.resize(self.t, size)
        self.x = np.resize(self.x, (size, 3))
        self.v = np.resize(self.v, (size, 3))
        self.B = np.resize(self.B, (size, 3))

    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        n = self.n
        return self.t[:n].copy(), self.x[:n].copy(), self.v[:n].copy(), self.B[:n].copy()


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A full orbit: the raw step record plus its resampling on a uniform output grid."""

    omega: float
    scheme: str
    steps_per_gyro: int
    model_name: str
    step_times: np.ndarray
    step_positions: np.ndarray
    step_velocities: np.ndarray
    step_fields: np.ndarray
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    degenerate: bool = False
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def span(self) -> Tuple[float, float]:
        return float(self.step_times[0]), float(self.step_times[-1])

    @property
    def n_steps(self) -> int:
        return int(self.step_times.size) - 1

    def state(self, i: int) -> ParticleState:
        return ParticleState(float(self.times[i]), self.positions[i].copy(), self.velocities[i].copy())

    @property
    def samples(self) -> List[ParticleState]:
        return [self.state(i) for i in range(len(self))]

    def __iter__(self) -> Iterator[ParticleState]:
        for i in range(len(self)):
            yield self.state(i)

    @cached_property
    def _position_spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.step_times, self.step_positions, self.step_velocities, axis=0)

    @cached_property
    def _velocity_spline(self) -> CubicHermiteSpline:
        accelerations = self.omega * np.cross(self.step_velocities, self.step_fields)
        return CubicHermiteSpline(self.step_times, self.step_velocities, accelerations, axis=0)

    def covers(self, t_grid) -> bool:
        t_grid = np.asarray(t_grid, dtype=float)
        t0, t1 = self.span
        tol = 1e-12 * max(1.0, abs(t1))
        return bool(t_grid.min() >= t0 - tol and t_grid.max() <= t1 + tol)

    def position_at(self, t) -> np.ndarray:
        """Cubic Hermite interpolation of x on the raw steps (x' = v is exact data)."""
        if self.step_times.size == 1:
            return np.broadcast_to(self.step_positions[0], np.shape(t) + (3,)).copy()
        return self._position_spline(t)

    def velocity_at(self, t) -> np.ndarray:
        """Cubic Hermite interpolation of v on the raw steps (v' = omega v x B)."""
        if self.step_times.size == 1:
            return np.broadcast_to(self.step_velocities[0], np.shape(t) + (3,)).copy()
        return self._velocity_spline(t)


def integrate_orbit(model: FieldModel, x0, v0, omega: float, T: float, steps_per_gyro: int = 64,
                    scheme: str = "boris", dt_out: Optional[float] = None) -> Trajectory:
    """Integrate a full orbit on [0, T].

    Each step uses dt = 2 pi / (omega |B(x)| steps_per_gyro) at the current
    position, truncated so the last step lands on T. dt_out defaults to one
    eighth of the gyroperiod at x0.
    """
    if not omega > 0.0:
        raise ValueError(f"omega must be positive, got {omega}")
    if not T > 0.0:
        raise ValueError(f"T must be positive, got {T}")
    if steps_per_gyro < MIN_STEPS_PER_GYRO:
        raise ValueError(f"steps_per_gyro must be at least {MIN_STEPS_PER_GYRO}, got {steps_per_gyro}")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme '{scheme}'; expected one of {SCHEMES}")

    x = np.asarray(x0, dtype=float).copy()
    v = np.asarray(v0, dtype=float).copy()
    model.require_inside(x)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"v0 must be finite, got {v.tolist()}")

    B = model.field(x)
    period0 = gyroperiod(model, x, omega)
    if dt_out is None:
        dt_out = period0 / 8.0
    dt0 = period0 / steps_per_gyro

    if T <= dt0:
        logger.warning(f"T={T:g} is not longer than one step (dt={dt0:.3g}); returning the initial state only")
        t_arr = np.zeros(1)
        x_arr, v_arr, B_arr = x[None, :], v[None, :], B[None, :]
        return Trajectory(omega, scheme, steps_per_gyro, model.name, t_arr, x_arr, v_arr, B_arr,
                          t_arr.copy(), x_arr.copy(), v_arr.copy(), degenerate=True,
                          metadata={"dt_out": dt_out})

    estimate = int(T / dt0 * 1.1) + 16
    record = _StepRecord(estimate)
    record.append(0.0, x, v, B)

    state = ParticleState(0.0, x, v)
    theta = 2.0 * math.pi / steps_per_gyro
    while state.t < T:
        B_mag = math.sqrt(B[0] * B[0] + B[1] * B[1] + B[2] * B[2])
        dt = theta / (omega * B_mag)
        last = state.t + dt >= T
        if last:
            dt = T - state.t
        if scheme == "boris":
            state = boris_step(state, dt, omega, model)
        else:
            state = rk4_step(state, dt, omega, model, B_start=B)
        if last:
            state = ParticleState(T, state.x, state.v)
        if not (np.all(np.isfinite(state.x)) and model.contains(state.x)):
            t_exit, x_exit = record.t[record.n - 1], record.x[record.n - 1]
            logger.warning(f"Orbit left the domain of {model.name} near t={state.t:.6g}")
            raise TruncatedTrajectoryError(
                f"orbit left the domain of model '{model.name}' ({model.domain.describe()})",
                exit_time=float(t_exit), last_position=x_exit,
            )
        B = model.field(state.x)
        record.append(state.t, state.x, state.v, B)

    step_t, step_x, step_v, step_B = record.arrays()
    traj = Trajectory(omega, scheme, steps_per_gyro, model.name, step_t, step_x, step_v, step_B,
                      np.empty(0), np.empty((0, 3)), np.empty((0, 3)), metadata={"dt_out": dt_out})
    grid = output_grid(T, dt_out)
    resampled = Trajectory(
        omega, scheme, steps_per_gyro, model.name, step_t, step_x, step_v, step_B,
        grid, traj.position_at(grid), traj.velocity_at(grid), metadata={"dt_out": dt_out},
    )
    logger.info(
        f"Integrated {scheme} orbit on {model.name}: omega={omega:g}, T={T:g}, "
        f"{resampled.n_steps} steps, {len(resampled)} output samples"
    )
    return resampled


def speed_drift(traj: Trajectory) -> float:
    """max | |v| - |v(0)| | over the integrator states of the trajectory."""
    speeds = np.linalg.norm(traj.step_velocities, axis=1)
    if speeds.size <= 1:
        return 0.0
    return float(np.max(np.abs(speeds - speeds[0])))
