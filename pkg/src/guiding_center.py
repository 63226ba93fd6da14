"""
Guiding-Centre Dynamics for GyroLab

Zeroth- and first-order guiding-centre equations of motion, initialization
from particle initial data, RK4 integration onto a uniform output grid, and the
drift decomposition into curvature, grad-B and pressure-form pieces.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterator, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import FieldDomainError, IntegrationFailure, TruncatedTrajectoryError, UnsupportedModelError
from .field_models import FieldModel, FieldSample, Vec3, derive_geometry, eval_field
from .orbit import cross, output_grid

logger = logging.getLogger("gyrolab.guiding_center")

INIT_MODES = ("exact", "naive")
ORDERS = (0, 1)
PARALLEL_SPEED_TOL = 1e-9
DEFAULT_GC_STEPS = 10_000


@dataclass(frozen=True)
class GCState:
    t: float
    R: Vec3
    h: float


@dataclass(frozen=True)
class GCParams:
    """Conserved parameters of a guiding-centre run."""

    mu0: float
    v0_mag: float
    omega: float
    order: int = 1

    def with_order(self, order: int) -> "GCParams":
        return replace(self, order=order)


def gc_init(model: FieldModel, x0, v0, omega: float, mode: str = "exact", order: int = 1) -> Tuple[GCState, GCParams]:
    """Guiding-centre initial state and moment from particle data (x0, v0).

    exact mode removes the initial gyration b(x0) x v0 / (omega |B(x0)|);
    naive mode starts the guiding centre on the particle.
    """
    if not omega > 0.0:
        raise ValueError(f"omega must be positive, got {omega}")
    if mode not in INIT_MODES:
        raise ValueError(f"unknown init mode '{mode}'; expected one of {INIT_MODES}")
    if order not in ORDERS:
        raise ValueError(f"order must be 0 or 1, got {order}")
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    sample = eval_field(model, x0)

    h0 = float(np.dot(sample.b, v0))
    v0_sq = float(np.dot(v0, v0))
    mu0 = max(v0_sq - h0 * h0, 0.0) / (2.0 * sample.B_mag)

    R0 = x0.copy()
    if mode == "exact":
        R0 = x0 - np.cross(sample.b, v0) / (omega * sample.B_mag)
    state = GCState(0.0, R0, h0)
    params = GCParams(mu0=mu0, v0_mag=math.sqrt(v0_sq), omega=float(omega), order=order)
    logger.debug(f"gc_init ({mode}): R0={R0.tolist()}, h0={h0:.6g}, mu0={mu0:.6g}")
    return state, params


def _rhs(R, h: float, params: GCParams, model: FieldModel) -> Tuple[np.ndarray, float]:
    model.require_inside(R)
    geo = derive_geometry(model.field(R), model.jacobian(R))
    b = geo.b
    dR = h * b
    dh = -params.mu0 * float(b @ geo.grad_B_mag)
    if params.order == 1:
        drift = h * h * cross(b, geo.kappa) + params.mu0 * cross(b, geo.grad_B_mag)
        dR = dR + drift / (params.omega * geo.B_mag)
        # parallel drift along twisted field lines (b . curl b != 0)
        dR = dR + (params.mu0 * float(b @ geo.curl_b) / params.omega) * b
    return dR, dh


def gc_rhs(state: GCState, params: GCParams, model: FieldModel) -> Tuple[np.ndarray, float]:
    """(dR/dt, dh/dt) of the guiding-centre system at the requested order."""
    return _rhs(np.asarray(state.R, dtype=float), state.h, params, model)


def _rk4(R, h: float, dt: float, params: GCParams, model: FieldModel):
    k1R, k1h = _rhs(R, h, params, model)
    k2R, k2h = _rhs(R + 0.5 * dt * k1R, h + 0.5 * dt * k1h, params, model)
    k3R, k3h = _rhs(R + 0.5 * dt * k2R, h + 0.5 * dt * k2h, params, model)
    k4R, k4h = _rhs(R + dt * k3R, h + dt * k3h, params, model)
    R_new = R + (dt / 6.0) * (k1R + 2.0 * k2R + 2.0 * k3R + k4R)
    h_new = h + (dt / 6.0) * (k1h + 2.0 * k2h + 2.0 * k3h + k4h)
    return R_new, h_new


@dataclass(frozen=True, eq=False)
class GCTrajectory:
    """Guiding-centre path sampled on a uniform grid."""

    params: GCParams
    model_name: str
    times: np.ndarray
    positions: np.ndarray
    h: np.ndarray
    velocities: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def span(self) -> Tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    def state(self, i: int) -> GCState:
        return GCState(float(self.times[i]), self.positions[i].copy(), float(self.h[i]))

    @property
    def samples(self) -> List[GCState]:
        return [self.state(i) for i in range(len(self))]

    def __iter__(self) -> Iterator[GCState]:
        for i in range(len(self)):
            yield self.state(i)

    @cached_property
    def _position_spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.times, self.positions, self.velocities, axis=0)

    def covers(self, t_grid) -> bool:
        t_grid = np.asarray(t_grid, dtype=float)
        t0, t1 = self.span
        tol = 1e-12 * max(1.0, abs(t1))
        return bool(t_grid.min() >= t0 - tol and t_grid.max() <= t1 + tol)

    def position_at(self, t) -> np.ndarray:
        """Cubic Hermite interpolation of R using the stored dR/dt."""
        if self.times.size == 1:
            return np.broadcast_to(self.positions[0], np.shape(t) + (3,)).copy()
        return self._position_spline(t)


def integrate_gc(model: FieldModel, init: GCState, params: GCParams, T: float,
                 dt: Optional[float] = None, dt_out: Optional[float] = None) -> GCTrajectory:
    """RK4 integration of the guiding-centre system on [0, T].

    dt defaults to T / 10^4 and dt_out to T / 2000; each output interval is
    split into ceil(dt_out / dt) equal steps so samples land on the grid.
    |h| <= |v0| is monitored, never clamped.
    """
    if not T > 0.0:
        raise ValueError(f"T must be positive, got {T}")
    if dt is None:
        dt = T / DEFAULT_GC_STEPS
    if dt_out is None:
        dt_out = T / 2000.0
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")

    R = np.asarray(init.R, dtype=float).copy()
    h = float(init.h)
    model.require_inside(R)

    grid = init.t + output_grid(T, dt_out)
    substeps = max(1, math.ceil((grid[1] - grid[0]) / dt - 1e-9))
    h_limit = params.v0_mag + PARALLEL_SPEED_TOL

    positions = np.empty((grid.size, 3))
    hs = np.empty(grid.size)
    velocities = np.empty((grid.size, 3))
    positions[0], hs[0] = R, h
    velocities[0] = _rhs(R, h, params, model)[0]

    for i in range(1, grid.size):
        step = (grid[i] - grid[i - 1]) / substeps
        for k in range(substeps):
            t_now = grid[i - 1] + (k + 1) * step
            try:
                R, h = _rk4(R, h, step, params, model)
            except FieldDomainError:
                R = None
            if R is None or not (np.all(np.isfinite(R)) and model.contains(R)):
                logger.warning(f"Guiding centre left the domain of {model.name} near t={t_now:.6g}")
                raise TruncatedTrajectoryError(
                    f"guiding centre left the domain of model '{model.name}' ({model.domain.describe()})",
                    exit_time=float(grid[i - 1]), last_position=positions[i - 1],
                )
            if abs(h) > h_limit:
                raise IntegrationFailure(
                    f"|h|={abs(h):.12g} exceeds |v0|={params.v0_mag:.12g} at t={t_now:.6g}; "
                    f"the guiding-centre step dt={step:.3g} is too large"
                )
        positions[i], hs[i] = R, h
        velocities[i] = _rhs(R, h, params, model)[0]

    traj = GCTrajectory(params, model.name, grid, positions, hs, velocities,
                        metadata={"dt": float(dt), "dt_out": float(dt_out), "substeps": substeps})
    logger.info(
        f"Integrated order-{params.order} guiding centre on {model.name}: omega={params.omega:g}, "
        f"T={T:g}, {(grid.size - 1) * substeps} steps"
    )
    return traj


def gc_energy(gc_traj: GCTrajectory, model: FieldModel) -> np.ndarray:
    """h^2 + 2 mu0 |B(R)| along a guiding-centre trajectory."""
    strengths = np.array([model.field_strength(R) for R in gc_traj.positions])
    return gc_traj.h ** 2 + 2.0 * gc_traj.params.mu0 * strengths


def parallel_crossings(times, values) -> np.ndarray:
    """Times where a sampled scalar changes sign, by linear interpolation."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    crossings = []
    for i in range(values.size - 1):
        a, c = values[i], values[i + 1]
        if a == 0.0:
            if i > 0 and values[i - 1] * c < 0.0:
                crossings.append(times[i])
            continue
        if a * c < 0.0:
            crossings.append(times[i] - a * (times[i + 1] - times[i]) / (c - a))
    return np.asarray(crossings)


class DriftDecomposition(NamedTuple):
    curvature_drift: Vec3
    gradB_drift: Vec3
    pressure_form: Optional[Tuple[Vec3, Vec3]] = None

    @property
    def total(self) -> Vec3:
        return self.curvature_drift + self.gradB_drift

    @property
    def pressure_total(self) -> Optional[Vec3]:
        if self.pressure_form is None:
            return None
        return self.pressure_form[0] + self.pressure_form[1]


def drift_decomposition(sample: FieldSample, h: float, mu0: float, omega: float,
                        pressure_form: bool = False, v0_mag: Optional[float] = None) -> DriftDecomposition:
    """Curvature and grad-B drifts, optionally regrouped into curvature-like and Lorentz-force pieces.

    The regrouping reads (|v0|^2/|B| - mu0) b x kappa / omega and
    mu0 b x (B x curl B) / (omega |B|^2); |v0|^2 defaults to h^2 + 2 mu0 |B|.
    """
    b, B_mag = sample.b, sample.B_mag
    curvature = h * h * np.cross(b, sample.kappa) / (omega * B_mag)
    grad_b = mu0 * np.cross(b, sample.grad_B_mag) / (omega * B_mag)
    regrouped = None
    if pressure_form:
        if not sample.has_pressure:
            raise UnsupportedModelError("pressure-form drift needs a sample carrying pressure data")
        v0_sq = h * h + 2.0 * mu0 * B_mag if v0_mag is None else v0_mag * v0_mag
        curvature_like = (v0_sq / B_mag - mu0) * np.cross(b, sample.kappa) / omega
        lorentz = np.cross(sample.B, sample.curl_B)
        lorentz_like = mu0 * np.cross(b, lorentz) / (omega * B_mag * B_mag)
        regrouped = (curvature_like, lorentz_like)
    return DriftDecomposition(curvature, grad_b, regrouped)
