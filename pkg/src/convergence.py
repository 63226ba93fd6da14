"""
Convergence Harness for GyroLab

Omega sweeps comparing speed-exact Boris reference orbits against
guiding-centre solutions, with log-log order fitting and the monotonicity
checks that turn the asymptotic statements into pass/fail results. Sweep
cells are independent and can be fanned out to a process pool.
"""

import asyncio
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .diagnostics import (
    PressureDeviation,
    guiding_center_series,
    initial_frame_vector,
    moment_series,
    parallel_velocity_series,
    pressure_deviation,
    time_avg_gyromotion,
)
from .errors import CoverageError, FitError, GyroLabError, SweepError
from .field_models import FieldModel, MirrorField, eval_field
from .guiding_center import drift_decomposition, gc_init, integrate_gc, parallel_crossings
from .orbit import integrate_orbit

logger = logging.getLogger("gyrolab.convergence")

METRICS = ("zeroth_order", "first_order_gc", "moment_drift", "avg_gyro", "pressure_remainder")
DEFAULT_OMEGAS = (1e2, 3e2, 1e3, 3e3, 1e4)
MIN_SWEEP_OMEGA = 1e2
DEFAULT_T = 5.0
GRID_POINTS = 2000
# reference orbits must conserve |v| over up to ~10^4 gyrations
SWEEP_SCHEME = "boris"
SWEEP_STEPS_PER_GYRO = 400
EXACT_FLOOR = 1e-10

# which series must decrease strictly for the sweep to pass
MONOTONE_SERIES = {
    "zeroth_order": "error",
    "moment_drift": "error",
    "first_order_gc": "omega_times_error",
    "avg_gyro": "omega_times_error",
    "pressure_remainder": "omega_times_error",
}


@dataclass(frozen=True)
class FitResult:
    order: float
    intercept: float
    residual: float
    flagged: Tuple[int, ...] = ()


def order_fit(omegas: Sequence[float], errors: Sequence[float]) -> FitResult:
    """Least squares on (log omega, log error); the slope is negated so order 1 means error ~ 1/omega.

    Non-positive errors are excluded and reported in `flagged`.
    """
    omegas = np.asarray(omegas, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if omegas.shape != errors.shape:
        raise ValueError(f"omegas and errors differ in length ({omegas.size} vs {errors.size})")
    keep = errors > 0.0
    flagged = tuple(int(i) for i in np.flatnonzero(~keep))
    if flagged:
        logger.warning(f"order_fit: excluding non-positive errors at indices {list(flagged)}")
    if int(keep.sum()) < 3:
        raise FitError(f"order fit needs at least 3 positive errors, got {int(keep.sum())}")

    log_w, log_e = np.log(omegas[keep]), np.log(errors[keep])
    design = np.column_stack([log_w, np.ones_like(log_w)])
    (slope, intercept), *_ = np.linalg.lstsq(design, log_e, rcond=None)
    fitted = design @ np.array([slope, intercept])
    residual = float(np.sqrt(np.mean((log_e - fitted) ** 2)))
    return FitResult(order=-float(slope), intercept=float(intercept), residual=residual, flagged=flagged)


def _strictly_decreasing(values: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(values[:-1], values[1:]))


@dataclass(frozen=True)
class SweepResult:
    metric: str
    model: str
    omegas: List[float]
    errors: List[float]
    fitted_order: float
    ratios: List[float]
    T: float
    init_mode: str = "exact"
    fit_residual: float = float("nan")
    flagged: Tuple[int, ...] = ()

    @property
    def omega_times_error(self) -> List[float]:
        return [w * e for w, e in zip(self.omegas, self.errors)]

    @property
    def monotone(self) -> bool:
        """The metric's monotonicity criterion; sweeps that are exact to EXACT_FLOOR pass trivially."""
        if max(self.errors) < EXACT_FLOOR:
            return True
        series = self.errors if MONOTONE_SERIES[self.metric] == "error" else self.omega_times_error
        return _strictly_decreasing(series)

    def rows(self) -> List[Dict[str, float]]:
        return [{"omega": w, "error": e, "omega_times_error": w * e} for w, e in zip(self.omegas, self.errors)]

    def summary(self) -> Dict[str, object]:
        order = None if math.isnan(self.fitted_order) else self.fitted_order
        return {"metric": self.metric, "model": self.model, "fitted_order": order, "monotone": self.monotone}


@dataclass(frozen=True)
class SweepSettings:
    """Numerical resolution shared by every cell of a sweep."""

    steps_per_gyro: int = SWEEP_STEPS_PER_GYRO
    scheme: str = SWEEP_SCHEME
    grid_points: int = GRID_POINTS
    gc_steps: int = 10_000
    init_mode: str = "exact"

    def as_dict(self) -> Dict[str, object]:
        return asdict(self)


# --- Well-prepared initial data ----------------------------------------------

def perpendicular_direction(model: FieldModel, x0) -> np.ndarray:
    """Unit vector orthogonal to b(x0), along the perpendicular part of grad|B| when it exists."""
    sample = eval_field(model, x0)
    g = sample.grad_B_mag - np.dot(sample.grad_B_mag, sample.b) * sample.b
    norm = float(np.linalg.norm(g))
    if norm > 1e-12:
        return g / norm
    R = np.array([x0[0], x0[1], 0.0])
    R = R - np.dot(R, sample.b) * sample.b
    if np.linalg.norm(R) > 1e-12:
        return R / np.linalg.norm(R)
    return initial_frame_vector(sample.b)


def default_initial_data(model: FieldModel, v_perp: float = 0.8, v_par: float = 0.6) -> Tuple[np.ndarray, np.ndarray, float]:
    """(x0, v0, T) for a built-in model.

    The perpendicular velocity points along grad|B| (radially when grad|B| has
    no perpendicular part) so the initial gyration is orthogonal to grad|B|.
    The mirror window is one bounce period; other models use T = 5.
    """
    p = model.params
    if model.name == "toroidal":
        x0 = np.array([p["R0"], 0.0, 0.0])
    elif model.name == "screw_pinch":
        x0 = np.array([0.5 * p["a"], 0.0, 0.0])
    elif model.name == "solovev":
        x0 = np.array([1.2 * p["R0"], 0.0, 0.0])
    else:
        x0 = np.zeros(3)
    b = eval_field(model, x0).b
    v0 = v_perp * perpendicular_direction(model, x0) + v_par * b
    T = DEFAULT_T
    if isinstance(model, MirrorField):
        T = mirror_bounce_period(model, x0, v0)
    return x0, v0, T


def mirror_bounce_period(model: MirrorField, x0, v0) -> float:
    """Bounce period of the on-axis parabolic well, 2 pi L / sqrt(2 mu0 B0)."""
    sample = eval_field(model, x0)
    v0 = np.asarray(v0, dtype=float)
    h0 = float(np.dot(sample.b, v0))
    mu0 = (float(np.dot(v0, v0)) - h0 * h0) / (2.0 * sample.B_mag)
    if not mu0 > 0.0:
        raise ValueError("a particle with mu0 = 0 does not bounce")
    return 2.0 * math.pi * model.params["L"] / math.sqrt(2.0 * mu0 * model.params["B0"])


# --- Distances -----------------------------------------------------------------

def sup_distance(a, b, t_grid) -> float:
    """max over t_grid of |a(t) - b(t)| for trajectory-like objects with position_at/covers."""
    t_grid = np.asarray(t_grid, dtype=float)
    for traj in (a, b):
        if not traj.covers(t_grid):
            t0, t1 = traj.span
            lo, hi = float(t_grid.min()), float(t_grid.max())
            gap = (lo, t0) if lo < t0 else (t1, hi)
            raise CoverageError(gap, f"trajectory spans [{t0:.6g}, {t1:.6g}]")
    if a is b:
        return 0.0
    return float(np.max(np.linalg.norm(a.position_at(t_grid) - b.position_at(t_grid), axis=1)))


# --- Sweep cells ----------------------------------------------------------------

def sweep_cell(model: FieldModel, x0, v0, omega: float, T: float, metric: str,
               settings: SweepSettings = SweepSettings()) -> float:
    """Error of one metric at one omega."""
    grid = np.linspace(0.0, T, settings.grid_points + 1)
    dt_out = T / settings.grid_points
    gc_dt = T / settings.gc_steps
    traj = integrate_orbit(model, x0, v0, omega, T, settings.steps_per_gyro, settings.scheme, dt_out)

    if metric == "zeroth_order":
        init, params = gc_init(model, x0, v0, omega, mode="naive", order=0)
        gc = integrate_gc(model, init, params, T, gc_dt, dt_out)
        return sup_distance(traj, gc, grid)
    if metric == "first_order_gc":
        init, params = gc_init(model, x0, v0, omega, mode=settings.init_mode, order=1)
        gc = integrate_gc(model, init, params, T, gc_dt, dt_out)
        centres = guiding_center_series(traj, model)
        return float(np.max(np.linalg.norm(centres - gc.position_at(traj.times), axis=1)))
    if metric == "moment_drift":
        _, params = gc_init(model, x0, v0, omega)
        return float(np.max(np.abs(moment_series(traj, model, params.v0_mag) - params.mu0)))
    if metric == "avg_gyro":
        return float(np.linalg.norm(time_avg_gyromotion(traj, model, 0.0, T)))
    if metric == "pressure_remainder":
        init, params = gc_init(model, x0, v0, omega, mode="naive", order=0)
        gc = integrate_gc(model, init, params, T, gc_dt, dt_out)
        return float(np.max(np.abs(pressure_deviation(traj, model, gc).remainder)))
    raise ValueError(f"unknown metric '{metric}'; expected one of {METRICS}")


def _guarded_cell(model, x0, v0, omega, T, metric, settings) -> float:
    try:
        return sweep_cell(model, x0, v0, omega, T, metric, settings)
    except GyroLabError as e:
        raise SweepError(omega, e) from e


def pressure_cell(model: FieldModel, x0, v0, omega: float, T: float,
                  settings: SweepSettings = SweepSettings()) -> PressureDeviation:
    """Pressure deviation of one full orbit against the naive zeroth-order path."""
    try:
        dt_out = T / settings.grid_points
        traj = integrate_orbit(model, x0, v0, omega, T, settings.steps_per_gyro, settings.scheme, dt_out)
        init, params = gc_init(model, x0, v0, omega, mode="naive", order=0)
        gc = integrate_gc(model, init, params, T, T / settings.gc_steps, dt_out)
        return pressure_deviation(traj, model, gc)
    except GyroLabError as e:
        raise SweepError(omega, e) from e


async def _gather(fn, calls, workers: int) -> list:
    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        tasks = [loop.run_in_executor(pool, fn, *args) for args in calls]
        return list(await asyncio.gather(*tasks))


def map_cells(fn, calls: Sequence[tuple], workers: int = 1) -> list:
    """Apply fn to each argument tuple, in a process pool when workers > 1; results keep call order."""
    if workers > 1 and len(calls) > 1:
        return asyncio.run(_gather(fn, calls, min(workers, len(calls))))
    return [fn(*args) for args in calls]


def _validate_omegas(omegas: Sequence[float]) -> List[float]:
    omegas = [float(w) for w in omegas]
    if len(omegas) < 3:
        raise ValueError(f"a sweep needs at least 3 omega values, got {len(omegas)}")
    if any(w < MIN_SWEEP_OMEGA for w in omegas):
        raise ValueError(f"sweep omegas must be at least {MIN_SWEEP_OMEGA:g}, got {omegas}")
    if not all(b > a for a, b in zip(omegas[:-1], omegas[1:])):
        raise ValueError(f"sweep omegas must be strictly increasing, got {omegas}")
    return omegas


def omega_sweep(model: FieldModel, x0, v0, omegas: Sequence[float] = DEFAULT_OMEGAS, T: float = DEFAULT_T,
                metric: str = "first_order_gc", settings: Optional[SweepSettings] = None,
                workers: int = 1) -> SweepResult:
    """Run one metric across omegas with identical initial data and fit its order."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric '{metric}'; expected one of {METRICS}")
    omegas = _validate_omegas(omegas)
    settings = settings or SweepSettings()
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)

    logger.info(f"Sweep {metric} on {model.name}: omegas={omegas}, T={T:g}, workers={workers}")
    calls = [(model, x0, v0, omega, T, metric, settings) for omega in omegas]
    errors = [float(e) for e in map_cells(_guarded_cell, calls, workers)]
    for omega, error in zip(omegas, errors):
        logger.info(f"  omega={omega:g}: error={error:.6e}")

    try:
        fit = order_fit(omegas, errors)
        order, residual, flagged = fit.order, fit.residual, fit.flagged
    except FitError as e:
        logger.warning(f"Sweep {metric} on {model.name}: no order fitted ({e})")
        order, residual = float("nan"), float("nan")
        flagged = tuple(i for i, err in enumerate(errors) if not err > 0.0)
    ratios = [b / a if a > 0.0 else float("nan") for a, b in zip(errors[:-1], errors[1:])]
    result = SweepResult(metric, model.name, omegas, errors, order, ratios, T, settings.init_mode, residual, flagged)
    logger.info(f"Sweep {metric} on {model.name}: fitted order {order:.3f}, monotone={result.monotone}")
    return result


# --- Acceptance helpers -----------------------------------------------------------

def expected_drift_velocity(model: FieldModel, x0, v0, omega: float) -> np.ndarray:
    """First-order perpendicular drift at the initial guiding centre."""
    init, params = gc_init(model, x0, v0, omega)
    return drift_decomposition(eval_field(model, init.R), init.h, params.mu0, omega).total


@dataclass(frozen=True)
class BounceComparison:
    """Sign changes of b.v on the full orbit against h = 0 crossings of the guiding centre."""

    orbit_crossings: np.ndarray
    gc_crossings: np.ndarray
    gyroperiod: float
    max_moment_deviation: float
    mu0: float
    metadata: dict = field(default_factory=dict)

    @property
    def max_offset(self) -> float:
        n = min(self.orbit_crossings.size, self.gc_crossings.size)
        if n == 0:
            return float("inf")
        return float(np.max(np.abs(self.orbit_crossings[:n] - self.gc_crossings[:n])))

    @property
    def offset_in_gyroperiods(self) -> float:
        return self.max_offset / self.gyroperiod


def bounce_comparison(model: FieldModel, x0, v0, omega: float, T: float,
                      settings: SweepSettings = SweepSettings()) -> BounceComparison:
    """Compare bounce points and moment conservation between a full orbit and the order-1 guiding centre."""
    dt_out = T / settings.grid_points
    traj = integrate_orbit(model, x0, v0, omega, T, settings.steps_per_gyro, settings.scheme, dt_out)
    init, params = gc_init(model, x0, v0, omega, mode=settings.init_mode, order=1)
    gc = integrate_gc(model, init, params, T, T / settings.gc_steps, dt_out)

    # average b.v over a gyration before locating its sign change
    period = 2.0 * math.pi / (omega * model.field_strength(x0))
    h_orbit = parallel_velocity_series(traj, model)
    width = max(1, int(round(period / dt_out)))
    smoothed = np.convolve(h_orbit, np.ones(width) / width, mode="same")
    deviation = float(np.max(np.abs(moment_series(traj, model, params.v0_mag) - params.mu0)))
    return BounceComparison(
        orbit_crossings=parallel_crossings(traj.times, smoothed),
        gc_crossings=parallel_crossings(gc.times, gc.h),
        gyroperiod=period,
        max_moment_deviation=deviation,
        mu0=params.mu0,
        metadata={"omega": omega, "T": T, "settings": settings.as_dict()},
    )
