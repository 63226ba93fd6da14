"""
Field Models for GyroLab

Analytic, divergence-free, nowhere-vanishing magnetic fields with exact Jacobians,
the derived local geometry (unit field, grad|B|, curls, curvature) and
finite-difference self-checks. Two models carry an MHD-equilibrium pressure
satisfying B x curl B = grad p.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, NamedTuple, Optional, Tuple, Type

import numpy as np

from .errors import ConfigError, FieldDomainError, SingularFieldError, UnsupportedModelError

logger = logging.getLogger("gyrolab.field_models")

Vec3 = np.ndarray

SINGULAR_FIELD_TOL = 1e-12
DEFAULT_FD_STEP = 1e-5
DEFAULT_SEED = 42


@dataclass(frozen=True)
class FieldSample:
    """Magnetic field value and the derived geometry at one point."""

    x: Vec3
    B: Vec3
    B_mag: float
    b: Vec3
    J: np.ndarray
    grad_B_mag: Vec3
    curl_B: Vec3
    curl_b: Vec3
    kappa: Vec3
    pressure: Optional[float] = None
    grad_pressure: Optional[Vec3] = None

    @property
    def has_pressure(self) -> bool:
        return self.pressure is not None and self.grad_pressure is not None

    @property
    def Jb(self) -> np.ndarray:
        """Jacobian of the unit field, by the chain rule from J."""
        return unit_field_jacobian(self.b, self.B_mag, self.J)


class Geometry(NamedTuple):
    b: Vec3
    B_mag: float
    grad_B_mag: Vec3
    curl_B: Vec3
    curl_b: Vec3
    kappa: Vec3


@dataclass(frozen=True)
class ResidualStats:
    """Max/mean of a residual over seeded sample points."""

    model: str
    check: str
    max: float
    mean: float
    n: int
    seed: int

    def as_row(self) -> Dict[str, object]:
        return {"model": self.model, "check": self.check, "max": self.max,
                "mean": self.mean, "n": self.n, "seed": self.seed}


# --- Domains -----------------------------------------------------------------

@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box lower <= x <= upper."""

    lower: Tuple[float, float, float]
    upper: Tuple[float, float, float]

    def contains(self, x, margin: float = 0.0) -> bool:
        for c, lo, hi in zip(x, self.lower, self.upper):
            if not (lo + margin <= c <= hi - margin):
                return False
        return True

    def sample(self, rng: np.random.Generator, n: int, margin: float = 0.0) -> np.ndarray:
        lo = np.asarray(self.lower, dtype=float) + margin
        hi = np.asarray(self.upper, dtype=float) - margin
        return lo + (hi - lo) * rng.random((n, 3))

    def describe(self) -> str:
        return f"box {self.lower} .. {self.upper}"


@dataclass(frozen=True)
class CylinderDomain:
    """Cylindrical shell r_min <= sqrt(x^2+y^2) <= r_max, z_min <= z <= z_max."""

    r_min: float
    r_max: float
    z_min: float
    z_max: float

    def contains(self, x, margin: float = 0.0) -> bool:
        r = math.hypot(x[0], x[1])
        r_lo = self.r_min + margin if self.r_min > 0.0 else 0.0
        return (r_lo <= r <= self.r_max - margin) and (self.z_min + margin <= x[2] <= self.z_max - margin)

    def sample(self, rng: np.random.Generator, n: int, margin: float = 0.0) -> np.ndarray:
        r_lo = self.r_min + margin if self.r_min > 0.0 else 0.0
        r_hi = self.r_max - margin
        # area-uniform in r
        r = np.sqrt(r_lo ** 2 + (r_hi ** 2 - r_lo ** 2) * rng.random(n))
        phi = 2.0 * np.pi * rng.random(n)
        z = (self.z_min + margin) + (self.z_max - self.z_min - 2.0 * margin) * rng.random(n)
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])

    def describe(self) -> str:
        return f"cylinder r in [{self.r_min}, {self.r_max}], z in [{self.z_min}, {self.z_max}]"


# --- Models ------------------------------------------------------------------

class FieldModel(ABC):
    """A named analytic magnetic field with a parameter record and a validity domain."""

    name: str = ""
    PARAMETERS: Dict[str, Optional[float]] = {}

    def __init__(self, **params):
        unknown = sorted(set(params) - set(self.PARAMETERS))
        if unknown:
            raise ConfigError(f"unknown parameters for model '{self.name}': {', '.join(unknown)}")
        merged = dict(self.PARAMETERS)
        for key, value in params.items():
            if value is not None and not isinstance(value, (int, float)):
                raise ConfigError(f"parameter '{key}' of model '{self.name}' must be a number, got {value!r}")
            merged[key] = None if value is None else float(value)
        self.params: Dict[str, Optional[float]] = merged
        self._setup()
        self.domain = self._build_domain()

    def _setup(self) -> None:
        """Derive cached constants from self.params."""

    @abstractmethod
    def _build_domain(self):
        ...

    @abstractmethod
    def field(self, x) -> Vec3:
        """Closed-form B(x); no domain check (hot path of the integrators)."""

    @abstractmethod
    def jacobian(self, x) -> np.ndarray:
        """Closed-form DB(x) with entry (i, j) = dB_i/dx_j."""

    @property
    def has_pressure(self) -> bool:
        return False

    def pressure(self, x) -> float:
        raise UnsupportedModelError(f"model '{self.name}' carries no pressure function")

    def grad_pressure(self, x) -> Vec3:
        raise UnsupportedModelError(f"model '{self.name}' carries no pressure function")

    def contains(self, x, margin: float = 0.0) -> bool:
        return self.domain.contains(x, margin)

    def require_inside(self, x) -> None:
        if not np.all(np.isfinite(x)):
            raise FieldDomainError(self.name, x, "non-finite coordinate")
        if not self.domain.contains(x):
            raise FieldDomainError(self.name, x, self.domain.describe())

    def field_strength(self, x) -> float:
        B = self.field(x)
        return math.sqrt(B[0] * B[0] + B[1] * B[1] + B[2] * B[2])

    def describe(self) -> Dict[str, object]:
        return {"model": self.name, "params": dict(self.params)}

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in self.params.items() if v is not None)
        return f"{type(self).__name__}({args})"


class UniformField(FieldModel):
    """B = (0, 0, B0); optionally a constant pressure p0 (degenerate equilibrium)."""

    name = "uniform"
    PARAMETERS = {"B0": 1.0, "half_width": 10.0, "p0": None}

    def _build_domain(self):
        w = self.params["half_width"]
        return BoxDomain((-w, -w, -w), (w, w, w))

    def field(self, x) -> Vec3:
        return np.array([0.0, 0.0, self.params["B0"]])

    def jacobian(self, x) -> np.ndarray:
        return np.zeros((3, 3))

    @property
    def has_pressure(self) -> bool:
        return self.params["p0"] is not None

    def pressure(self, x) -> float:
        if not self.has_pressure:
            return super().pressure(x)
        return self.params["p0"]

    def grad_pressure(self, x) -> Vec3:
        if not self.has_pressure:
            return super().grad_pressure(x)
        return np.zeros(3)


class SlabGradBField(FieldModel):
    """B = (0, 0, B0 (1 + x/L)): straight field lines, grad|B| = (B0/L, 0, 0)."""

    name = "slab_gradB"
    PARAMETERS = {"B0": 1.0, "L": 1.0, "half_width": 20.0}

    def _build_domain(self):
        L, w = self.params["L"], self.params["half_width"]
        return BoxDomain((-0.5 * L, -w, -w), (2.0 * L, w, w))

    def field(self, x) -> Vec3:
        return np.array([0.0, 0.0, self.params["B0"] * (1.0 + x[0] / self.params["L"])])

    def jacobian(self, x) -> np.ndarray:
        J = np.zeros((3, 3))
        J[2, 0] = self.params["B0"] / self.params["L"]
        return J


class ToroidalField(FieldModel):
    """Vacuum toroidal field B = (B0 R0 / R) e_phi; curvature -e_R/R."""

    name = "toroidal"
    PARAMETERS = {"B0": 1.0, "R0": 1.0}

    def _setup(self) -> None:
        self._c = self.params["B0"] * self.params["R0"]

    def _build_domain(self):
        R0 = self.params["R0"]
        return CylinderDomain(0.5 * R0, 2.0 * R0, -2.0 * R0, 2.0 * R0)

    def field(self, x) -> Vec3:
        r2 = x[0] * x[0] + x[1] * x[1]
        return np.array([-self._c * x[1] / r2, self._c * x[0] / r2, 0.0])

    def jacobian(self, x) -> np.ndarray:
        px, py = x[0], x[1]
        r4 = (px * px + py * py) ** 2
        c = self._c
        off = c * (py * py - px * px) / r4
        return np.array([
            [2.0 * c * px * py / r4, off, 0.0],
            [off, -2.0 * c * px * py / r4, 0.0],
            [0.0, 0.0, 0.0],
        ])


class MirrorField(FieldModel):
    """
    Axisymmetric mirror B_z = B0 (1 + (z/L)^2), B_r = -r z B0 / L^2.

    The radial component is the divergence-free completion of B_z; the domain is a
    thin cylinder of radius 0.05 L around the axis.
    """

    name = "mirror"
    PARAMETERS = {"B0": 1.0, "L": 1.0, "z_max": 1.5}

    def _setup(self) -> None:
        self._k = self.params["B0"] / self.params["L"] ** 2

    def _build_domain(self):
        L = self.params["L"]
        zm = self.params["z_max"] * L
        return CylinderDomain(0.0, 0.05 * L, -zm, zm)

    def field(self, x) -> Vec3:
        k = self._k
        z = x[2]
        return np.array([-k * x[0] * z, -k * x[1] * z, self.params["B0"] + k * z * z])

    def jacobian(self, x) -> np.ndarray:
        k = self._k
        px, py, z = x[0], x[1], x[2]
        return np.array([
            [-k * z, 0.0, -k * px],
            [0.0, -k * z, -k * py],
            [0.0, 0.0, 2.0 * k * z],
        ])

    @property
    def max_axis_strength(self) -> float:
        """Largest on-axis |B| inside the domain (the mirror throat)."""
        zm = self.params["z_max"] * self.params["L"]
        return self.params["B0"] + self._k * zm * zm

    def is_trapped(self, x0, v0) -> bool:
        """Loss-cone test: the particle reflects before reaching the domain ends."""
        x0 = np.asarray(x0, dtype=float)
        v0 = np.asarray(v0, dtype=float)
        B = self.field(x0)
        B_mag = float(np.linalg.norm(B))
        h0 = float(np.dot(B, v0)) / B_mag
        mu0 = (float(np.dot(v0, v0)) - h0 * h0) / (2.0 * B_mag)
        return h0 * h0 < 2.0 * mu0 * (self.max_axis_strength - B_mag)


class ScrewPinchField(FieldModel):
    """
    Screw pinch B = B_theta(r) e_theta + B_z e_z with B_theta = Bp r / a, B_z = B0.

    The pressure p = (Bp/a)^2 r^2 + p0 balances B x curl B = grad p exactly, and
    both p and |B| depend on r only.
    """

    name = "screw_pinch"
    PARAMETERS = {"B0": 1.0, "a": 1.0, "Bp": 0.3, "p0": 0.1, "z_max": 10.0}

    def _setup(self) -> None:
        self._beta = self.params["Bp"] / self.params["a"]

    def _build_domain(self):
        a = self.params["a"]
        zm = self.params["z_max"] * a
        return CylinderDomain(0.0, a, -zm, zm)

    def field(self, x) -> Vec3:
        beta = self._beta
        return np.array([-beta * x[1], beta * x[0], self.params["B0"]])

    def jacobian(self, x) -> np.ndarray:
        beta = self._beta
        return np.array([[0.0, -beta, 0.0], [beta, 0.0, 0.0], [0.0, 0.0, 0.0]])

    @property
    def has_pressure(self) -> bool:
        return True

    def pressure(self, x) -> float:
        return self._beta ** 2 * (x[0] * x[0] + x[1] * x[1]) + self.params["p0"]

    def grad_pressure(self, x) -> Vec3:
        c = 2.0 * self._beta ** 2
        return np.array([c * x[0], c * x[1], 0.0])


class SolovevField(FieldModel):
    """
    Solov'ev equilibrium from psi(R, Z) = c1 [R^2 Z^2 + (E/4)(R^2 - R0^2)^2].

    B = grad psi x grad phi + F grad phi with F = B0 R0, so that
    B_R = -2 c1 R Z, B_Z = c1 [2 Z^2 + E (R^2 - R0^2)], B_phi = F / R.
    With Delta* psi = A R^2, A = 2 c1 (1 + E), the pressure p = A psi + p0
    satisfies B x curl B = grad p. Flux surfaces are nested around (R0, 0).
    """

    name = "solovev"
    PARAMETERS = {"B0": 1.0, "R0": 1.0, "c1": 0.3, "E": 1.0, "p0": 0.05}

    def _setup(self) -> None:
        self._F = self.params["B0"] * self.params["R0"]
        self._A = 2.0 * self.params["c1"] * (1.0 + self.params["E"])

    def _build_domain(self):
        R0 = self.params["R0"]
        return CylinderDomain(0.5 * R0, 1.5 * R0, -0.5 * R0, 0.5 * R0)

    def flux(self, x) -> float:
        c1, E, R0 = self.params["c1"], self.params["E"], self.params["R0"]
        r2 = x[0] * x[0] + x[1] * x[1]
        return c1 * (r2 * x[2] * x[2] + 0.25 * E * (r2 - R0 * R0) ** 2)

    def field(self, x) -> Vec3:
        c1, E, R0 = self.params["c1"], self.params["E"], self.params["R0"]
        px, py, z = x[0], x[1], x[2]
        r2 = px * px + py * py
        F = self._F
        return np.array([
            -2.0 * c1 * z * px - F * py / r2,
            -2.0 * c1 * z * py + F * px / r2,
            c1 * (2.0 * z * z + E * (r2 - R0 * R0)),
        ])

    def jacobian(self, x) -> np.ndarray:
        c1, E = self.params["c1"], self.params["E"]
        px, py, z = x[0], x[1], x[2]
        r2 = px * px + py * py
        r4 = r2 * r2
        F = self._F
        off = F * (py * py - px * px) / r4
        cross = 2.0 * F * px * py / r4
        return np.array([
            [-2.0 * c1 * z + cross, off, -2.0 * c1 * px],
            [off, -2.0 * c1 * z - cross, -2.0 * c1 * py],
            [2.0 * c1 * E * px, 2.0 * c1 * E * py, 4.0 * c1 * z],
        ])

    @property
    def has_pressure(self) -> bool:
        return True

    def pressure(self, x) -> float:
        return self._A * self.flux(x) + self.params["p0"]

    def grad_pressure(self, x) -> Vec3:
        c1, E, R0 = self.params["c1"], self.params["E"], self.params["R0"]
        px, py, z = x[0], x[1], x[2]
        r2 = px * px + py * py
        # grad psi = (psi_R / R)(x, y) + psi_Z e_z, and psi_R / R equals B_z
        bz = c1 * (2.0 * z * z + E * (r2 - R0 * R0))
        return self._A * np.array([bz * px, bz * py, 2.0 * c1 * r2 * z])


MODEL_REGISTRY: Dict[str, Type[FieldModel]] = {
    cls.name: cls
    for cls in (UniformField, SlabGradBField, ToroidalField, MirrorField, ScrewPinchField, SolovevField)
}
MODEL_NAMES = tuple(MODEL_REGISTRY)


def build_model(name: str, params: Optional[Dict[str, Optional[float]]] = None) -> FieldModel:
    """Construct a built-in model from its name and a flat parameter table."""
    try:
        cls = MODEL_REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown model '{name}'; expected one of: {', '.join(MODEL_NAMES)}") from None
    model = cls(**(params or {}))
    logger.debug(f"Built field model {model!r}")
    return model


# --- Geometry ----------------------------------------------------------------

def curl_from_jacobian(J: np.ndarray) -> Vec3:
    return np.array([J[2, 1] - J[1, 2], J[0, 2] - J[2, 0], J[1, 0] - J[0, 1]])


def unit_field_jacobian(b: Vec3, B_mag: float, J: np.ndarray) -> np.ndarray:
    """D(B/|B|) = (I - b b^T) DB / |B|."""
    return (J - np.outer(b, b @ J)) / B_mag


def derive_geometry(B: Vec3, J: np.ndarray) -> Geometry:
    """Unit field, |B|, grad|B|, curl B, curl b and curvature from B and DB."""
    B = np.asarray(B, dtype=float)
    J = np.asarray(J, dtype=float)
    B_mag = float(np.linalg.norm(B))
    if not B_mag > SINGULAR_FIELD_TOL:
        raise SingularFieldError(f"|B| = {B_mag:.3g} is below {SINGULAR_FIELD_TOL:g}")
    b = B / B_mag
    grad_B_mag = J.T @ b
    curl_B = curl_from_jacobian(J)
    # curl(B/|B|) = curl B / |B| + grad(1/|B|) x B
    curl_b = (curl_B - np.cross(grad_B_mag, b)) / B_mag
    kappa = unit_field_jacobian(b, B_mag, J) @ b
    return Geometry(b, B_mag, grad_B_mag, curl_B, curl_b, kappa)


def fd_jacobian(model: FieldModel, x, step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Central-difference approximation of DB at x (verification oracle)."""
    if not step > 0.0:
        raise ValueError(f"finite-difference step must be positive, got {step}")
    x = np.asarray(x, dtype=float)
    J = np.empty((3, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = step
        xp, xm = x + e, x - e
        for neighbour in (xp, xm):
            if not model.contains(neighbour):
                raise FieldDomainError(model.name, neighbour, f"finite-difference stencil leaves {model.domain.describe()}")
        J[:, j] = (model.field(xp) - model.field(xm)) / (2.0 * step)
    return J


def eval_field(model: FieldModel, x, fd_step: Optional[float] = None) -> FieldSample:
    """Evaluate B and its derived geometry at an in-domain point.

    With fd_step set, the Jacobian comes from central differences instead of the
    closed form.
    """
    x = np.asarray(x, dtype=float)
    model.require_inside(x)
    B = model.field(x)
    J = model.jacobian(x) if fd_step is None else fd_jacobian(model, x, fd_step)
    try:
        geo = derive_geometry(B, J)
    except SingularFieldError as e:
        raise SingularFieldError(f"model '{model.name}' at {x.tolist()}: {e}") from None
    pressure = grad_pressure = None
    if model.has_pressure:
        pressure = float(model.pressure(x))
        grad_pressure = np.asarray(model.grad_pressure(x), dtype=float)
    return FieldSample(
        x=x, B=B, B_mag=geo.B_mag, b=geo.b, J=J,
        grad_B_mag=geo.grad_B_mag, curl_B=geo.curl_B, curl_b=geo.curl_b, kappa=geo.kappa,
        pressure=pressure, grad_pressure=grad_pressure,
    )


# --- Self-verification -------------------------------------------------------

def sample_points(model: FieldModel, n: int, seed: int = DEFAULT_SEED, margin: float = 0.0) -> np.ndarray:
    """Seeded uniform points inside the model domain, shrunk inward by margin."""
    if n < 1:
        raise ValueError(f"n_samples must be at least 1, got {n}")
    rng = np.random.default_rng(seed)
    return model.domain.sample(rng, n, margin)


def _stats(model: FieldModel, check: str, residuals, seed: int) -> ResidualStats:
    residuals = np.asarray(residuals, dtype=float)
    stats = ResidualStats(model.name, check, float(residuals.max()), float(residuals.mean()), int(residuals.size), seed)
    logger.info(f"{check} on {model.name}: max={stats.max:.3e} mean={stats.mean:.3e} (n={stats.n})")
    return stats


def check_divergence(model: FieldModel, n_samples: int = 1000, seed: int = DEFAULT_SEED) -> ResidualStats:
    """Max and mean of |trace DB| at seeded points."""
    points = sample_points(model, n_samples, seed)
    residuals = [abs(float(np.trace(model.jacobian(x)))) for x in points]
    return _stats(model, "divergence", residuals, seed)


def check_equilibrium(model: FieldModel, n_samples: int = 1000, seed: int = DEFAULT_SEED) -> ResidualStats:
    """Relative force-balance residual |B x curl B - grad p| / max(|grad p|, 1)."""
    if not model.has_pressure:
        raise UnsupportedModelError(f"model '{model.name}' carries no pressure; force balance is undefined")
    points = sample_points(model, n_samples, seed)
    residuals = []
    for x in points:
        B = model.field(x)
        grad_p = model.grad_pressure(x)
        lorentz = np.cross(B, curl_from_jacobian(model.jacobian(x)))
        residuals.append(float(np.linalg.norm(lorentz - grad_p)) / max(float(np.linalg.norm(grad_p)), 1.0))
    return _stats(model, "equilibrium", residuals, seed)


def check_jacobian(model: FieldModel, n_samples: int = 1000, seed: int = DEFAULT_SEED,
                   step: float = DEFAULT_FD_STEP) -> ResidualStats:
    """Relative max-entry difference between analytic and finite-difference Jacobians."""
    points = sample_points(model, n_samples, seed, margin=2.0 * step)
    residuals = []
    for x in points:
        J = model.jacobian(x)
        J_fd = fd_jacobian(model, x, step)
        residuals.append(float(np.max(np.abs(J - J_fd))) / max(float(np.max(np.abs(J))), 1.0))
    return _stats(model, "jacobian", residuals, seed)


def mirror_ratio_trapped(model: MirrorField, x0, v0) -> bool:
    """True when (x0, v0) lies outside the loss cone of a mirror model."""
    if not isinstance(model, MirrorField):
        raise UnsupportedModelError(f"loss-cone test needs a mirror model, got '{model.name}'")
    return model.is_trapped(x0, v0)
