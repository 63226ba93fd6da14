"""
Vector-calculus identities for GyroLab

Executable residuals of the unit-field identities behind the guiding-centre
expansion. Each residual is evaluated on a FieldSample and should vanish up to
rounding (analytic Jacobians) or finite-difference truncation.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from .field_models import (
    DEFAULT_FD_STEP,
    DEFAULT_SEED,
    FieldModel,
    FieldSample,
    Vec3,
    eval_field,
    sample_points,
)

logger = logging.getLogger("gyrolab.identities")


def lemma_residual(sample: FieldSample, v: Vec3) -> float:
    """|(Db (v x b)) x (v x b) - [(b.v)(v.curl b) - |v|^2 (b.curl b) - (Db v).(v x b)] b|."""
    v = np.asarray(v, dtype=float)
    b = sample.b
    Db = sample.Jb
    w = np.cross(v, b)

    lhs = np.cross(Db @ w, w)

    curl_b = sample.curl_b
    coefficient = (
        np.dot(b, v) * np.dot(v, curl_b)
        - np.dot(v, v) * np.dot(b, curl_b)
        - np.dot(Db @ v, w)
    )
    rhs = coefficient * b
    return float(np.linalg.norm(lhs - rhs))


def gradB2_residual(sample: FieldSample) -> float:
    """|grad(|B|^2/2) - (B.grad)B - B x curl B| with grad(|B|^2/2) = J^T B."""
    B, J = sample.B, sample.J
    return float(np.linalg.norm(J.T @ B - J @ B - np.cross(B, sample.curl_B)))


def unit_field_residual(sample: FieldSample) -> float:
    """|kappa + b x curl b|."""
    return float(np.linalg.norm(sample.kappa + np.cross(sample.b, sample.curl_b)))


IDENTITIES: Dict[str, Callable] = {
    "lemma": lemma_residual,
    "gradB2": gradB2_residual,
    "unit_field": unit_field_residual,
}


@dataclass(frozen=True)
class IdentityStats:
    identity: str
    model: str
    max_residual: float
    mean_residual: float
    n: int

    def as_row(self) -> Dict[str, object]:
        return {"identity": self.identity, "model": self.model, "max_residual": self.max_residual,
                "mean_residual": self.mean_residual, "n": self.n}


def sample_unit_ball(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform velocities in the closed unit ball."""
    directions = rng.standard_normal((n, 3))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    radii = rng.random(n) ** (1.0 / 3.0)
    return directions * radii[:, None]


def check_identities(model: FieldModel, n_samples: int = 1000, seed: int = DEFAULT_SEED,
                     fd_step: Optional[float] = None) -> List[IdentityStats]:
    """Evaluate all three identities at seeded (x, v) pairs on one model."""
    if n_samples < 1:
        raise ValueError(f"n_samples must be at least 1, got {n_samples}")
    margin = 0.0 if fd_step is None else 2.0 * fd_step
    points = sample_points(model, n_samples, seed, margin=margin)
    # velocities come from their own stream so positions match check_divergence
    velocities = sample_unit_ball(np.random.default_rng([seed, 1]), n_samples)

    residuals: Dict[str, List[float]] = {name: [] for name in IDENTITIES}
    for x, v in zip(points, velocities):
        sample = eval_field(model, x, fd_step=fd_step)
        residuals["lemma"].append(lemma_residual(sample, v))
        residuals["gradB2"].append(gradB2_residual(sample))
        residuals["unit_field"].append(unit_field_residual(sample))

    results = []
    for name, values in residuals.items():
        arr = np.asarray(values)
        results.append(IdentityStats(name, model.name, float(arr.max()), float(arr.mean()), n_samples))
    jacobian = "finite-difference" if fd_step is not None else "analytic"
    logger.info(
        f"Identities on {model.name} ({jacobian} Jacobian, n={n_samples}): "
        + ", ".join(f"{r.identity}={r.max_residual:.2e}" for r in results)
    )
    return results


__all__ = [
    "DEFAULT_FD_STEP",
    "IDENTITIES",
    "IdentityStats",
    "check_identities",
    "gradB2_residual",
    "lemma_residual",
    "sample_unit_ball",
    "unit_field_residual",
]
