"""
Tests for the vector-calculus identity residuals.
"""

from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.field_models import eval_field
from src.identities import (
    IDENTITIES,
    check_identities,
    gradB2_residual,
    lemma_residual,
    sample_unit_ball,
    unit_field_residual,
)


def test_identities_hold_with_analytic_jacobians(any_model):
    results = check_identities(any_model, n_samples=200, seed=5)
    assert [r.identity for r in results] == list(IDENTITIES)
    for stats in results:
        assert stats.max_residual < 1e-8, stats
        assert stats.mean_residual <= stats.max_residual
        assert stats.n == 200


def test_identities_hold_with_finite_difference_jacobians(any_model):
    for stats in check_identities(any_model, n_samples=50, seed=5, fd_step=1e-5):
        assert stats.max_residual < 1e-5, stats


def test_single_sample_residuals(solovev):
    sample = eval_field(solovev, [1.2, 0.1, 0.15])
    v = np.array([0.3, -0.5, 0.7])
    assert lemma_residual(sample, v) < 1e-12
    assert gradB2_residual(sample) < 1e-12
    assert unit_field_residual(sample) < 1e-12


def test_lemma_with_velocity_along_the_field(toroidal):
    sample = eval_field(toroidal, [1.3, 0.4, 0.2])
    # v x b vanishes, both sides are zero
    assert lemma_residual(sample, 2.0 * sample.b) < 1e-14


def test_unit_field_residual_detects_a_wrong_curvature(toroidal):
    sample = eval_field(toroidal, [1.0, 0.0, 0.0])
    broken = replace(sample, kappa=sample.kappa + np.array([0.0, 0.0, 0.1]))
    assert unit_field_residual(broken) > 0.05


def test_check_identities_is_deterministic(mirror):
    first = [s.as_row() for s in check_identities(mirror, n_samples=20, seed=9)]
    second = [s.as_row() for s in check_identities(mirror, n_samples=20, seed=9)]
    assert first == second


def test_check_identities_rejects_empty_sample(uniform):
    with pytest.raises(ValueError):
        check_identities(uniform, n_samples=0)


def test_unit_ball_sampling():
    v = sample_unit_ball(np.random.default_rng(0), 500)
    norms = np.linalg.norm(v, axis=1)
    assert v.shape == (500, 3)
    assert np.all(norms <= 1.0 + 1e-15)
    assert_allclose(np.mean(v, axis=0), 0.0, atol=0.1)
