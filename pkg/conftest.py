"""
Shared fixtures for the GyroLab test suite.
"""

import json
import math

import numpy as np
import pytest

from src.field_models import MODEL_NAMES, build_model


@pytest.fixture
def uniform():
    return build_model("uniform")


@pytest.fixture
def slab():
    return build_model("slab_gradB")


@pytest.fixture
def toroidal():
    return build_model("toroidal")


@pytest.fixture
def mirror():
    return build_model("mirror")


@pytest.fixture
def screw_pinch():
    return build_model("screw_pinch")


@pytest.fixture
def solovev():
    return build_model("solovev")


@pytest.fixture(params=MODEL_NAMES)
def any_model(request):
    return build_model(request.param)


@pytest.fixture
def helix():
    """Analytic uniform-field orbit for x0 = 0, v0 = (1, 0, 1), B = e_z."""
    def position(t, omega):
        phi = omega * np.asarray(t)
        return np.stack([np.sin(phi) / omega, (np.cos(phi) - 1.0) / omega, np.asarray(t, dtype=float)], axis=-1)
    return position


@pytest.fixture
def period():
    def gyroperiod(omega, B_mag=1.0):
        return 2.0 * math.pi / (omega * B_mag)
    return gyroperiod


@pytest.fixture
def run_cli(tmp_path):
    """Run the command line in-process; returns (exit code, output directory)."""
    from lab import run

    def invoke(*args, out="out"):
        out_dir = tmp_path / out
        code = run([*args, "--out", str(out_dir)])
        return code, out_dir
    return invoke


@pytest.fixture
def read_manifest():
    def read(out_dir):
        return json.loads((out_dir / "manifest.json").read_text())
    return read
