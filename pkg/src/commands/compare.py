"""
Compare Command for GyroLab

Runs a full orbit and the guiding-centre system from one configuration and
writes their pointwise comparison.
"""

import logging

import numpy as np

from ..diagnostics import gyrophase, guiding_center_series, moment_series, pressure_deviation
from ..errors import DegeneratePitchError
from ..guiding_center import gc_init, integrate_gc
from ..manifest import write_columns
from ..orbit import integrate_orbit, speed_drift
from .utils import CommandContext, Plugin, optional_float

logger = logging.getLogger("gyrolab.commands.compare")

plugin = Plugin("compare")


@plugin.command("compare", "Full orbit against the guiding-centre system; writes compare.csv", flags=("model", "T"))
def compare(ctx: CommandContext) -> int:
    """t,err_pos,mu_inst,phase_rate,pressure_lhs,pressure_rhs on the orbit output grid."""
    cfg = ctx.config
    model = ctx.model()
    omega, T = cfg["omega"], cfg["T"]
    traj = integrate_orbit(model, cfg["x0"], cfg["v0"], omega, T, steps_per_gyro=cfg["steps_per_gyro"],
                           scheme=cfg["scheme"], dt_out=optional_float(cfg["dt_out"]))
    dt_out = traj.metadata["dt_out"]
    dt = optional_float(cfg["dt"])

    init, params = gc_init(model, cfg["x0"], cfg["v0"], omega, mode=cfg["init_mode"], order=cfg["order"])
    gc = integrate_gc(model, init, params, T, dt=dt, dt_out=dt_out)
    err_pos = np.linalg.norm(guiding_center_series(traj, model) - gc.position_at(traj.times), axis=1)
    mu_inst = moment_series(traj, model, params.v0_mag)

    nan = np.full(len(traj), np.nan)
    try:
        phase_rate = gyrophase(traj, model).rate
    except DegeneratePitchError as e:
        logger.warning(f"Gyrophase undefined, phase_rate column left empty: {e}")
        phase_rate = nan

    pressure_lhs = pressure_rhs = nan
    if model.has_pressure:
        zero_init, zero_params = gc_init(model, cfg["x0"], cfg["v0"], omega, mode="naive", order=0)
        zeroth = integrate_gc(model, zero_init, zero_params, T, dt=dt, dt_out=dt_out)
        deviation = pressure_deviation(traj, model, zeroth)
        pressure_lhs, pressure_rhs = deviation.lhs, deviation.rhs

    write_columns(ctx.output_path("compare.csv"), {
        "t": traj.times,
        "err_pos": err_pos,
        "mu_inst": mu_inst,
        "phase_rate": phase_rate,
        "pressure_lhs": pressure_lhs,
        "pressure_rhs": pressure_rhs,
    })
    ctx.results.update({
        "max_err_pos": float(err_pos.max()),
        "max_moment_deviation": float(np.max(np.abs(mu_inst - params.mu0))),
        "speed_drift": speed_drift(traj),
        "mu0": params.mu0,
    })
    return 0


def load(lab) -> None:
    lab.add_plugin(plugin)
