"""
Orbit Commands for GyroLab

`simulate` integrates one full orbit; `gc` integrates the guiding-centre system
from the same particle initial data.
"""

import logging

from ..guiding_center import gc_init, integrate_gc
from ..manifest import write_columns
from ..orbit import integrate_orbit, speed_drift
from .utils import CommandContext, Plugin, optional_float

logger = logging.getLogger("gyrolab.commands.simulate")

plugin = Plugin("simulate")


@plugin.command("simulate", "Integrate a full orbit and write trajectory.csv", flags=("model", "T"))
def simulate(ctx: CommandContext) -> int:
    """Full orbit -> t,x,y,z,vx,vy,vz."""
    cfg = ctx.config
    model = ctx.model()
    traj = integrate_orbit(
        model, cfg["x0"], cfg["v0"], cfg["omega"], cfg["T"],
        steps_per_gyro=cfg["steps_per_gyro"], scheme=cfg["scheme"], dt_out=optional_float(cfg["dt_out"]),
    )
    write_columns(ctx.output_path("trajectory.csv"), {
        "t": traj.times,
        "x": traj.positions[:, 0], "y": traj.positions[:, 1], "z": traj.positions[:, 2],
        "vx": traj.velocities[:, 0], "vy": traj.velocities[:, 1], "vz": traj.velocities[:, 2],
    })
    ctx.results.update({"steps": traj.n_steps, "samples": len(traj), "speed_drift": speed_drift(traj),
                        "degenerate": traj.degenerate})
    return 0


@plugin.command("gc", "Integrate the guiding-centre system and write gc_trajectory.csv", flags=("model", "T"))
def guiding_center(ctx: CommandContext) -> int:
    """Guiding centre -> t,Rx,Ry,Rz,h,mu0."""
    cfg = ctx.config
    model = ctx.model()
    init, params = gc_init(model, cfg["x0"], cfg["v0"], cfg["omega"], mode=cfg["init_mode"], order=cfg["order"])
    gc = integrate_gc(model, init, params, cfg["T"], dt=optional_float(cfg["dt"]), dt_out=optional_float(cfg["dt_out"]))
    write_columns(ctx.output_path("gc_trajectory.csv"), {
        "t": gc.times,
        "Rx": gc.positions[:, 0], "Ry": gc.positions[:, 1], "Rz": gc.positions[:, 2],
        "h": gc.h,
        "mu0": [params.mu0] * len(gc),
    })
    ctx.results.update({"mu0": params.mu0, "samples": len(gc)})
    return 0


def load(lab) -> None:
    lab.add_plugin(plugin)
