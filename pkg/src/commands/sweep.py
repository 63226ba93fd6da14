"""
Sweep Command for GyroLab

Runs one convergence metric over an omega sweep, writes sweep.csv plus a JSON
summary and fails (exit 1) when the metric's monotonicity check does not hold.
"""

import json
import logging

from ..convergence import SweepSettings, default_initial_data, omega_sweep
from ..manifest import write_csv, write_json
from .utils import CommandContext, Plugin, raise_failures, require, resolve_float, resolve_vec

logger = logging.getLogger("gyrolab.commands.sweep")

plugin = Plugin("sweep")


@plugin.command("sweep", "Omega sweep of a convergence metric; writes sweep.csv and summary.json",
                flags=("model", "metric", "omegas", "T", "workers"))
def sweep(ctx: CommandContext) -> int:
    cfg = ctx.config
    model = ctx.model()
    x0_default, v0_default, T_default = default_initial_data(model)
    x0 = resolve_vec(cfg["x0"], x0_default)
    v0 = resolve_vec(cfg["v0"], v0_default)
    T = resolve_float(cfg["T"], T_default)
    settings = SweepSettings(
        steps_per_gyro=cfg["steps_per_gyro"],
        scheme=cfg["scheme"],
        grid_points=cfg["grid_points"],
        gc_steps=cfg["gc_steps"],
        init_mode=cfg["init_mode"],
    )

    result = omega_sweep(model, x0, v0, cfg["omegas"], T, cfg["metric"], settings, workers=cfg["workers"])
    write_csv(ctx.output_path("sweep.csv"), ["omega", "error", "omega_times_error"], result.rows())
    summary = result.summary()
    write_json(ctx.output_path("summary.json"), summary)
    print(json.dumps(summary, sort_keys=True))

    ctx.results.update({
        **summary,
        "x0": x0.tolist(), "v0": v0.tolist(), "T": T,
        "errors": result.errors, "ratios": result.ratios, "flagged": list(result.flagged),
    })
    failures = []
    require(result.monotone, f"{cfg['metric']} on {model.name} decreases across the sweep", failures)
    raise_failures(failures)
    return 0


def load(lab) -> None:
    lab.add_plugin(plugin)
