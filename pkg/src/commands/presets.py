"""
Preset Commands for GyroLab

`mirror-bounce` follows a trapped particle through the mirror well and compares
bounce points and moment conservation with the guiding centre.
`pressure-drift` tracks the pressure along full orbits in an equilibrium field
against its boundary-plus-secular expansion.
"""

import logging

import numpy as np

from ..convergence import SweepSettings, bounce_comparison, default_initial_data, map_cells, mirror_bounce_period, pressure_cell
from ..errors import ConfigError
from ..field_models import build_model, mirror_ratio_trapped
from ..manifest import write_csv
from .utils import CommandContext, Plugin, raise_failures, require, resolve_vec

logger = logging.getLogger("gyrolab.commands.presets")

plugin = Plugin("presets")

MAX_BOUNCE_OFFSET = 2.0  # gyroperiods
MAX_MOMENT_DEVIATION = 0.05
HALVING_RATIO = (0.3, 0.7)
BOUNDED_RATIO = (0.8, 1.2)
SECULAR_FLOOR = 1e-12
EXACT_FLOOR = 1e-12


def _settings(cfg) -> SweepSettings:
    return SweepSettings(steps_per_gyro=cfg["steps_per_gyro"], scheme=cfg["scheme"],
                         grid_points=cfg["grid_points"], gc_steps=cfg["gc_steps"])


@plugin.command("mirror-bounce", "Bounce points and moment conservation in the mirror; writes bounce.csv",
                flags=("omegas", "workers"))
def mirror_bounce(ctx: CommandContext) -> int:
    cfg = ctx.config
    model = ctx.model("mirror")
    x0 = np.asarray(cfg["x0"], dtype=float)
    v0 = np.asarray(cfg["v0"], dtype=float)
    if not mirror_ratio_trapped(model, x0, v0):
        raise ValueError(f"initial velocity {v0.tolist()} lies in the loss cone; the particle is not reflected")
    T = cfg["bounces"] * mirror_bounce_period(model, x0, v0)
    settings = _settings(cfg)
    logger.info(f"Mirror bounce over T={T:.6g} at omegas {cfg['omegas']}")

    calls = [(model, x0, v0, omega, T, settings) for omega in cfg["omegas"]]
    comparisons = map_cells(bounce_comparison, calls, cfg["workers"])

    rows, failures = [], []
    deviations = []
    for omega, cmp in zip(cfg["omegas"], comparisons):
        relative = cmp.max_moment_deviation / cmp.mu0
        deviations.append(relative)
        rows.append({
            "omega": omega,
            "orbit_bounce_time": cmp.orbit_crossings[0] if cmp.orbit_crossings.size else float("nan"),
            "gc_bounce_time": cmp.gc_crossings[0] if cmp.gc_crossings.size else float("nan"),
            "offset_gyroperiods": cmp.offset_in_gyroperiods,
            "max_moment_deviation_rel": relative,
        })
        logger.info(f"  omega={omega:g}: {cmp.orbit_crossings.size} orbit / {cmp.gc_crossings.size} GC crossings, "
                    f"offset {cmp.offset_in_gyroperiods:.3f} gyroperiods, moment deviation {relative:.3e}")
    write_csv(ctx.output_path("bounce.csv"),
              ["omega", "orbit_bounce_time", "gc_bounce_time", "offset_gyroperiods", "max_moment_deviation_rel"], rows)

    first = comparisons[0]
    require(first.gc_crossings.size > 0, f"guiding centre reaches a bounce point at omega={cfg['omegas'][0]:g}", failures)
    require(first.offset_in_gyroperiods < MAX_BOUNCE_OFFSET,
            f"bounce times agree within {MAX_BOUNCE_OFFSET:g} gyroperiods at omega={cfg['omegas'][0]:g}", failures)
    require(deviations[0] < MAX_MOMENT_DEVIATION,
            f"moment deviation {deviations[0]:.3e} < {MAX_MOMENT_DEVIATION:g} at omega={cfg['omegas'][0]:g}", failures)
    lo, hi = HALVING_RATIO
    for (w1, d1), (w2, d2) in zip(zip(cfg["omegas"], deviations), zip(cfg["omegas"][1:], deviations[1:])):
        if np.isclose(w2 / w1, 2.0):
            ratio = d2 / d1
            require(lo <= ratio <= hi, f"moment deviation ratio {ratio:.3f} in [{lo}, {hi}] from {w1:g} to {w2:g}",
                    failures)

    ctx.results.update({"T": T, "moment_deviation": deviations,
                        "offset_gyroperiods": [c.offset_in_gyroperiods for c in comparisons]})
    raise_failures(failures)
    return 0


@plugin.command("pressure-drift", "Pressure along full orbits against its expansion; writes pressure.csv",
                flags=("model", "omegas", "T", "workers"))
def pressure_drift(ctx: CommandContext) -> int:
    cfg = ctx.config
    params = dict(cfg.get("params", {}))
    if cfg["model"] == "uniform":
        params.setdefault("p0", 1.0)
    model = build_model(cfg["model"], params)
    if not model.has_pressure:
        raise ConfigError(f"model '{model.name}' carries no pressure function; pressure-drift needs an equilibrium")
    x0_default, v0_default, _ = default_initial_data(model)
    x0 = resolve_vec(cfg["x0"], x0_default)
    v0 = resolve_vec(cfg["v0"], v0_default)
    T = cfg["T"]
    omegas = cfg["omegas"]

    calls = [(model, x0, v0, omega, T, _settings(cfg)) for omega in omegas]
    deviations = map_cells(pressure_cell, calls, cfg["workers"])

    rows = []
    lhs_max, rem_max, sec_max = [], [], []
    for omega, dev in zip(omegas, deviations):
        lhs_max.append(float(np.max(np.abs(dev.lhs))))
        rem_max.append(float(np.max(np.abs(dev.remainder))))
        sec_max.append(float(np.max(np.abs(dev.secular))))
        rows.append({
            "omega": omega,
            "max_abs_lhs": lhs_max[-1],
            "max_abs_remainder": rem_max[-1],
            "omega_times_lhs": omega * lhs_max[-1],
            "omega_times_remainder": omega * rem_max[-1],
            "max_abs_secular": sec_max[-1],
        })
        logger.info(f"  omega={omega:g}: max|lhs|={lhs_max[-1]:.3e}, max|lhs-rhs|={rem_max[-1]:.3e}")
    write_csv(ctx.output_path("pressure.csv"),
              ["omega", "max_abs_lhs", "max_abs_remainder", "omega_times_lhs", "omega_times_remainder",
               "max_abs_secular"], rows)

    failures = []
    if model.name == "solovev":
        scaled = [w * r for w, r in zip(omegas, rem_max)]
        require(all(b < a for a, b in zip(scaled[:-1], scaled[1:])),
                f"omega*max|lhs-rhs| strictly decreasing: {scaled}", failures)
    elif model.name == "screw_pinch":
        require(max(sec_max) < SECULAR_FLOOR, f"secular term vanishes (max {max(sec_max):.2e})", failures)
        scaled = [w * l for w, l in zip(omegas, lhs_max)]
        lo, hi = BOUNDED_RATIO
        for a, b in zip(scaled[:-1], scaled[1:]):
            require(lo <= b / a <= hi, f"omega*max|lhs| ratio {b / a:.3f} in [{lo}, {hi}]", failures)
    elif model.name == "uniform":
        require(max(lhs_max) < EXACT_FLOOR, f"pressure constant along the orbit (max {max(lhs_max):.2e})", failures)

    ctx.results.update({"x0": x0.tolist(), "v0": v0.tolist(), "T": T, "max_abs_lhs": lhs_max,
                        "max_abs_remainder": rem_max, "max_abs_secular": sec_max})
    raise_failures(failures)
    return 0


def load(lab) -> None:
    lab.add_plugin(plugin)
