"""
Verification Commands for GyroLab

`verify-field` checks divergence, Jacobians and force balance of the field
models; `verify-identities` evaluates the vector-calculus identities on them.
"""

import logging
from typing import List

from ..field_models import MODEL_NAMES, FieldModel, build_model, check_divergence, check_equilibrium, check_jacobian
from ..identities import check_identities
from ..manifest import write_csv
from .utils import CommandContext, Plugin, raise_failures, require

logger = logging.getLogger("gyrolab.commands.verify")

plugin = Plugin("verify")

DIVERGENCE_TOL = 1e-8
JACOBIAN_TOL = 1e-6
EQUILIBRIUM_TOL = 1e-6
IDENTITY_TOL = 1e-8
IDENTITY_FD_TOL = 1e-5


def _models(ctx: CommandContext) -> List[FieldModel]:
    name = ctx.config["model"]
    if name == "all":
        models = [build_model(n) for n in MODEL_NAMES]
        # the uniform model joins the equilibrium checks with a constant pressure
        models.append(build_model("uniform", {"p0": 1.0}))
        return models
    return [build_model(name, ctx.config.get("params", {}))]


@plugin.command("verify-field", "Field-model residuals; writes verify_field.csv", flags=("model", "n", "seed"))
def verify_field(ctx: CommandContext) -> int:
    """Rows model,check,max,mean,n,seed."""
    cfg = ctx.config
    n, seed = cfg["n"], cfg["seed"]
    ctx.seeds["sampling"] = seed
    rows, failures = [], []
    for model in _models(ctx):
        div = check_divergence(model, n, seed)
        jac = check_jacobian(model, n, seed, cfg["fd_step"])
        rows += [div.as_row(), jac.as_row()]
        require(div.max < DIVERGENCE_TOL, f"{model.name}: divergence {div.max:.2e} < {DIVERGENCE_TOL:g}", failures)
        require(jac.max < JACOBIAN_TOL, f"{model.name}: jacobian {jac.max:.2e} < {JACOBIAN_TOL:g}", failures)
        if model.has_pressure:
            eq = check_equilibrium(model, n, seed)
            rows.append(eq.as_row())
            require(eq.max < EQUILIBRIUM_TOL, f"{model.name}: force balance {eq.max:.2e} < {EQUILIBRIUM_TOL:g}", failures)
    write_csv(ctx.output_path("verify_field.csv"), ["model", "check", "max", "mean", "n", "seed"], rows)
    ctx.results["checks"] = len(rows)
    raise_failures(failures)
    return 0


@plugin.command("verify-identities", "Vector-calculus identity residuals; writes identities.csv",
                flags=("model", "n", "seed", "fd"))
def verify_identities(ctx: CommandContext) -> int:
    """Rows identity,model,max_residual,mean_residual,n."""
    cfg = ctx.config
    fd_step = cfg["fd_step"] if cfg["fd"] else None
    tol = IDENTITY_FD_TOL if cfg["fd"] else IDENTITY_TOL
    ctx.seeds["sampling"] = cfg["seed"]
    rows, failures = [], []
    models = [m for m in _models(ctx) if not (m.name == "uniform" and m.has_pressure and cfg["model"] == "all")]
    for model in models:
        for stats in check_identities(model, cfg["n"], cfg["seed"], fd_step=fd_step):
            rows.append(stats.as_row())
            require(stats.max_residual < tol,
                    f"{stats.identity} on {model.name}: {stats.max_residual:.2e} < {tol:g}", failures)
    write_csv(ctx.output_path("identities.csv"),
              ["identity", "model", "max_residual", "mean_residual", "n"], rows)
    ctx.results["checks"] = len(rows)
    raise_failures(failures)
    return 0


def load(lab) -> None:
    lab.add_plugin(plugin)
