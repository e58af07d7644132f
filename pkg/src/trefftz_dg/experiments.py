"""
Experiment drivers: single solves, h-convergence sweeps and rho sweeps.
"""

import logging

import numpy as np
import pandas as pd
from tqdm import tqdm

from trefftz_dg.analysis import (
    ErrorReport,
    ExactField,
    FieldSum,
    convergence_rates,
    dg_plus_seminorm,
    dg_seminorm,
    difference,
    l2_error_at_time,
    rho_rates,
)
from trefftz_dg.anisotropy import make_tensor, random_spd
from trefftz_dg.assembly import assemble_method1, assemble_method2, assemble_nonhomogeneous_rhs
from trefftz_dg.cases import CASES, ManufacturedCase, make_case
from trefftz_dg.config import RunConfig
from trefftz_dg.mesh import generate
from trefftz_dg.quadrature import default_order
from trefftz_dg.solver import solve, solve_particular
from trefftz_dg.trefftz_basis import TrefftzFamily

log = logging.getLogger(__name__)

CONVERGENCE_COLUMNS = [
    "level",
    "h",
    "dofs",
    "err_v",
    "rate_v",
    "err_sigma",
    "rate_sigma",
    "err_dg",
    "rate_dg",
]
RHO_COLUMNS = [
    "rho",
    "err_v",
    "rho_rate_v",
    "err_sigma",
    "rho_rate_sigma",
    "err_dg",
    "rho_rate_dg",
]
RUN_COLUMNS = ["level", "h", "h_hat", "dofs", "rho", "err_v", "err_sigma", "err_dg", "err_dg_plus"]


def build_case(config: RunConfig, lambda1: float | None = None) -> ManufacturedCase:
    """The configured case, with a random SPD tensor when ``tensor.random`` is set."""
    tensor = None
    if config.random_tensor:
        rng = np.random.default_rng(config.seed)
        tensor = make_tensor(random_spd(CASES[config.case].d, rng, config.max_rho))
    return make_case(
        config.case,
        lambda1=config.lambda1[0] if lambda1 is None else lambda1,
        lambda2=config.lambda2,
        a=config.a,
        b=config.b,
        boundary=config.boundary,
        lambda3=config.lambda3,
        tensor=tensor,
    )


def solve_level(config: RunConfig, case: ManufacturedCase, level: int, progress: bool = False):
    """
    Mesh the case at ``level`` and solve it with the configured method.

    Returns
    -------
    tuple
        The mesh and the discrete solution (a FieldSum of particular solution
        and Trefftz correction for the combined method).
    """
    mesh = generate(case.domain, case.tensor, level, config.n_steps(level), case.boundary)
    family = TrefftzFamily(mesh, config.p, case.c)
    order = config.quadrature_order
    if config.method == "method2":
        return mesh, solve(assemble_method2(mesh, family, config.flux, case, order), progress=progress)
    system = assemble_method1(mesh, family, config.flux, case, order)
    if config.method == "method1":
        return mesh, solve(system, progress=progress)
    particular = solve_particular(
        mesh,
        config.q,
        case.f,
        config.flux,
        config.mode,
        config.local_size,
        config.local_enlargement,
        order,
    )
    rhs = assemble_nonhomogeneous_rhs(system, case, particular, order)
    correction = solve(system, rhs=rhs, progress=progress)
    return mesh, FieldSum([particular, correction])


def run_single(
    config: RunConfig,
    level: int,
    case: ManufacturedCase | None = None,
    with_plus: bool = False,
) -> ErrorReport:
    """Solve one level and measure the errors at the final time and in the DG seminorm."""
    case = case or build_case(config)
    mesh, solution = solve_level(config, case, level)
    order = config.quadrature_order or default_order(config.p, config.q)
    errors = l2_error_at_time(solution, case, mesh.domain.T, order)
    error_field = difference(solution, ExactField(case, mesh))
    err_dg = dg_seminorm(error_field, mesh, config.flux, order=order, c=case.c)
    err_dg_plus = dg_plus_seminorm(error_field, mesh, config.flux, order=order, c=case.c) if with_plus else None
    report = ErrorReport(
        level=level,
        h=mesh.grid_width,
        h_hat=mesh.h_hat,
        dofs=solution.dofs,
        err_v=errors.err_v,
        err_sigma=errors.err_sigma,
        err_dg=err_dg,
        err_dg_plus=err_dg_plus,
        rho=case.tensor.rho,
        absolute_v=errors.absolute_v,
        absolute_sigma=errors.absolute_sigma,
    )
    log.info(
        f"Level {level}: dofs {report.dofs}, err_v {report.err_v:.4e}, "
        f"err_sigma {report.err_sigma:.4e}, err_dg {report.err_dg:.4e}"
    )
    return report


def run(config: RunConfig) -> pd.DataFrame:
    """One solve at the sweep level, with the DG+ error as well."""
    report = run_single(config, config.sweep_level, with_plus=True)
    row = {column: getattr(report, column) for column in RUN_COLUMNS}
    return pd.DataFrame([row], columns=RUN_COLUMNS)


def run_convergence(config: RunConfig, progress: bool = True) -> pd.DataFrame:
    """One row per level with errors and observed rates (blank on the first row)."""
    case = build_case(config)
    reports = [
        run_single(config, level, case)
        for level in tqdm(config.levels, desc="levels", disable=not progress)
    ]
    h = [report.h for report in reports]
    table = pd.DataFrame(
        {
            "level": [r.level for r in reports],
            "h": h,
            "dofs": [r.dofs for r in reports],
            "err_v": [r.err_v for r in reports],
            "rate_v": convergence_rates([r.err_v for r in reports], h),
            "err_sigma": [r.err_sigma for r in reports],
            "rate_sigma": convergence_rates([r.err_sigma for r in reports], h),
            "err_dg": [r.err_dg for r in reports],
            "rate_dg": convergence_rates([r.err_dg for r in reports], h),
        },
        columns=CONVERGENCE_COLUMNS,
    )
    return table.astype({"rate_v": float, "rate_sigma": float, "rate_dg": float})


def run_rho_sweep(config: RunConfig, progress: bool = True) -> pd.DataFrame:
    """Errors at a fixed level for each ``tensor.lambda1`` value, with growth rates in rho."""
    if len(config.lambda1) < 2:
        raise ValueError("A rho sweep needs at least two tensor.lambda1 values")
    level = config.sweep_level
    reports = [
        run_single(config, level, build_case(config, lambda1))
        for lambda1 in tqdm(config.lambda1, desc="rho", disable=not progress)
    ]
    rhos = [r.rho for r in reports]
    table = pd.DataFrame(
        {
            "rho": rhos,
            "err_v": [r.err_v for r in reports],
            "rho_rate_v": rho_rates([r.err_v for r in reports], rhos),
            "err_sigma": [r.err_sigma for r in reports],
            "rho_rate_sigma": rho_rates([r.err_sigma for r in reports], rhos),
            "err_dg": [r.err_dg for r in reports],
            "rho_rate_dg": rho_rates([r.err_dg for r in reports], rhos),
        },
        columns=RHO_COLUMNS,
    )
    return table.astype({"rho_rate_v": float, "rho_rate_sigma": float, "rho_rate_dg": float})
