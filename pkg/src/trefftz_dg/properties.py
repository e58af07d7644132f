"""
Self-checks of a configuration: algebraic identities of the tensor and the
Trefftz basis, mesh geometry bounds, and the coercivity, continuity, stability
and energy statements of the discrete scheme.
"""

import logging
from dataclasses import dataclass

import numpy as np

from trefftz_dg.analysis import ExactField, dg_plus_seminorm, dg_seminorm, difference, trace_norms_at_time
from trefftz_dg.anisotropy import check_transform_identities, make_tensor, random_spd, rotated_family_matrix
from trefftz_dg.assembly import FluxParameters, assemble_method1, assemble_method2
from trefftz_dg.cases import make_case
from trefftz_dg.config import RunConfig
from trefftz_dg.errors import PropertyFailure
from trefftz_dg.experiments import build_case, solve_level
from trefftz_dg.mesh import generate, verify_geometry_lemmas
from trefftz_dg.polynomial import SpaceTimePolynomial, multi_indices
from trefftz_dg.quadrature import default_order, tensor_rule
from trefftz_dg.solver import DiscreteSolution, solve
from trefftz_dg.trefftz_basis import TrefftzFamily, build_first_order_basis, build_scalar_space

log = logging.getLogger(__name__)

RECONSTRUCTION_TOL = 1e-12
IDENTITY_TOL = 1e-10
RESIDUAL_TOL = 1e-12
COERCIVITY_TOL = 1e-9
CONTINUITY_CONSTANT = 2.0
PATCH_TOL = 1e-9
PROPERTY_LEVEL = 1


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    value: float
    limit: float
    detail: str = ""


def _result(name: str, value: float, limit: float, detail: str = "") -> PropertyResult:
    passed = bool(np.isfinite(value) and value <= limit)
    result = PropertyResult(name, passed, float(value), float(limit), detail)
    if passed:
        log.info(f"{name}: {value:.3e} <= {limit:.3e}")
    else:
        log.error(f"{name} failed: {value:.3e} > {limit:.3e} {detail}".rstrip())
    return result


def random_polynomial(d: int, degree: int, rng: np.random.Generator) -> SpaceTimePolynomial:
    """Polynomial with uniform coefficients in [-1, 1] on every monomial of total degree <= ``degree``."""
    exponents = multi_indices(d + 1, degree)
    return SpaceTimePolynomial(d, dict(zip(exponents, rng.uniform(-1.0, 1.0, size=len(exponents)))))


def _tensors(config: RunConfig, case, rng: np.random.Generator) -> list:
    tensors = [case.tensor]
    tensors += [make_tensor(random_spd(case.d, rng, config.max_rho)) for _ in range(config.samples)]
    return tensors


def check_reconstruction(config: RunConfig, case, rng) -> PropertyResult:
    worst = 0.0
    for tensor in _tensors(config, case, rng):
        reconstructed = tensor.P.T @ np.diag(tensor.Lambda) @ tensor.P
        orthogonality = tensor.P @ tensor.P.T - np.eye(tensor.d)
        square = tensor.sqrt @ tensor.sqrt - tensor.A
        worst = max(
            worst,
            np.max(np.abs(reconstructed - tensor.A)),
            np.max(np.abs(orthogonality)),
            np.max(np.abs(square)),
        )
    return _result("eigendecomposition", worst, RECONSTRUCTION_TOL)


def check_identities(config: RunConfig, case, rng) -> PropertyResult:
    worst = 0.0
    hat_points = rng.uniform(0.0, 1.0, size=(16, case.d))
    for tensor in _tensors(config, case, rng):
        points = tensor.from_hat(hat_points)
        v_hat = random_polynomial(case.d, 4, rng)
        sigma_hat = [random_polynomial(case.d, 4, rng) for _ in range(case.d)]
        t = rng.uniform(0.0, 1.0)
        worst = max(worst, check_transform_identities(tensor, v_hat, sigma_hat, points, t))
    return _result("transform identities", worst, IDENTITY_TOL)


def check_trefftz_residuals(config: RunConfig, case) -> PropertyResult:
    basis = build_first_order_basis(config.p, case.d, case.c)
    worst = max((max(basis.residuals(j)) for j in range(len(basis))), default=0.0)
    scalar = build_scalar_space(config.p + 1, case.d, case.c)
    worst = max([worst] + [r.max_abs_coefficient() for r in scalar.residuals()])
    return _result("Trefftz residuals", worst, RESIDUAL_TOL)


def check_geometry(mesh) -> list[PropertyResult]:
    report = verify_geometry_lemmas(mesh)
    upper = np.sqrt(mesh.tensor.rho)
    excess = max(1.0 - report.min_size_ratio, report.max_size_ratio - upper, 0.0)
    return [
        _result(
            "mesh size ratio",
            excess,
            1e-12,
            f"(ratio {report.min_size_ratio:.4g}, quasi-uniformity {mesh.quasi_uniformity:.4g})",
        ),
        _result("face area bound", report.max_area_ratio, 1.0 + 1e-12),
    ]


def _systems(mesh, family, flux: FluxParameters, case, order: int):
    yield "physical", assemble_method1(mesh, family, flux, case, order)
    yield "hat", assemble_method2(mesh, family, flux, case, order)


def _field(system, coefficients: np.ndarray) -> DiscreteSolution:
    return DiscreteSolution(
        mesh=system.mesh,
        family=system.family,
        coefficients=coefficients.reshape(system.mesh.n_elements, system.block_size),
        method=system.method,
        frame=system.frame.name,
    )


def check_coercivity(mesh, family, config: RunConfig, case, order: int, rng) -> PropertyResult:
    """A(u; u) = |u|_DG^2 for random discrete u, in both frames."""
    worst = 0.0
    for frame, system in _systems(mesh, family, config.flux, case, order):
        matrix = system.matrix()
        for _ in range(config.samples):
            u = rng.standard_normal(system.dofs)
            form = float(u @ (matrix @ u))
            norm = dg_seminorm(_field(system, u), mesh, config.flux, frame, order=order, c=case.c) ** 2
            worst = max(worst, abs(form - norm) / max(norm, 1e-300))
    return _result("coercivity identity", worst, COERCIVITY_TOL)


def check_continuity(mesh, family, config: RunConfig, case, order: int, rng) -> PropertyResult:
    """
    |A(u; w)| <= 2 |u|_DG+ |w|_DG and |A(u; w)| <= 2 |u|_DG |w|_DG+, reported as
    the largest observed ratio of either side over its bound.
    """
    worst = 0.0
    for frame, system in _systems(mesh, family, config.flux, case, order):
        matrix = system.matrix()
        for _ in range(config.samples):
            u = rng.standard_normal(system.dofs)
            w = rng.standard_normal(system.dofs)
            form = abs(float(w @ (matrix @ u)))
            seminorms = {}
            for name, coefficients in (("u", u), ("w", w)):
                field = _field(system, coefficients)
                seminorms[name] = (
                    dg_seminorm(field, mesh, config.flux, frame, order=order, c=case.c),
                    dg_plus_seminorm(field, mesh, config.flux, frame, order=order, c=case.c),
                )
            (u_dg, u_plus), (w_dg, w_plus) = seminorms["u"], seminorms["w"]
            worst = max(
                worst,
                form / (CONTINUITY_CONSTANT * u_plus * w_dg),
                form / (CONTINUITY_CONSTANT * u_dg * w_plus),
            )
    return _result("continuity bound", worst, 1.0 + 1e-9)


def check_stability(mesh, family, config: RunConfig, order: int, rng) -> PropertyResult:
    """|u|_DG <= det(Lambda^{1/4}) lambda_min^{-1/4} |u_hat|_DG with delta = 1/2."""
    tensor = mesh.tensor
    flux = FluxParameters(config.flux.alpha, config.flux.beta, 0.5)
    constant = np.prod(tensor.Lambda**0.25) * tensor.lambda_min**-0.25
    worst = 0.0
    for _ in range(config.samples):
        u = DiscreteSolution(
            mesh, family, rng.standard_normal((mesh.n_elements, family.size)), "method1"
        )
        physical = dg_seminorm(u, mesh, flux, "physical", order=order)
        hat = dg_seminorm(u, mesh, flux, "hat", order=order, neumann_scaling=False)
        worst = max(worst, physical / (constant * hat))
    return _result("transformation stability", worst, 1.0 + 1e-9)


def check_energy(config: RunConfig, case, order: int) -> PropertyResult:
    """Half the L2 error at every slab top is bounded by the truncated DG+ error."""
    mesh, solution = solve_level(config, case, PROPERTY_LEVEL)
    error = difference(solution, ExactField(case, mesh))
    worst = 0.0
    for n in range(1, mesh.n_slabs + 1):
        err_v, err_sigma = trace_norms_at_time(error, mesh, float(mesh.times[n]), order)
        bound = dg_plus_seminorm(error, mesh, config.flux, upto_slab=n, order=order, c=case.c)
        lhs = 0.5 * err_v / case.c + 0.5 * err_sigma
        if bound > 0:
            worst = max(worst, lhs / bound)
        elif lhs > 0:
            worst = np.inf
    return _result("energy bound", worst, 1.0 + 1e-9)


def check_patch(config: RunConfig, case) -> PropertyResult:
    """A solution inside the Trefftz space is reproduced to solver precision."""
    tensor = case.tensor
    if tensor.d != 2:
        tensor = make_tensor(rotated_family_matrix(2, config.lambda1[0], config.lambda2, config.a, config.b))
    patch = make_case("patch", tensor=tensor)
    p = max(config.p, 1)
    mesh = generate(patch.domain, patch.tensor, PROPERTY_LEVEL, 2**PROPERTY_LEVEL, patch.boundary)
    family = TrefftzFamily(mesh, p, patch.c)
    order = config.quadrature_order or default_order(p)
    worst = 0.0
    for frame, system in _systems(mesh, family, config.flux, patch, order):
        solution = solve(system)
        points, _ = tensor_rule(3, mesh.d + 1)
        points = np.ascontiguousarray(points)
        for element in range(mesh.n_elements):
            w, tau = solution.trace(element, points)
            x, t = mesh.physical_points(element, points)
            v, sigma = patch.v(x, t), patch.sigma(x, t)
            scale = max(1.0, float(np.max(np.abs(v))), float(np.max(np.abs(sigma))))
            worst = max(worst, np.max(np.abs(w - v)) / scale, np.max(np.abs(tau - sigma)) / scale)
    return _result("patch test", worst, PATCH_TOL)


def run_properties(config: RunConfig) -> list[PropertyResult]:
    """
    Run every check on a level-1 mesh of the configured case.

    Returns
    -------
    list[PropertyResult]
        In execution order; use ``first_failure`` to find a failed one.
    """
    rng = np.random.default_rng(config.seed)
    case = build_case(config)
    order = config.quadrature_order or default_order(config.p, config.q)
    mesh = generate(case.domain, case.tensor, PROPERTY_LEVEL, 2**PROPERTY_LEVEL, case.boundary)
    family = TrefftzFamily(mesh, config.p, case.c)
    log.info(f"Property suite for case {case.id}: rho {case.tensor.rho:.4g}, p={config.p}")

    results = [
        check_reconstruction(config, case, rng),
        check_identities(config, case, rng),
        check_trefftz_residuals(config, case),
        *check_geometry(mesh),
        check_coercivity(mesh, family, config, case, order, rng),
        check_continuity(mesh, family, config, case, order, rng),
        check_stability(mesh, family, config, order, rng),
        check_energy(config, case, order),
        check_patch(config, case),
    ]
    passed = sum(result.passed for result in results)
    log.info(f"{passed} of {len(results)} properties hold")
    return results


def first_failure(results: list[PropertyResult]) -> PropertyResult | None:
    return next((result for result in results if not result.passed), None)


def assert_properties(results: list[PropertyResult]) -> None:
    failure = first_failure(results)
    if failure is not None:
        raise PropertyFailure(failure.name, f"{failure.value:.3e} exceeds {failure.limit:.3e}")
