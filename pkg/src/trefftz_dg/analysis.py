"""
Error measures: DG and DG+ seminorms (full and truncated to the first slabs),
L2 errors on time levels, and observed convergence rates.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from trefftz_dg.assembly import FluxParameters, FormFrame, hat_frame, physical_frame
from trefftz_dg.errors import NonMonotoneHError, TimeNotOnSlabBoundaryError
from trefftz_dg.mesh import FaceKind, SpaceTimeMesh
from trefftz_dg.quadrature import default_order, embed_face_points, rule_for, tensor_rule

log = logging.getLogger(__name__)

ABSOLUTE_THRESHOLD = 1e-14


class TraceField(Protocol):
    def trace(self, element: int, ref_points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``w`` (n,) and physical ``tau`` (n, d) at reference points of ``element``."""


class ExactField:
    """Trace access to the exact solution of a case on a mesh."""

    def __init__(self, case, mesh: SpaceTimeMesh):
        self.case = case
        self.mesh = mesh

    def trace(self, element: int, ref_points: np.ndarray):
        x, t = self.mesh.physical_points(element, ref_points)
        return self.case.v(x, t), self.case.sigma(x, t)


class FieldSum:
    """Linear combination ``sum_k weight_k * field_k`` of trace fields."""

    def __init__(self, fields: Sequence, weights: Sequence[float] | None = None):
        self.fields = list(fields)
        self.weights = list(weights) if weights is not None else [1.0] * len(self.fields)

    @property
    def mesh(self):
        return self.fields[0].mesh

    def trace(self, element: int, ref_points: np.ndarray):
        w_total, tau_total = None, None
        for weight, field in zip(self.weights, self.fields):
            w, tau = field.trace(element, ref_points)
            w_total = weight * w if w_total is None else w_total + weight * w
            tau_total = weight * tau if tau_total is None else tau_total + weight * tau
        return w_total, tau_total

    def evaluate(self, x, t):
        values = [field.evaluate(x, t) for field in self.fields]
        v = sum(weight * value[0] for weight, value in zip(self.weights, values))
        sigma = sum(weight * value[1] for weight, value in zip(self.weights, values))
        return v, sigma

    @property
    def dofs(self) -> int:
        return sum(getattr(field, "dofs", 0) for field in self.fields)


def difference(a, b) -> FieldSum:
    return FieldSum([a, b], [1.0, -1.0])


def _frame(mesh: SpaceTimeMesh, flux: FluxParameters, frame: str, c: float) -> FormFrame:
    if frame == "hat":
        return hat_frame(mesh.tensor, flux, c)
    if frame == "physical":
        return physical_frame(mesh.tensor, flux, c)
    raise ValueError(f"Unknown frame '{frame}'")


def _quadratic(a: np.ndarray, M: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("qk,kl,ql->q", a, M, b)


def _seminorm_squared(
    field,
    mesh: SpaceTimeMesh,
    flux: FluxParameters,
    frame: FormFrame,
    upto_slab: int | None,
    order: int,
    augmented: bool,
    neumann_scaling: bool,
) -> float:
    n_slabs = mesh.n_slabs if upto_slab is None else upto_slab
    if not 1 <= n_slabs <= mesh.n_slabs:
        raise ValueError(f"Truncation to {upto_slab} slabs outside 1..{mesh.n_slabs}")
    c2 = frame.c**-2
    total = 0.0
    for slab in range(n_slabs):
        for face_id in mesh.faces_by_slab[slab]:
            face = mesh.faces[face_id]
            rule = rule_for(mesh, face, order)
            wq = rule.weights * frame.face_measure(face)
            w, tau = field.trace(face.minus, rule.element_points)
            tau = frame.rotate(tau)
            truncated_top = face.kind is FaceKind.SPACE_LIKE and slab == n_slabs - 1
            if face.kind in (FaceKind.INITIAL, FaceKind.FINAL) or truncated_top:
                density = 0.5 * (c2 * w**2 + np.sum(tau**2, axis=1))
            elif face.kind is FaceKind.SPACE_LIKE:
                points = embed_face_points(rule.points, face.plus_face, mesh.d)
                w_plus, tau_plus = field.trace(face.plus, points)
                tau_plus = frame.rotate(tau_plus)
                density = 0.5 * (c2 * (w - w_plus) ** 2 + np.sum((tau - tau_plus) ** 2, axis=1))
                if augmented:
                    density = density + 2.0 * (c2 * w**2 + np.sum(tau**2, axis=1))
            elif face.kind is FaceKind.TIME_LIKE:
                points = embed_face_points(rule.points, face.plus_face, mesh.d)
                w_plus, tau_plus = field.trace(face.plus, points)
                tau_plus = frame.rotate(tau_plus)
                an = frame.conormal(face)
                density = flux.alpha * frame.penalty(face) * (w - w_plus) ** 2
                density = density + flux.beta * ((tau - tau_plus) @ an) ** 2
                if augmented:
                    mean_tau = 0.5 * (tau + tau_plus)
                    density = density + _quadratic(mean_tau, frame.average_a, mean_tau) / flux.alpha
                    density = density + (0.5 * (w + w_plus)) ** 2 / flux.beta
            elif face.kind is FaceKind.DIRICHLET:
                density = flux.alpha * frame.penalty(face) * w**2
                if augmented:
                    density = density + _quadratic(tau, frame.average_a, tau) / flux.alpha
            else:
                weight = frame.neumann_weight(face) if neumann_scaling else 1.0
                density = flux.beta * weight * (tau @ frame.conormal(face)) ** 2
                if augmented:
                    density = density + w**2 / (flux.beta * weight)
            total += float(wq @ density)
    return total


def dg_seminorm(
    field,
    mesh: SpaceTimeMesh,
    flux: FluxParameters | None = None,
    frame: str = "physical",
    upto_slab: int | None = None,
    order: int | None = None,
    neumann_scaling: bool = True,
    c: float = 1.0,
) -> float:
    """
    DG seminorm of a trace field.

    Parameters
    ----------
    field : TraceField
    mesh : SpaceTimeMesh
    flux : FluxParameters, optional
    frame : str, optional
        ``physical`` or ``hat`` (integrals over hat faces, isotropic weights).
    upto_slab : int, optional
        Restrict to the first ``upto_slab`` slabs, with the trace at their top
        time level in place of the final-time term.
    order : int, optional
        Quadrature points per axis.
    neumann_scaling : bool, optional
        In the hat frame, weight Neumann terms with |Lambda^{1/2} P n|.
    c : float, optional
        Wave speed.
    """
    flux = flux or FluxParameters()
    order = order or default_order(3)
    frame_obj = _frame(mesh, flux, frame, c)
    total = _seminorm_squared(field, mesh, flux, frame_obj, upto_slab, order, False, neumann_scaling)
    return float(np.sqrt(max(total, 0.0)))


def dg_plus_seminorm(
    field,
    mesh: SpaceTimeMesh,
    flux: FluxParameters | None = None,
    frame: str = "physical",
    upto_slab: int | None = None,
    order: int | None = None,
    neumann_scaling: bool = True,
    c: float = 1.0,
) -> float:
    """
    DG seminorm augmented with upwind traces, averages and boundary traces.

    With ``upto_slab`` the top time level of the last slab plays the role of
    the final time, so it carries no upwind trace.
    """
    flux = flux or FluxParameters()
    order = order or default_order(3)
    frame_obj = _frame(mesh, flux, frame, c)
    total = _seminorm_squared(field, mesh, flux, frame_obj, upto_slab, order, True, neumann_scaling)
    return float(np.sqrt(max(total, 0.0)))


def slab_index_at_time(mesh: SpaceTimeMesh, t: float) -> int:
    """Index k with t = t_k, or TimeNotOnSlabBoundaryError."""
    k = int(np.argmin(np.abs(mesh.times - t)))
    if abs(mesh.times[k] - t) > 1e-12 * max(1.0, mesh.domain.T):
        raise TimeNotOnSlabBoundaryError(f"Time {t} is not a slab boundary of the mesh")
    return k


def trace_norms_at_time(field, mesh: SpaceTimeMesh, t: float, order: int | None = None):
    """
    L2(Omega x {t}) norms of ``w`` and ``tau`` taken from the slab ending at
    ``t`` (the first slab for t = 0).
    """
    k = slab_index_at_time(mesh, t)
    order = order or default_order(3)
    points, weights = tensor_rule(order, mesh.d)
    slab, time = (0, 0.0) if k == 0 else (k - 1, 1.0)
    ref = np.column_stack([points, np.full(points.shape[0], time)])
    wq = weights * mesh.geometry.volume
    w_total, tau_total = 0.0, 0.0
    for element in mesh.slab_elements(slab):
        w, tau = field.trace(element, ref)
        w_total += float(wq @ w**2)
        tau_total += float(wq @ np.sum(tau**2, axis=1))
    return np.sqrt(w_total), np.sqrt(tau_total)


@dataclass(frozen=True)
class TimeErrors:
    err_v: float
    err_sigma: float
    absolute_v: bool = False
    absolute_sigma: bool = False


def _relative(error: float, norm: float, name: str) -> tuple[float, bool]:
    if norm < ABSOLUTE_THRESHOLD:
        log.warning(f"Exact {name} vanishes at the evaluation time; reporting the absolute error")
        return error, True
    return error / norm, False


def l2_error_at_time(solution, case, t: float, order: int | None = None) -> TimeErrors:
    """
    Relative L2(Omega x {t}) errors of v and sigma; absolute (and flagged)
    when the exact field's norm is below 1e-14.
    """
    mesh = solution.mesh
    exact = ExactField(case, mesh)
    err_v, err_sigma = trace_norms_at_time(difference(solution, exact), mesh, t, order)
    norm_v, norm_sigma = trace_norms_at_time(exact, mesh, t, order)
    err_v, absolute_v = _relative(err_v, norm_v, "v")
    err_sigma, absolute_sigma = _relative(err_sigma, norm_sigma, "sigma")
    return TimeErrors(err_v, err_sigma, absolute_v, absolute_sigma)


@dataclass(frozen=True)
class ErrorReport:
    level: int
    h: float
    h_hat: float
    dofs: int
    err_v: float
    err_sigma: float
    err_dg: float
    err_dg_plus: float | None = None
    rho: float = 1.0
    absolute_v: bool = False
    absolute_sigma: bool = False


def convergence_rates(errors: Sequence[float], h: Sequence[float]) -> list[float | None]:
    """
    Observed orders log(e_{k-1} / e_k) / log(h_{k-1} / h_k), which is
    log2(e_{k-1} / e_k) under halving. The first entry is None; pairs with a
    zero error give NaN.
    """
    if len(errors) != len(h):
        raise ValueError(f"{len(errors)} errors for {len(h)} mesh sizes")
    rates: list[float | None] = [None]
    for k in range(1, len(errors)):
        if not h[k] < h[k - 1]:
            raise NonMonotoneHError(f"Mesh size does not decrease: h = {h[k - 1]} then {h[k]}")
        if errors[k] <= 0 or errors[k - 1] <= 0:
            rates.append(float("nan"))
        else:
            rates.append(float(np.log(errors[k - 1] / errors[k]) / np.log(h[k - 1] / h[k])))
    return rates


def rho_rates(errors: Sequence[float], rhos: Sequence[float]) -> list[float | None]:
    """
    Growth rates in rho: log2(e_k / e_{k-1}) / log2(rho_k / rho_{k-1}).
    Equal rho gives 0 for equal errors and NaN otherwise.
    """
    if len(errors) != len(rhos):
        raise ValueError(f"{len(errors)} errors for {len(rhos)} condition numbers")
    rates: list[float | None] = [None]
    for k in range(1, len(errors)):
        if errors[k] <= 0 or errors[k - 1] <= 0:
            rates.append(0.0 if errors[k] == errors[k - 1] else float("nan"))
        elif np.isclose(rhos[k], rhos[k - 1], rtol=1e-12, atol=0.0):
            rates.append(0.0 if errors[k] == errors[k - 1] else float("nan"))
        else:
            rates.append(float(np.log2(errors[k] / errors[k - 1]) / np.log2(rhos[k] / rhos[k - 1])))
    return rates


def rates(reports: Sequence[ErrorReport]) -> dict[str, list[float | None]]:
    """Per-quantity convergence rates of a refinement sequence."""
    if len(reports) < 2:
        raise ValueError("At least two reports are needed for rates")
    h = [report.h for report in reports]
    return {
        "rate_v": convergence_rates([r.err_v for r in reports], h),
        "rate_sigma": convergence_rates([r.err_sigma for r in reports], h),
        "rate_dg": convergence_rates([r.err_dg for r in reports], h),
    }
