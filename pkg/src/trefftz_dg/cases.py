"""
Manufactured solutions for the experiment catalogue.

Every case derives from a scalar potential U. Hat-defined cases solve the
isotropic wave equation in hat coordinates (v = dU/dt, sigma = -P^T grad_hat U
at x_hat = S x) and carry no source. Physical cases use v = dU/dt,
sigma = -A^{1/2} grad U and the source f = U_tt - div(A grad U).
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from trefftz_dg.anisotropy import AnisotropyTensor, make_tensor, rotated_family_matrix
from trefftz_dg.errors import UnknownCaseError
from trefftz_dg.mesh import DIRICHLET, MIXED, NEUMANN, BoundarySpec, Domain

log = logging.getLogger(__name__)

DATA_FAMILIES = frozenset({"initial", "dirichlet", "neumann", "source"})


def _points(x, t, d: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float).reshape(-1, d)
    t = np.broadcast_to(np.asarray(t, dtype=float).reshape(-1), (x.shape[0],))
    return x, t


class SineProduct:
    """U(y, t) = prod_i sin(pi y_i) sin(omega t)."""

    def __init__(self, d: int, omega: float):
        self.d = d
        self.omega = omega

    def value(self, y, t):
        return np.prod(np.sin(np.pi * y), axis=1) * np.sin(self.omega * t)

    def time_derivative(self, y, t):
        return self.omega * np.prod(np.sin(np.pi * y), axis=1) * np.cos(self.omega * t)

    def gradient(self, y, t):
        sines = np.sin(np.pi * y)
        cosines = np.cos(np.pi * y)
        grad = np.empty_like(y)
        for i in range(self.d):
            others = np.prod(np.delete(sines, i, axis=1), axis=1)
            grad[:, i] = np.pi * cosines[:, i] * others
        return grad * np.sin(self.omega * t)[:, None]

    def source(self, A: np.ndarray, y, t):
        """U_tt - div(A grad U) for constant A."""
        sines = np.sin(np.pi * y)
        cosines = np.cos(np.pi * y)
        U = self.value(y, t)
        f = (-self.omega**2 + np.pi**2 * np.trace(A)) * U
        for i in range(self.d):
            for j in range(i + 1, self.d):
                rest = np.prod(np.delete(sines, [i, j], axis=1), axis=1)
                f -= 2 * np.pi**2 * A[i, j] * cosines[:, i] * cosines[:, j] * rest * np.sin(self.omega * t)
        return f


class PatchPolynomial:
    """U(y, t) = y_1^2 + t^2, a Trefftz polynomial of degree 2."""

    def __init__(self, d: int):
        self.d = d

    def value(self, y, t):
        return y[:, 0] ** 2 + t**2

    def time_derivative(self, y, t):
        return 2.0 * t

    def gradient(self, y, t):
        grad = np.zeros_like(y)
        grad[:, 0] = 2.0 * y[:, 0]
        return grad

    def source(self, A, y, t):
        return 2.0 - 2.0 * A[0, 0]


class ZeroSolution:
    def __init__(self, d: int):
        self.d = d

    def value(self, y, t):
        return np.zeros(y.shape[0])

    def time_derivative(self, y, t):
        return np.zeros(y.shape[0])

    def gradient(self, y, t):
        return np.zeros_like(y)

    def source(self, A, y, t):
        return np.zeros(y.shape[0])


@dataclass(frozen=True)
class CaseDefinition:
    d: int
    frame: str
    potential: str
    omega: float = 0.0
    hat_potential: bool = False
    boundary: str = NEUMANN
    boundary_modes: tuple[str, ...] = (DIRICHLET, NEUMANN, MIXED)


CASES = {
    "hom2d_hat": CaseDefinition(
        d=2, frame="hat", potential="sine", omega=np.sqrt(2) * np.pi, hat_potential=True
    ),
    "hom3d_hat": CaseDefinition(
        d=3, frame="hat", potential="sine", omega=np.sqrt(3) * np.pi, hat_potential=True
    ),
    "nonhom1d": CaseDefinition(
        d=1,
        frame="physical",
        potential="sine",
        omega=np.sqrt(2) * np.pi,
        boundary=DIRICHLET,
        boundary_modes=(DIRICHLET,),
    ),
    "nonhom2d": CaseDefinition(d=2, frame="physical", potential="sine", omega=np.sqrt(3) * np.pi),
    "nonhom3d": CaseDefinition(
        d=3,
        frame="physical",
        potential="sine",
        omega=2 * np.pi,
        boundary_modes=(DIRICHLET, NEUMANN),
    ),
    "patch": CaseDefinition(d=2, frame="physical", potential="patch", hat_potential=True),
    "zero": CaseDefinition(d=2, frame="physical", potential="zero"),
}


@dataclass(frozen=True, eq=False)
class ManufacturedCase:
    """
    Exact solution and data of one experiment.

    All evaluators take physical points ``x`` of shape (n, d) and times ``t``
    (scalar or (n,)) and return arrays; ``sigma`` has shape (n, d).
    """

    id: str
    d: int
    tensor: AnisotropyTensor
    domain: Domain
    boundary: BoundarySpec
    potential: object
    hat_defined: bool
    c: float = 1.0
    data_families: frozenset[str] = field(default=DATA_FAMILIES)

    @property
    def homogeneous(self) -> bool:
        return self.hat_defined or isinstance(self.potential, ZeroSolution)

    def _argument(self, x):
        return self.tensor.to_hat(x) if self.hat_defined else x

    def U(self, x, t) -> np.ndarray:
        x, t = _points(x, t, self.d)
        return self.potential.value(self._argument(x), t)

    def v(self, x, t) -> np.ndarray:
        x, t = _points(x, t, self.d)
        return self.potential.time_derivative(self._argument(x), t)

    def sigma(self, x, t) -> np.ndarray:
        x, t = _points(x, t, self.d)
        grad = self.potential.gradient(self._argument(x), t)
        if self.hat_defined:
            return -grad @ self.tensor.P
        return -grad @ self.tensor.sqrt.T

    def f(self, x, t) -> np.ndarray:
        x, t = _points(x, t, self.d)
        if self.hat_defined:
            return np.zeros(x.shape[0])
        return np.broadcast_to(self.potential.source(self.tensor.A, x, t), (x.shape[0],)).copy()

    def v0(self, x) -> np.ndarray:
        return self.v(x, 0.0)

    def sigma0(self, x) -> np.ndarray:
        return self.sigma(x, 0.0)

    def g_dirichlet(self, x, t) -> np.ndarray:
        return self.v(x, t)

    def g_neumann(self, x, t, normal) -> np.ndarray:
        """A^{1/2} sigma . n for the outward physical unit normal(s)."""
        flux = self.sigma(x, t) @ self.tensor.sqrt.T
        return np.sum(flux * np.asarray(normal), axis=-1)


def lambda1_for_rho(rho: float) -> float:
    """
    lambda_1 of the 2D family (a = b, lambda_2 = 1) whose normalized matrix
    has condition number ``rho``.
    """
    if rho < 1:
        raise ValueError(f"Condition number must be >= 1, got {rho}")
    if rho == 1:
        return 1.0
    s = rho + 1.0
    return float((-s + np.sqrt(s**2 + 8.0 * (rho - 1.0))) / (2.0 * (rho - 1.0)))


def make_case(
    case_id: str,
    lambda1: float = 1.0,
    lambda2: float = 1.0,
    a: float = 1 / np.sqrt(2),
    b: float = 1 / np.sqrt(2),
    boundary: str | None = None,
    lambda3: float = 1.0,
    tensor: AnisotropyTensor | None = None,
) -> ManufacturedCase:
    """
    Build a catalogue case.

    Parameters
    ----------
    case_id : str
        One of ``hom2d_hat``, ``hom3d_hat``, ``nonhom1d``, ``nonhom2d``,
        ``nonhom3d``, ``patch``, ``zero``.
    lambda1, lambda2, a, b, lambda3 : float
        Parameters of the anisotropy family (ignored in 1D).
    boundary : str, optional
        ``dirichlet``, ``neumann`` or ``mixed``; the case default when omitted.
    tensor : AnisotropyTensor, optional
        Use this tensor instead of the family (e.g. a random SPD matrix).

    Returns
    -------
    ManufacturedCase
    """
    definition = CASES.get(case_id)
    if definition is None:
        raise UnknownCaseError(f"Unknown case '{case_id}', expected one of {sorted(CASES)}")
    d = definition.d if tensor is None else tensor.d
    mode = boundary or definition.boundary
    if mode not in definition.boundary_modes:
        log.warning(f"Boundary mode '{mode}' is not part of the catalogue for case '{case_id}'")
    if tensor is None:
        tensor = make_tensor(rotated_family_matrix(d, lambda1, lambda2, a, b, lambda3))

    if definition.potential == "sine":
        potential = SineProduct(d, definition.omega)
    elif definition.potential == "patch":
        potential = PatchPolynomial(d)
    else:
        potential = ZeroSolution(d)

    case = ManufacturedCase(
        id=case_id,
        d=d,
        tensor=tensor,
        domain=Domain.unit(d, frame=definition.frame),
        boundary=BoundarySpec.from_mode(mode, d),
        potential=potential,
        hat_defined=definition.hat_potential,
    )
    log.info(f"Case {case_id}: d={d}, rho={tensor.rho:.4g}, boundary={mode}")
    return case
