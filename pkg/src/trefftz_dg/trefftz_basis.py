"""
Polynomial Trefftz spaces for the wave equation.

The scalar space is spanned by polynomials U(x_hat, t) = sum a_{k,alpha} t^k x_hat^alpha
solving -Laplace U + c^{-2} U_tt = 0, generated from monomial initial values by
the recurrence

    a_{k,alpha} = c^2 / (k (k-1)) * sum_m (alpha_m + 2)(alpha_m + 1) a_{k-2, alpha + 2 e_m}.

First-order pairs (w, tau_hat) = (dU/dt, -grad U) span the Trefftz space of the
isotropic first-order system; physical pairs are (w, P^T tau_hat) at x_hat = S x.
"""

import logging
from dataclasses import dataclass, field
from math import comb

import numpy as np

from trefftz_dg.anisotropy import AnisotropyTensor
from trefftz_dg.errors import IndexOutOfRangeError
from trefftz_dg.polynomial import PolynomialStack, SpaceTimePolynomial, multi_indices

log = logging.getLogger(__name__)


def dim_scalar(p: int, d: int) -> int:
    """Dimension of the scalar Trefftz space of degree ``p`` in ``d`` space dimensions."""
    if p < 0 or d < 1:
        raise ValueError(f"Invalid degree {p} or dimension {d}")
    if p == 0:
        return 1
    return comb(p + d, d) + comb(p - 1 + d, d)


def dim_first_order(p: int, d: int) -> int:
    return dim_scalar(p + 1, d) - 1


@dataclass(frozen=True)
class ScalarTrefftzSpace:
    d: int
    p: int
    c: float
    members: tuple[SpaceTimePolynomial, ...]

    def __len__(self) -> int:
        return len(self.members)

    def residuals(self) -> list[SpaceTimePolynomial]:
        """Wave residuals -Laplace U + c^{-2} U_tt of every member."""
        return [
            -u.laplacian() + u.derivative("t").derivative("t") * (1.0 / self.c**2)
            for u in self.members
        ]


def _solve_recurrence(d: int, p: int, c: float, seed_alpha: tuple[int, ...], k0: int):
    coefficients: dict[tuple[int, ...], float] = {(k0, *seed_alpha): 1.0}
    # layer[k] maps alpha -> a_{k, alpha}
    layers: dict[int, dict[tuple[int, ...], float]] = {k0: {seed_alpha: 1.0}}
    for k in range(k0 + 2, p + 1, 2):
        previous = layers[k - 2]
        current = {}
        for alpha in multi_indices(d, p - k):
            total = 0.0
            for m in range(d):
                raised = list(alpha)
                raised[m] += 2
                source = previous.get(tuple(raised), 0.0)
                if source:
                    total += (alpha[m] + 2) * (alpha[m] + 1) * source
            if total:
                current[alpha] = c**2 / (k * (k - 1)) * total
        if not current:
            break
        layers[k] = current
        for alpha, value in current.items():
            coefficients[(k, *alpha)] = value
    return SpaceTimePolynomial(d, coefficients)


def build_scalar_space(p: int, d: int, c: float = 1.0) -> ScalarTrefftzSpace:
    """
    Scalar Trefftz space of total degree ``p``.

    One member per monomial seed of degree <= p used as U(., 0) with
    dU/dt(., 0) = 0, and one per seed of degree <= p - 1 used as dU/dt(., 0)
    with U(., 0) = 0.
    """
    if p < 0:
        raise ValueError(f"Degree must be >= 0, got {p}")
    members = [_solve_recurrence(d, p, c, alpha, 0) for alpha in multi_indices(d, p)]
    members += [_solve_recurrence(d, p, c, alpha, 1) for alpha in multi_indices(d, p - 1)]
    return ScalarTrefftzSpace(d=d, p=p, c=c, members=tuple(members))


@dataclass(frozen=True)
class TrefftzBasis:
    """
    First-order Trefftz pairs in local hat variables.

    The polynomials are written in ``xi = (x_hat - center) / half_width`` and
    ``s = (t - time_center) / half_width``; the joint scaling keeps them exact
    solutions of the isotropic system with wave speed ``c``.
    """

    d: int
    p: int
    c: float
    pairs: tuple[tuple[SpaceTimePolynomial, tuple[SpaceTimePolynomial, ...]], ...]
    tensor: AnisotropyTensor | None = None
    center: np.ndarray = field(default_factory=lambda: np.zeros(0))
    time_center: float = 0.0
    half_width: float = 1.0

    def __len__(self) -> int:
        return len(self.pairs)

    def localized(self, center, time_center: float, half_width: float) -> "TrefftzBasis":
        return TrefftzBasis(
            d=self.d,
            p=self.p,
            c=self.c,
            pairs=self.pairs,
            tensor=self.tensor,
            center=np.asarray(center, dtype=float),
            time_center=float(time_center),
            half_width=float(half_width),
        )

    def residuals(self, j: int) -> tuple[float, float]:
        """Max coefficient of grad w + d_t tau and of div tau + c^{-2} d_t w."""
        w, tau = self.pairs[j]
        first = max(
            (w.derivative(i) + tau[i].derivative("t")).max_abs_coefficient() for i in range(self.d)
        )
        divergence = SpaceTimePolynomial(self.d)
        for i in range(self.d):
            divergence = divergence + tau[i].derivative(i)
        second = (divergence + w.derivative("t") * (1.0 / self.c**2)).max_abs_coefficient()
        return first, second

    def _local_variables(self, x, t) -> tuple[np.ndarray, np.ndarray]:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        x_hat = self.tensor.to_hat(x) if self.tensor is not None else x
        center = self.center if self.center.size else np.zeros(self.d)
        t = np.broadcast_to(np.asarray(t, dtype=float).reshape(-1), (x.shape[0],))
        return (x_hat - center) / self.half_width, (t - self.time_center) / self.half_width

    def evaluate_physical(self, j: int, x, t) -> tuple[np.ndarray, np.ndarray]:
        """
        Values of member ``j`` at physical point(s).

        Returns ``w`` of shape (n,) and ``tau = P^T tau_hat`` of shape (n, d).
        """
        if not 0 <= j < len(self.pairs):
            raise IndexOutOfRangeError(f"Basis member {j} out of range [0, {len(self.pairs)})")
        xi, s = self._local_variables(x, t)
        w, tau_hat = self.pairs[j]
        w_values = w.evaluate(xi, s)
        tau_values = np.column_stack([component.evaluate(xi, s) for component in tau_hat])
        if self.tensor is not None:
            tau_values = tau_values @ self.tensor.P
        return np.atleast_1d(w_values), tau_values


def build_first_order_basis(
    p: int, d: int, c: float = 1.0, tensor: AnisotropyTensor | None = None
) -> TrefftzBasis:
    """
    Pairs (dU/dt, -grad U) for the non-constant members U of the scalar space of
    degree ``p + 1``, each scaled so its largest coefficient magnitude is 1.
    """
    space = build_scalar_space(p + 1, d, c)
    pairs = []
    for member in space.members:
        if member.degree == 0:
            continue
        w = member.derivative("t")
        tau = tuple(-g for g in member.gradient())
        scale = max([w.max_abs_coefficient()] + [g.max_abs_coefficient() for g in tau])
        pairs.append((w * (1.0 / scale), tuple(g * (1.0 / scale) for g in tau)))
    basis = TrefftzBasis(d=d, p=p, c=c, pairs=tuple(pairs), tensor=tensor)
    log.debug(f"Trefftz basis p={p}, d={d}: {len(basis)} pairs")
    return basis


class TrefftzFamily:
    """
    Per-element Trefftz bases on a uniform space-time mesh.

    Every element is a translate of the same reference element, so one set of
    local polynomials serves all elements; tabulations at element reference
    coordinates ``r`` in [0, 1]^{d+1} are cached by point set.
    """

    kind = "trefftz"

    def __init__(self, mesh, p: int, c: float = 1.0):
        self.mesh = mesh
        self.p = p
        self.c = c
        self.d = mesh.d
        geometry = mesh.geometry
        self.reference = build_first_order_basis(p, mesh.d, c, mesh.tensor).localized(
            center=np.zeros(mesh.d), time_center=0.0, half_width=geometry.hat_half_width
        )
        self._w = PolynomialStack([w for w, _ in self.reference.pairs], mesh.d)
        self._tau = [
            PolynomialStack([tau[i] for _, tau in self.reference.pairs], mesh.d)
            for i in range(mesh.d)
        ]
        self._cache: dict = {}

    @property
    def size(self) -> int:
        return len(self.reference)

    @property
    def degree(self) -> int:
        return self.p

    def basis(self, element: int) -> TrefftzBasis:
        """The localized basis of one element, evaluable at physical points."""
        geometry = self.mesh.geometry
        center = self.mesh.hat_centroid(element)
        t0, t1 = self.mesh.element_times(element)
        return self.reference.localized(center, 0.5 * (t0 + t1), geometry.hat_half_width)

    def tabulate(self, ref_points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """
        Values of all members at element reference coordinates.

        Returns ``W`` of shape (n, m) and physical ``T`` of shape (n, m, d).
        """
        key = (ref_points.shape, ref_points.tobytes())
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        geometry = self.mesh.geometry
        H = geometry.hat_half_width
        xi = (ref_points[:, : self.d] - 0.5) @ geometry.to_hat.T / H
        s = (ref_points[:, self.d] - 0.5) * geometry.dt / H
        W = self._w.evaluate(xi, s)
        T_hat = np.stack([stack.evaluate(xi, s) for stack in self._tau], axis=-1)
        T = T_hat @ self.mesh.tensor.P
        self._cache[key] = (W, T)
        return W, T
