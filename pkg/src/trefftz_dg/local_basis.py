"""
Tensor-product Legendre spaces Q_q for the local problems of the
nonhomogeneous scheme.

Each field component (v, sigma_1, ..., sigma_d) is expanded in products of
Legendre polynomials of degree <= q in every space-time variable, so a family
has (1 + d) (q + 1)^(d + 1) members. The polynomials live on the fictitious box
K* of an element: a spatial box enlarged by ``enlargement`` about the cell
centroid, with the element's time interval.
"""

import itertools
import logging

import numpy as np
from numpy.polynomial import legendre

from trefftz_dg.errors import UnsupportedOrderError

log = logging.getLogger(__name__)

MAX_LOCAL_DEGREE = 8


def _vander(x: np.ndarray, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Values and first derivatives of L_0..L_q at ``x``, each of shape (n, q + 1)."""
    values = legendre.legvander(x, q)
    derivatives = np.column_stack(
        [legendre.legval(x, legendre.legder(np.eye(q + 1)[i])) for i in range(q + 1)]
    )
    return values, derivatives


class LegendreFamily:
    """
    Q_q basis shared by all elements of a uniform mesh.

    Members are ordered component-major: the first (q + 1)^(d + 1) members are
    the scalar functions for ``v``, followed by those of each ``sigma_k``.
    Tensor indices run over (time, x_1, ..., x_d).

    Parameters
    ----------
    mesh : SpaceTimeMesh
    q : int
        Degree per variable.
    enlargement : float, optional
        Spatial enlargement factor of the fictitious box, by default 1.
    """

    kind = "legendre"

    def __init__(self, mesh, q: int, enlargement: float = 1.0):
        if not 0 <= q <= MAX_LOCAL_DEGREE:
            raise UnsupportedOrderError(f"Local degree {q} not supported (0..{MAX_LOCAL_DEGREE})")
        if enlargement < 1.0:
            raise ValueError(f"Fictitious box enlargement must be >= 1, got {enlargement}")
        self.mesh = mesh
        self.q = q
        self.d = mesh.d
        self.enlargement = float(enlargement)
        self.indices = list(itertools.product(range(q + 1), repeat=self.d + 1))
        self._cache: dict = {}

    @property
    def degree(self) -> int:
        return self.q

    @property
    def scalar_size(self) -> int:
        return len(self.indices)

    @property
    def size(self) -> int:
        return (self.d + 1) * self.scalar_size

    @property
    def box(self) -> tuple[np.ndarray, np.ndarray]:
        """Spatial corners of K* in element reference coordinates."""
        half = 0.5 * self.enlargement
        return np.full(self.d, 0.5 - half), np.full(self.d, 0.5 + half)

    def _local_coordinates(self, ref_points: np.ndarray) -> np.ndarray:
        eta = np.empty_like(ref_points, dtype=float)
        eta[:, : self.d] = (2.0 * ref_points[:, : self.d] - 1.0) / self.enlargement
        eta[:, self.d] = 2.0 * ref_points[:, self.d] - 1.0
        return eta

    def _scalar_tables(self, ref_points: np.ndarray):
        """
        Scalar products and their derivatives with respect to the local
        coordinates, ordered (time, x_1..x_d) in the last axis.
        """
        eta = self._local_coordinates(ref_points)
        # eta columns are (x_1..x_d, t); tensor indices are (t, x_1..x_d)
        order = [self.d] + list(range(self.d))
        tables = [_vander(eta[:, column], self.q) for column in order]
        index = np.array(self.indices)
        values = np.ones((ref_points.shape[0], self.scalar_size))
        for variable, (V, _) in enumerate(tables):
            values *= V[:, index[:, variable]]
        derivatives = np.empty((ref_points.shape[0], self.scalar_size, self.d + 1))
        for variable in range(self.d + 1):
            product = np.ones_like(values)
            for other, (V, dV) in enumerate(tables):
                table = dV if other == variable else V
                product *= table[:, index[:, other]]
            derivatives[:, :, variable] = product
        return values, derivatives

    def _expand(self, scalar: np.ndarray):
        """Scatter (n, s, ...) scalar tables into (W, T) member tables."""
        n, s = scalar.shape[:2]
        tail = scalar.shape[2:]
        W = np.zeros((n, self.size) + tail)
        T = np.zeros((n, self.size, self.d) + tail)
        W[:, :s] = scalar
        for k in range(self.d):
            T[:, (k + 1) * s : (k + 2) * s, k] = scalar
        return W, T

    def tabulate(self, ref_points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``W`` of shape (n, m) and ``T`` of shape (n, m, d) at element reference points."""
        key = ("values", ref_points.shape, ref_points.tobytes())
        cached = self._cache.get(key)
        if cached is None:
            values, _ = self._scalar_tables(ref_points)
            cached = self._cache[key] = self._expand(values)
        return cached

    def tabulate_derivatives(self, ref_points: np.ndarray) -> dict[str, np.ndarray]:
        """
        Physical derivatives of all members.

        Returns a dict with ``W_t`` (n, m), ``W_x`` (n, m, d), ``T_t`` (n, m, d)
        and ``T_x`` (n, m, d, d) where ``T_x[..., l, k]`` is d(tau_l)/d(x_k).
        """
        key = ("derivatives", ref_points.shape, ref_points.tobytes())
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        geometry = self.mesh.geometry
        _, local = self._scalar_tables(ref_points)
        time = local[:, :, 0] * (2.0 / geometry.dt)
        # d/dr = (2 / enlargement) d/d(eta), then grad_x = J^{-T} grad_r
        spatial = local[:, :, 1:] * (2.0 / self.enlargement)
        spatial = spatial @ np.linalg.inv(geometry.to_physical)
        W_t, T_t = self._expand(time)
        W_x, T_x = self._expand(spatial)
        cached = self._cache[key] = {"W_t": W_t, "W_x": W_x, "T_t": T_t, "T_x": T_x}
        return cached
