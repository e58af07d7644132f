"""
Gauss-Legendre rules on reference boxes and their images on mesh entities.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from trefftz_dg.errors import UnknownEntityError, UnsupportedOrderError
from trefftz_dg.mesh import Element, FaceRecord, SpaceTimeMesh

log = logging.getLogger(__name__)

MAX_POINTS = 32


def default_order(p: int, q: int | None = None) -> int:
    """Points per axis for basis degree ``p`` (and local degree ``q``)."""
    return max(p, q or 0) + 3


@lru_cache(maxsize=None)
def gauss_1d(n: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Legendre nodes and weights on [0, 1], exact to degree 2n - 1.
    """
    if not 1 <= n <= MAX_POINTS:
        raise UnsupportedOrderError(f"Gauss rule with {n} points not supported (1..{MAX_POINTS})")
    nodes, weights = np.polynomial.legendre.leggauss(n)
    nodes = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@lru_cache(maxsize=None)
def tensor_rule(n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor-product rule with ``n`` points per axis on [0, 1]^m."""
    nodes, weights = gauss_1d(n)
    if m == 0:
        points, w = np.zeros((1, 0)), np.ones(1)
    else:
        grids = np.meshgrid(*([nodes] * m), indexing="ij")
        points = np.stack([g.ravel() for g in grids], axis=-1)
        w = np.ones(points.shape[0])
        for wg in np.meshgrid(*([weights] * m), indexing="ij"):
            w = w * wg.ravel()
    points.setflags(write=False)
    w.setflags(write=False)
    return points, w


def embed_face_points(face_points: np.ndarray, local_face: int, d: int) -> np.ndarray:
    """
    Element reference coordinates (n, d+1) of points given in the face's own
    reference coordinates.

    Lateral faces ``2*axis + side`` are parametrized by the remaining spatial
    coordinates followed by time; the bottom (``2d``) and top (``2d + 1``)
    faces by the spatial coordinates.
    """
    n = face_points.shape[0]
    if local_face >= 2 * d:
        time = 0.0 if local_face == 2 * d else 1.0
        return np.column_stack([face_points, np.full(n, time)])
    axis, side = divmod(local_face, 2)
    spatial = np.insert(face_points[:, : d - 1], axis, float(side), axis=1)
    return np.column_stack([spatial, face_points[:, d - 1]])


def box_rule(lower, upper, n: int, include_time: bool = True):
    """
    Reference points and weights of a rule on a sub-box of reference
    coordinates, with the spatial part spanning ``[lower, upper]`` per axis and
    time spanning [0, 1]. Weights sum to the box's reference volume.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    m = lower.size + (1 if include_time else 0)
    points, weights = tensor_rule(n, m)
    lo = np.concatenate([lower, [0.0]]) if include_time else lower
    hi = np.concatenate([upper, [1.0]]) if include_time else upper
    return lo + points * (hi - lo), weights * np.prod(hi - lo)


@dataclass(frozen=True)
class QuadratureRule:
    """
    Rule on an element or face.

    ``points`` are in the entity's reference coordinates and ``element_points``
    are the same points in reference coordinates of the (minus-side) element.
    ``weights`` sum to one; multiply by ``measure`` (physical) or
    ``hat_measure`` to integrate.
    """

    points: np.ndarray
    weights: np.ndarray
    measure: float
    hat_measure: float
    element_points: np.ndarray
    target: str

    @property
    def physical_weights(self) -> np.ndarray:
        return self.weights * self.measure

    @property
    def hat_weights(self) -> np.ndarray:
        return self.weights * self.hat_measure


def rule_for(mesh: SpaceTimeMesh, entity, order: int) -> QuadratureRule:
    """
    Tensor-product rule with ``order`` points per axis on an element or face.
    """
    d = mesh.d
    if isinstance(entity, Element):
        points, weights = tensor_rule(order, d + 1)
        geometry = mesh.geometry
        return QuadratureRule(
            points=points,
            weights=weights,
            measure=geometry.volume * geometry.dt,
            hat_measure=geometry.hat_volume * geometry.dt,
            element_points=points,
            target="element",
        )
    if isinstance(entity, FaceRecord):
        points, weights = tensor_rule(order, d)
        return QuadratureRule(
            points=points,
            weights=weights,
            measure=entity.measure,
            hat_measure=entity.hat_measure,
            element_points=embed_face_points(points, entity.minus_face, d),
            target=entity.kind.value,
        )
    raise UnknownEntityError(f"No quadrature rule for entity of type {type(entity).__name__}")
