"""
The anisotropy tensor A, its eigendecomposition A = P^T Lambda P, and the
coordinate transformation x_hat = S x with S = Lambda^{-1/2} P that maps the
anisotropic wave system onto an isotropic one.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from trefftz_dg.errors import (
    DimensionMismatchError,
    NotPositiveDefiniteError,
    NotSymmetricError,
)
from trefftz_dg.polynomial import SpaceTimePolynomial

log = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12
POSITIVITY_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class AnisotropyTensor:
    """
    Symmetric positive-definite anisotropy matrix with its decomposition.

    Attributes
    ----------
    A : np.ndarray
        The (d, d) matrix.
    P : np.ndarray
        Orthogonal matrix with det(P) = +1 whose rows are eigenvectors of A.
    Lambda : np.ndarray
        Ascending eigenvalues.
    S, S_inv : np.ndarray
        ``Lambda^{-1/2} P`` and its inverse ``P^T Lambda^{1/2}``.
    rho : float
        Condition number ``lambda_max / lambda_min``.
    scale : float
        Factor the input matrix was divided by, 1 if it was not normalized.
    """

    A: np.ndarray
    P: np.ndarray
    Lambda: np.ndarray
    S: np.ndarray
    S_inv: np.ndarray
    rho: float
    scale: float = 1.0

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def lambda_min(self) -> float:
        return float(self.Lambda[0])

    @property
    def lambda_max(self) -> float:
        return float(self.Lambda[-1])

    def power(self, s: float) -> np.ndarray:
        """Matrix power ``A^s = P^T Lambda^s P``."""
        return self.P.T @ np.diag(self.Lambda**s) @ self.P

    @property
    def sqrt(self) -> np.ndarray:
        return self.power(0.5)

    def to_hat(self, x) -> np.ndarray:
        """Map physical point(s) of shape (..., d) to hat coordinates."""
        return np.asarray(x, dtype=float) @ self.S.T

    def from_hat(self, x_hat) -> np.ndarray:
        return np.asarray(x_hat, dtype=float) @ self.S_inv.T

    def pull_fields(self, v_hat, sigma_hat) -> tuple[np.ndarray, np.ndarray]:
        """Hat fields to physical fields: v = v_hat, sigma = P^T sigma_hat."""
        return np.asarray(v_hat, dtype=float), np.asarray(sigma_hat, dtype=float) @ self.P

    def push_fields(self, v, sigma) -> tuple[np.ndarray, np.ndarray]:
        """Physical fields to hat fields: v_hat = v, sigma_hat = P sigma."""
        return np.asarray(v, dtype=float), np.asarray(sigma, dtype=float) @ self.P.T

    def neumann_scaling(self, normal) -> np.ndarray:
        """``|Lambda^{1/2} P n|`` for physical unit normal(s) of shape (..., d)."""
        return np.linalg.norm(np.asarray(normal) @ (np.diag(np.sqrt(self.Lambda)) @ self.P).T, axis=-1)

    def hat_normal(self, normal) -> np.ndarray:
        """Unit normal of the image face in hat coordinates."""
        mapped = np.asarray(normal) @ (np.diag(np.sqrt(self.Lambda)) @ self.P).T
        return mapped / np.linalg.norm(mapped, axis=-1, keepdims=True)


def _check_square(A: np.ndarray) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(f"Anisotropy matrix must be square, got shape {A.shape}")
    if not 1 <= A.shape[0] <= 3:
        raise DimensionMismatchError(f"Spatial dimension must be 1, 2 or 3, got {A.shape[0]}")
    return A


def decompose(A, scale: float = 1.0) -> AnisotropyTensor:
    """
    Eigendecompose a symmetric positive-definite matrix.

    Eigenvalues are sorted ascending. Each eigenvector is signed so that its
    first nonzero entry is positive; if the resulting P has determinant -1 the
    last eigenvector is flipped.

    Parameters
    ----------
    A : array_like
        Symmetric (d, d) matrix, d <= 3.
    scale : float, optional
        Normalization factor to record on the tensor, by default 1.

    Returns
    -------
    AnisotropyTensor
    """
    A = _check_square(A)
    asymmetry = np.max(np.abs(A - A.T))
    if asymmetry > SYMMETRY_TOL:
        raise NotSymmetricError(f"Matrix is not symmetric (max |A - A^T| = {asymmetry:.3e})")
    A = 0.5 * (A + A.T)

    eigenvalues, eigenvectors = scipy.linalg.eigh(A)
    tolerance = POSITIVITY_TOL * max(1.0, np.max(np.abs(eigenvalues)))
    if eigenvalues[0] <= tolerance:
        raise NotPositiveDefiniteError(
            f"Matrix is not positive definite (smallest eigenvalue {eigenvalues[0]:.3e})"
        )

    P = eigenvectors.T.copy()
    for row in P:
        nonzero = np.flatnonzero(np.abs(row) > 1e-14)
        if row[nonzero[0]] < 0:
            row *= -1.0
    if np.linalg.det(P) < 0:
        P[-1] *= -1.0

    S = np.diag(eigenvalues**-0.5) @ P
    S_inv = P.T @ np.diag(eigenvalues**0.5)
    rho = float(eigenvalues[-1] / eigenvalues[0])
    return AnisotropyTensor(A=A, P=P, Lambda=eigenvalues, S=S, S_inv=S_inv, rho=rho, scale=scale)


def normalize(A) -> tuple[np.ndarray, float]:
    """
    Divide A by its largest eigenvalue.

    Returns
    -------
    tuple[np.ndarray, float]
        The normalized matrix and the scale factor that was divided out.
    """
    tensor = decompose(A)
    scale = tensor.lambda_max
    return tensor.A / scale, scale


def make_tensor(A) -> AnisotropyTensor:
    """Normalize then decompose, recording the scale factor."""
    normalized, scale = normalize(A)
    tensor = decompose(normalized, scale=scale)
    log.debug(f"Anisotropy tensor: eigenvalues {tensor.Lambda}, rho {tensor.rho:.4g}")
    return tensor


def rotated_family_matrix(
    d: int,
    lambda1: float,
    lambda2: float = 1.0,
    a: float = 1 / np.sqrt(2),
    b: float = 1 / np.sqrt(2),
    lambda3: float = 1.0,
) -> np.ndarray:
    """
    The experiment family of anisotropy matrices.

    In 2D::

        [[l1^2 a^2 + l2^2 b^2, a b (l2 - l1)],
         [a b (l2 - l1),       l1^2 b^2 + l2^2 a^2]]

    In 3D the same block is padded with a third axis of eigenvalue ``lambda3`` (1 in
    the experiments). In 1D the matrix is [[1]].
    """
    if d == 1:
        return np.eye(1)
    if d not in (2, 3):
        raise DimensionMismatchError(f"No anisotropy family for dimension {d}")
    block = np.array(
        [
            [lambda1**2 * a**2 + lambda2**2 * b**2, a * b * (lambda2 - lambda1)],
            [a * b * (lambda2 - lambda1), lambda1**2 * b**2 + lambda2**2 * a**2],
        ]
    )
    A = np.eye(d)
    A[:2, :2] = block
    if d == 3:
        A[2, 2] = lambda3
    return A


def random_spd(d: int, rng: np.random.Generator, max_rho: float = 100.0) -> np.ndarray:
    """Random SPD matrix with condition number at most ``max_rho``."""
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    eigenvalues = np.exp(rng.uniform(-np.log(max_rho), 0.0, size=d))
    eigenvalues[-1] = 1.0
    eigenvalues[0] = max(eigenvalues[0], 1.0 / max_rho)
    return Q @ np.diag(eigenvalues) @ Q.T


def check_transform_identities(
    tensor: AnisotropyTensor,
    v_hat: SpaceTimePolynomial,
    sigma_hat: Sequence[SpaceTimePolynomial],
    points,
    t=0.0,
) -> float:
    """
    Largest absolute residual of the chain-rule identities

        A^{1/2} grad v = P^T grad_hat v_hat,
        div(A^{1/2} sigma) = div_hat sigma_hat,

    where v(x, t) = v_hat(Sx, t) and sigma(x, t) = P^T sigma_hat(Sx, t). The
    physical derivatives are exact derivatives of the composed polynomials.
    """
    d = tensor.d
    if v_hat.d != d or len(sigma_hat) != d:
        raise DimensionMismatchError(f"Fields do not match the tensor dimension {d}")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    hat_points = tensor.to_hat(points)
    sqrt_a = tensor.sqrt

    v = v_hat.compose_linear(tensor.S)
    grad_v = np.column_stack([g.evaluate(points, t) for g in v.gradient()])
    grad_hat = np.column_stack([g.evaluate(hat_points, t) for g in v_hat.gradient()])
    gradient_residual = np.max(np.abs(grad_v @ sqrt_a.T - grad_hat @ tensor.P))

    composed = [s.compose_linear(tensor.S) for s in sigma_hat]
    # sigma_k = sum_m P[m, k] sigma_hat_m, then flux_i = sum_k sqrt_a[i, k] sigma_k
    flux = []
    for i in range(d):
        component = SpaceTimePolynomial(d)
        for k in range(d):
            for m in range(d):
                component = component + composed[m] * float(sqrt_a[i, k] * tensor.P[m, k])
        flux.append(component)
    divergence = sum(flux[i].derivative(i).evaluate(points, t) for i in range(d))
    divergence_hat = sum(sigma_hat[i].derivative(i).evaluate(hat_points, t) for i in range(d))
    divergence_residual = np.max(np.abs(divergence - divergence_hat))

    return float(max(gradient_residual, divergence_residual))
