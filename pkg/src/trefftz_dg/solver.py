"""
Slab-by-slab solution of the assembled systems and of the local problems.
"""

import hashlib
import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg
from tqdm import tqdm

from trefftz_dg.assembly import (
    DEFAULT_PATCH_SIZE,
    OVERLAPPING,
    BlockSystem,
    FluxParameters,
    assemble_local,
)
from trefftz_dg.errors import SingularBlockError

log = logging.getLogger(__name__)

DENSE_LIMIT = 4000
PIVOT_TOL = 1e-14
RESIDUAL_TOL = 1e-10


@dataclass(eq=False)
class DiscreteSolution:
    """
    Per-element coefficients of a discrete field.

    ``coefficients`` has shape (n_elements, family.size). Values are always
    returned in physical form; for hat-frame solves the Trefftz family maps
    tau back with P^T at x_hat = S x.
    """

    mesh: object
    family: object
    coefficients: np.ndarray
    method: str
    frame: str = "physical"

    @property
    def map_back(self) -> bool:
        return self.frame == "hat"

    @property
    def dofs(self) -> int:
        return int(self.coefficients.size)

    def trace(self, element: int, ref_points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``w`` (n,) and ``tau`` (n, d) at reference points of ``element``."""
        W, T = self.family.tabulate(ref_points)
        c = self.coefficients[element]
        return W @ c, np.einsum("qmk,m->qk", T, c)

    def evaluate(self, x, t) -> tuple[np.ndarray, np.ndarray]:
        """Values at physical points; slab-boundary points take the earlier slab."""
        elements, ref = self.mesh.locate(x, t)
        v = np.empty(elements.size)
        sigma = np.empty((elements.size, self.mesh.d))
        for element in np.unique(elements):
            mask = elements == element
            W, T = self.family.tabulate(np.ascontiguousarray(ref[mask]))
            c = self.coefficients[element]
            v[mask] = W @ c
            sigma[mask] = np.einsum("qmk,m->qk", T, c)
        return v, sigma


def _digest(matrix) -> str:
    h = hashlib.blake2b(digest_size=16)
    if sp.issparse(matrix):
        matrix = matrix.tocsr()
        for array in (matrix.indptr, matrix.indices, matrix.data):
            h.update(np.ascontiguousarray(array).tobytes())
    else:
        h.update(np.ascontiguousarray(matrix).tobytes())
    h.update(str(matrix.shape).encode())
    return h.hexdigest()


class BlockFactorization:
    """
    LU factorization with partial pivoting of one square block: dense
    (LAPACK) up to ``DENSE_LIMIT`` unknowns, SuperLU beyond.
    """

    def __init__(self, matrix, slab: int):
        self.slab = slab
        self.shape = matrix.shape
        if matrix.shape[0] != matrix.shape[1]:
            raise SingularBlockError(slab, f"block of shape {matrix.shape} is not square")
        dense = not sp.issparse(matrix) or matrix.shape[0] <= DENSE_LIMIT
        norm = float(np.max(np.abs(matrix).sum(axis=1))) if matrix.shape[0] else 0.0
        if norm == 0.0:
            raise SingularBlockError(slab, "block is identically zero")
        if dense:
            array = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                self._lu = scipy.linalg.lu_factor(array)
            pivots = np.abs(np.diag(self._lu[0]))
            self._solve = lambda b: scipy.linalg.lu_solve(self._lu, b)
        else:
            try:
                self._lu = scipy.sparse.linalg.splu(matrix.tocsc())
            except RuntimeError as e:
                raise SingularBlockError(slab, str(e)) from e
            pivots = np.abs(self._lu.U.diagonal())
            self._solve = self._lu.solve
        smallest = float(pivots.min())
        if smallest < PIVOT_TOL * norm:
            raise SingularBlockError(
                slab, f"pivot {smallest:.3e} below {PIVOT_TOL:g} x block norm {norm:.3e}"
            )
        self.dense = dense

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self._solve(rhs)


def _check_residual(matrix, x, b, slab: int) -> float:
    residual = float(np.linalg.norm(matrix @ x - b))
    scale = float(np.linalg.norm(b))
    relative = residual / scale if scale > 0 else residual
    if relative > RESIDUAL_TOL:
        log.warning(f"Slab {slab}: relative residual {relative:.3e} exceeds {RESIDUAL_TOL:g}")
    else:
        log.debug(f"Slab {slab}: relative residual {relative:.3e}")
    return relative


def solve(system: BlockSystem, rhs: list[np.ndarray] | None = None, progress: bool = False):
    """
    Forward substitution over slabs.

    Each slab solves ``D_n x_n = b_n - C_n x_{n-1}``; identical diagonal
    blocks share one factorization.

    Parameters
    ----------
    system : BlockSystem
    rhs : list[np.ndarray], optional
        Replacement right-hand sides, e.g. the load of the nonhomogeneous scheme.
    progress : bool, optional
        Show a progress bar over slabs.

    Returns
    -------
    DiscreteSolution
    """
    rhs = system.rhs if rhs is None else rhs
    mesh = system.mesh
    factorizations: dict[str, BlockFactorization] = {}
    x_previous = None
    blocks = []
    for n in tqdm(range(system.n_slabs), desc="slabs", disable=not progress, leave=False):
        diagonal = system.diagonal[n]
        key = _digest(diagonal)
        factorization = factorizations.get(key)
        if factorization is None:
            factorization = factorizations[key] = BlockFactorization(diagonal, n)
        else:
            log.debug(f"Slab {n}: reusing factorization of an identical block")
        b = rhs[n].copy()
        if n > 0 and system.coupling[n] is not None:
            b -= system.coupling[n] @ x_previous
        x = factorization.solve(b)
        _check_residual(diagonal, x, b, n)
        blocks.append(x.reshape(mesh.n_cells, system.block_size))
        x_previous = x
    coefficients = np.concatenate(blocks, axis=0)
    return DiscreteSolution(
        mesh=mesh,
        family=system.family,
        coefficients=coefficients,
        method=system.method,
        frame=system.frame.name,
    )


def solve_particular(
    mesh,
    q: int,
    source,
    flux: FluxParameters | None = None,
    mode: str = OVERLAPPING,
    size: int = DEFAULT_PATCH_SIZE,
    enlargement: float = 1.0,
    order: int | None = None,
) -> DiscreteSolution:
    """
    Piecewise Q_q particular solution of the nonhomogeneous system.

    Overlapping mode solves one problem on the patch of ``size`` cells per
    axis around every element and keeps its restriction to the element;
    nonoverlapping mode solves one DG problem per slab. Patches of the same
    shape share a matrix, so one factorization serves all their right-hand
    sides.
    """
    flux = flux or FluxParameters()
    local = assemble_local(mesh, q, source, flux, mode, size, enlargement, order)
    m = local.family.size
    groups: dict[tuple[int, ...], list] = {}
    for patch in local.patches:
        groups.setdefault(patch.counts, []).append(patch)
    coefficients = np.zeros((mesh.n_elements, m))
    for counts, patches in groups.items():
        matrix = local.matrices[counts]
        rhs = np.column_stack([local.rhs(patch) for patch in patches])
        solution = BlockFactorization(matrix, slab=0).solve(rhs)
        _check_residual(matrix, solution, rhs, slab=0)
        for column, patch in enumerate(patches):
            blocks = solution[:, column].reshape(-1, m)
            coefficients[patch.elements(mesh.n_cells)[patch.keep]] = blocks[patch.keep]
    log.info(
        f"Particular solution ({mode}, q={q}): {len(local.patches)} local problems, "
        f"{coefficients.size} coefficients"
    )
    return DiscreteSolution(mesh=mesh, family=local.family, coefficients=coefficients, method="local")
