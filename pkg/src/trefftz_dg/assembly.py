"""
Assembly of the space-time Trefftz DG forms.

Matrix entries are ``M[i, j] = A(phi_j; phi_i)`` with trial ``j`` and test
``i``. Because the space-like fluxes are upwind in time, slab ``n`` only
couples to itself (diagonal block) and to the top traces of slab ``n - 1``
(coupling block).

Every kernel below works on tables ``W`` (n, m) and ``T`` (n, m, d) of values
at quadrature points. A single trace (w, tau) of a non-Trefftz field enters as
a table with one column.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from trefftz_dg.anisotropy import AnisotropyTensor
from trefftz_dg.errors import DegreeMismatchError, DimensionMismatchError, MissingBoundaryDataError
from trefftz_dg.local_basis import LegendreFamily
from trefftz_dg.mesh import FaceKind, FaceRecord, SpaceTimeMesh
from trefftz_dg.quadrature import default_order, embed_face_points, rule_for, tensor_rule

log = logging.getLogger(__name__)

# Sign of the average terms on time-like faces.
AVERAGE_SIGN = 1.0

OVERLAPPING = "overlapping"
NONOVERLAPPING = "nonoverlapping"
LOCAL_MODES = (OVERLAPPING, NONOVERLAPPING)
DEFAULT_PATCH_SIZE = 5


@dataclass(frozen=True)
class FluxParameters:
    alpha: float = 1.0
    beta: float = 1.0
    delta: float = 0.5

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"Flux parameter alpha must be positive, got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"Flux parameter beta must be positive, got {self.beta}")


@dataclass(frozen=True, eq=False)
class FormFrame:
    """
    Coordinate frame the form is integrated in.

    The physical frame carries the A^{1/2} and A^{delta + 1/2} weights; the hat
    frame is isotropic, rotates fluxes by P, integrates over hat measures and
    weights Neumann terms with |Lambda^{1/2} P n|.
    """

    name: str
    tensor: AnisotropyTensor
    sqrt_a: np.ndarray
    penalty_a: np.ndarray
    average_a: np.ndarray
    rotation: np.ndarray
    c: float = 1.0

    @property
    def is_hat(self) -> bool:
        return self.name == "hat"

    def rotate(self, T: np.ndarray) -> np.ndarray:
        return T @ self.rotation.T

    def face_measure(self, face: FaceRecord) -> float:
        return face.hat_measure if self.is_hat else face.measure

    def element_measure(self, mesh: SpaceTimeMesh) -> float:
        geometry = mesh.geometry
        volume = geometry.hat_volume if self.is_hat else geometry.volume
        return volume * geometry.dt

    def normal(self, face: FaceRecord) -> np.ndarray:
        return face.hat_normal if self.is_hat else face.normal

    def conormal(self, face: FaceRecord) -> np.ndarray:
        return self.sqrt_a @ self.normal(face)

    def penalty(self, face: FaceRecord) -> float:
        n = self.normal(face)
        return float(n @ self.penalty_a @ n)

    def neumann_weight(self, face: FaceRecord) -> float:
        if not self.is_hat:
            return 1.0
        return float(self.tensor.neumann_scaling(face.normal))


def physical_frame(tensor: AnisotropyTensor, flux: FluxParameters, c: float = 1.0) -> FormFrame:
    return FormFrame(
        name="physical",
        tensor=tensor,
        sqrt_a=tensor.sqrt,
        penalty_a=tensor.power(flux.delta + 0.5),
        average_a=tensor.power(0.5 - flux.delta),
        rotation=np.eye(tensor.d),
        c=c,
    )


def hat_frame(tensor: AnisotropyTensor, flux: FluxParameters, c: float = 1.0) -> FormFrame:
    identity = np.eye(tensor.d)
    return FormFrame(
        name="hat",
        tensor=tensor,
        sqrt_a=identity,
        penalty_a=identity,
        average_a=identity,
        rotation=tensor.P,
        c=c,
    )


def _inner(a: np.ndarray, wq: np.ndarray, b: np.ndarray) -> np.ndarray:
    """sum_q wq a[q, i] b[q, j]."""
    return (a * wq[:, None]).T @ b


def mass_block(test, trial, wq, c: float = 1.0) -> np.ndarray:
    """c^{-2} w_i v_j + tau_i . sigma_j on a space-like face."""
    W_i, T_i = test
    W_j, T_j = trial
    return c**-2 * _inner(W_i, wq, W_j) + np.einsum("q,qik,qjk->ij", wq, T_i, T_j)


def time_like_blocks(minus, plus, trial_minus, trial_plus, wq, an, gamma, flux: FluxParameters):
    """
    Blocks ``B[a][b]`` (test side a, trial side b; 0 = minus, 1 = plus) of the
    central-plus-penalty flux on an internal time-like face with normal
    pointing from minus to plus.
    """
    tests = [minus, plus]
    trials = [trial_minus, trial_plus]
    signs = (1.0, -1.0)
    blocks = [[None, None], [None, None]]
    for a, (W_a, T_a) in enumerate(tests):
        s_a = T_a @ an
        for b, (W_b, T_b) in enumerate(trials):
            s_b = T_b @ an
            average = 0.5 * AVERAGE_SIGN * (_inner(s_a, wq, W_b) + _inner(W_a, wq, s_b))
            penalty = flux.alpha * gamma * _inner(W_a, wq, W_b) + flux.beta * _inner(s_a, wq, s_b)
            blocks[a][b] = signs[a] * average + signs[a] * signs[b] * penalty
    return blocks


def dirichlet_block(test, trial, wq, an, gamma, flux: FluxParameters) -> np.ndarray:
    W_i, T_i = test
    W_j, T_j = trial
    return _inner(W_i, wq, T_j @ an) + flux.alpha * gamma * _inner(W_i, wq, W_j)


def neumann_block(test, trial, wq, an, flux: FluxParameters, weight: float = 1.0) -> np.ndarray:
    W_i, T_i = test
    W_j, T_j = trial
    s_i = T_i @ an
    return _inner(s_i, wq, W_j) + flux.beta * weight * _inner(s_i, wq, T_j @ an)


def volume_block(test_derivatives, trial, wq, sqrt_a, c: float = 1.0) -> np.ndarray:
    """
    -(sigma_j . (d_t tau_i + A^{1/2} grad w_i) + v_j (div(A^{1/2} tau_i) + c^{-2} d_t w_i)).
    """
    W_j, T_j = trial
    G = test_derivatives["T_t"] + test_derivatives["W_x"] @ sqrt_a.T
    H = np.einsum("qilk,kl->qi", test_derivatives["T_x"], sqrt_a) + c**-2 * test_derivatives["W_t"]
    return -(np.einsum("q,qik,qjk->ij", wq, G, T_j) + _inner(H, wq, W_j))


@dataclass(eq=False)
class FaceTables:
    face: FaceRecord
    points: np.ndarray
    plus_points: np.ndarray | None
    wq: np.ndarray
    minus: tuple[np.ndarray, np.ndarray]
    plus: tuple[np.ndarray, np.ndarray] | None


def face_tables(mesh, family, frame: FormFrame, face: FaceRecord, order: int) -> FaceTables:
    """Basis tables on both sides of a face, with ``T`` in the frame."""
    rule = rule_for(mesh, face, order)
    wq = rule.weights * frame.face_measure(face)
    W, T = family.tabulate(rule.element_points)
    plus_points, plus = None, None
    if face.plus is not None:
        plus_points = embed_face_points(rule.points, face.plus_face, mesh.d)
        W_plus, T_plus = family.tabulate(plus_points)
        plus = (W_plus, frame.rotate(T_plus))
    return FaceTables(
        face=face,
        points=rule.element_points,
        plus_points=plus_points,
        wq=wq,
        minus=(W, frame.rotate(T)),
        plus=plus,
    )


def trace_table(trace_field, element: int, ref_points: np.ndarray, frame: FormFrame):
    """One-column table of a field's trace, rotated into the frame."""
    w, tau = trace_field.trace(element, ref_points)
    return w[:, None], frame.rotate(tau)[:, None, :]


@dataclass(eq=False)
class BlockSystem:
    """
    Slab-block form of the global system.

    Slab ``n`` solves ``diagonal[n] x_n = rhs[n] - coupling[n] x_{n-1}``;
    ``coupling[0]`` is None. Unknowns of element ``e`` occupy columns
    ``cell * m .. (cell + 1) * m`` of its slab vector.
    """

    mesh: SpaceTimeMesh
    family: object
    frame: FormFrame
    flux: FluxParameters
    method: str
    diagonal: list[sp.csr_matrix] = field(default_factory=list)
    coupling: list[sp.csr_matrix | None] = field(default_factory=list)
    rhs: list[np.ndarray] = field(default_factory=list)

    @property
    def block_size(self) -> int:
        return self.family.size

    @property
    def slab_size(self) -> int:
        return self.mesh.n_cells * self.block_size

    @property
    def n_slabs(self) -> int:
        return len(self.diagonal)

    @property
    def dofs(self) -> int:
        return self.mesh.n_elements * self.block_size

    def local_columns(self, element: int) -> slice:
        cell = self.mesh.elements[element].cell
        return slice(cell * self.block_size, (cell + 1) * self.block_size)

    def columns(self, element: int) -> slice:
        return slice(element * self.block_size, (element + 1) * self.block_size)

    def matrix(self) -> sp.csr_matrix:
        """The global block lower-bidiagonal matrix."""
        grid = [[None] * self.n_slabs for _ in range(self.n_slabs)]
        for n in range(self.n_slabs):
            grid[n][n] = self.diagonal[n]
            if n > 0:
                grid[n][n - 1] = self.coupling[n]
        return sp.bmat(grid, format="csr")

    def rhs_vector(self) -> np.ndarray:
        return np.concatenate(self.rhs)

    def bilinear(self, u: np.ndarray, w: np.ndarray) -> float:
        """A(u; w) for global coefficient vectors."""
        return float(w @ (self.matrix() @ u))


class _SlabAccumulator:
    def __init__(self, size: int):
        self.size = size
        self.rows: list[np.ndarray] = []
        self.cols: list[np.ndarray] = []
        self.values: list[np.ndarray] = []

    def add(self, rows: slice, cols: slice, block: np.ndarray):
        r = np.arange(rows.start, rows.stop)
        c = np.arange(cols.start, cols.stop)
        self.rows.append(np.repeat(r, c.size))
        self.cols.append(np.tile(c, r.size))
        self.values.append(block.ravel())

    def tocsr(self) -> sp.csr_matrix:
        if not self.values:
            return sp.csr_matrix((self.size, self.size))
        matrix = sp.coo_matrix(
            (np.concatenate(self.values), (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=(self.size, self.size),
        )
        return matrix.tocsr()


def _check_data(mesh: SpaceTimeMesh, case):
    if case.d != mesh.d:
        raise DimensionMismatchError(f"Case dimension {case.d} differs from mesh dimension {mesh.d}")
    kinds = {face.kind for face in mesh.faces}
    required = {
        FaceKind.INITIAL: "initial",
        FaceKind.DIRICHLET: "dirichlet",
        FaceKind.NEUMANN: "neumann",
    }
    for kind, family in required.items():
        if kind in kinds and family not in case.data_families:
            raise MissingBoundaryDataError(f"Case '{case.id}' provides no {family} data")


def _face_load(system: BlockSystem, case, tables: FaceTables) -> np.ndarray:
    """Load functional l(phi_i) restricted to one boundary face."""
    mesh, frame, flux = system.mesh, system.frame, system.flux
    face = tables.face
    W, T = tables.minus
    wq = tables.wq
    x, t = mesh.physical_points(face.minus, tables.points)
    if face.kind is FaceKind.INITIAL:
        v0 = case.v0(x)
        sigma0 = frame.rotate(case.sigma0(x))
        return frame.c**-2 * W.T @ (wq * v0) + np.einsum("q,qik,qk->i", wq, T, sigma0)
    an = frame.conormal(face)
    s = T @ an
    if face.kind is FaceKind.DIRICHLET:
        g = case.g_dirichlet(x, t)
        return flux.alpha * frame.penalty(face) * W.T @ (wq * g) - s.T @ (wq * g)
    if face.kind is FaceKind.NEUMANN:
        g = case.g_neumann(x, t, face.normal)
        weight = frame.neumann_weight(face)
        return flux.beta * s.T @ (wq * g) - W.T @ (wq * g) / weight
    return np.zeros(W.shape[1])


def _assemble(mesh, family, frame: FormFrame, flux, case, order, method) -> BlockSystem:
    _check_data(mesh, case)
    order = order or default_order(family.degree)
    system = BlockSystem(mesh=mesh, family=family, frame=frame, flux=flux, method=method)
    size = system.slab_size
    cache: dict = {}

    for slab in range(mesh.n_slabs):
        diagonal = _SlabAccumulator(size)
        coupling = _SlabAccumulator(size)
        rhs = np.zeros(size)
        for face_id in mesh.faces_by_slab[slab]:
            face = mesh.faces[face_id]
            tables = face_tables(mesh, family, frame, face, order)
            minus = system.local_columns(face.minus)
            key = (face.kind, face.minus_face)
            if face.kind is FaceKind.TIME_LIKE:
                if key not in cache:
                    cache[key] = time_like_blocks(
                        tables.minus,
                        tables.plus,
                        tables.minus,
                        tables.plus,
                        tables.wq,
                        frame.conormal(face),
                        frame.penalty(face),
                        flux,
                    )
                plus = system.local_columns(face.plus)
                sides = (minus, plus)
                for a in range(2):
                    for b in range(2):
                        diagonal.add(sides[a], sides[b], cache[key][a][b])
            elif face.kind is FaceKind.DIRICHLET:
                if key not in cache:
                    cache[key] = dirichlet_block(
                        tables.minus,
                        tables.minus,
                        tables.wq,
                        frame.conormal(face),
                        frame.penalty(face),
                        flux,
                    )
                diagonal.add(minus, minus, cache[key])
                rhs[minus] += _face_load(system, case, tables)
            elif face.kind is FaceKind.NEUMANN:
                if key not in cache:
                    cache[key] = neumann_block(
                        tables.minus,
                        tables.minus,
                        tables.wq,
                        frame.conormal(face),
                        flux,
                        frame.neumann_weight(face),
                    )
                diagonal.add(minus, minus, cache[key])
                rhs[minus] += _face_load(system, case, tables)
            elif face.kind is FaceKind.INITIAL:
                rhs[minus] += _face_load(system, case, tables)
            else:
                mass_key = ("top", face.minus_face)
                if mass_key not in cache:
                    cache[mass_key] = mass_block(tables.minus, tables.minus, tables.wq, frame.c)
                diagonal.add(minus, minus, cache[mass_key])
                if face.kind is FaceKind.SPACE_LIKE:
                    cross_key = ("cross", face.plus_face)
                    if cross_key not in cache:
                        cache[cross_key] = -mass_block(tables.plus, tables.minus, tables.wq, frame.c)
                    coupling.add(system.local_columns(face.plus), minus, cache[cross_key])
        system.diagonal.append(diagonal.tocsr())
        system.rhs.append(rhs)
        # coupling assembled in slab n feeds slab n + 1
        system.coupling.append(coupling.tocsr())

    system.coupling = [None] + system.coupling[:-1]
    log.info(
        f"Assembled {method} ({frame.name} frame): {mesh.n_slabs} slabs of size {size}, "
        f"{system.dofs} dofs"
    )
    return system


def assemble_method1(mesh, family, flux: FluxParameters, case, order: int | None = None):
    """
    Physical-domain system: all face terms of the form with the A^{1/2} and
    alpha A^delta weights, load from initial and boundary data.
    """
    frame = physical_frame(mesh.tensor, flux, case.c)
    return _assemble(mesh, family, frame, flux, case, order, "method1")


def assemble_method2(mesh, family, flux: FluxParameters, case, order: int | None = None):
    """
    Hat-domain system: isotropic face terms over hat measures with P sigma_0
    initial data and |Lambda^{1/2} P n| weighted Neumann terms.
    """
    frame = hat_frame(mesh.tensor, flux, case.c)
    return _assemble(mesh, family, frame, flux, case, order, "method2")


def assemble_nonhomogeneous_rhs(system: BlockSystem, case, particular, order: int | None = None):
    """
    Right-hand side l(phi_i) + int_Q f phi_i - A(u1; phi_i) of the Trefftz
    correction for a particular solution ``u1``.

    ``particular`` must provide ``trace(element, ref_points)`` and carry a
    coefficient array matching its own family on ``system.mesh``.

    Returns
    -------
    list[np.ndarray]
        One right-hand side per slab.
    """
    mesh, frame, flux, family = system.mesh, system.frame, system.flux, system.family
    coefficients = getattr(particular, "coefficients", None)
    if particular.mesh is not mesh or coefficients is None:
        raise DegreeMismatchError("Particular solution is not defined on the system's mesh")
    if coefficients.shape != (mesh.n_elements, particular.family.size):
        raise DegreeMismatchError(
            f"Particular solution coefficients {coefficients.shape} do not match "
            f"{mesh.n_elements} elements of {particular.family.size} local functions"
        )
    order = order or default_order(max(family.degree, particular.family.degree))
    rhs = [block.copy() for block in system.rhs]

    element_rule = rule_for(mesh, mesh.elements[0], order)
    W_volume, _ = family.tabulate(element_rule.points)
    volume_weights = element_rule.weights * frame.element_measure(mesh)
    for element in mesh.elements:
        x, t = mesh.physical_points(element.id, element_rule.points)
        rhs[element.slab][system.local_columns(element.id)] += W_volume.T @ (volume_weights * case.f(x, t))

    for slab in range(mesh.n_slabs):
        for face_id in mesh.faces_by_slab[slab]:
            face = mesh.faces[face_id]
            if face.kind is FaceKind.INITIAL:
                continue
            tables = face_tables(mesh, family, frame, face, order)
            minus = system.local_columns(face.minus)
            trial_minus = trace_table(particular, face.minus, tables.points, frame)
            if face.kind is FaceKind.TIME_LIKE:
                trial_plus = trace_table(particular, face.plus, tables.plus_points, frame)
                blocks = time_like_blocks(
                    tables.minus,
                    tables.plus,
                    trial_minus,
                    trial_plus,
                    tables.wq,
                    frame.conormal(face),
                    frame.penalty(face),
                    flux,
                )
                plus = system.local_columns(face.plus)
                rhs[slab][minus] -= blocks[0][0][:, 0] + blocks[0][1][:, 0]
                rhs[slab][plus] -= blocks[1][0][:, 0] + blocks[1][1][:, 0]
            elif face.kind is FaceKind.DIRICHLET:
                block = dirichlet_block(
                    tables.minus, trial_minus, tables.wq, frame.conormal(face), frame.penalty(face), flux
                )
                rhs[slab][minus] -= block[:, 0]
            elif face.kind is FaceKind.NEUMANN:
                block = neumann_block(
                    tables.minus,
                    trial_minus,
                    tables.wq,
                    frame.conormal(face),
                    flux,
                    frame.neumann_weight(face),
                )
                rhs[slab][minus] -= block[:, 0]
            else:
                rhs[slab][minus] -= mass_block(tables.minus, trial_minus, tables.wq, frame.c)[:, 0]
                if face.kind is FaceKind.SPACE_LIKE:
                    plus = system.local_columns(face.plus)
                    rhs[slab + 1][plus] += mass_block(tables.plus, trial_minus, tables.wq, frame.c)[:, 0]
    log.debug(f"Nonhomogeneous load assembled over {mesh.n_elements} elements")
    return rhs


@dataclass(frozen=True, eq=False)
class LocalFace:
    """Quadrature on the lower and upper side of a cell box along one axis."""

    lower: np.ndarray
    upper: np.ndarray
    wq: np.ndarray
    normal: np.ndarray


@dataclass(frozen=True, eq=False)
class LocalPatch:
    """
    Cells of one local problem.

    ``cells`` are global cell ids of a box of ``counts`` cells, listed in C
    order over the box; ``keep`` are the box positions whose solution is
    retained.
    """

    slab: int
    counts: tuple[int, ...]
    cells: np.ndarray
    keep: np.ndarray

    def elements(self, n_cells: int) -> np.ndarray:
        return self.slab * n_cells + self.cells


@dataclass(eq=False)
class LocalSystem:
    """
    Local problems of the particular solution.

    ``matrices`` maps each patch shape to its matrix, which only depends on
    the shape. ``load`` has the rows int f w_i of every element, shape
    (n_elements, m); the right-hand side of a patch stacks its elements' rows.
    """

    mesh: SpaceTimeMesh
    family: LegendreFamily
    mode: str
    patches: list[LocalPatch]
    matrices: dict[tuple[int, ...], sp.csr_matrix]
    load: np.ndarray

    def rhs(self, patch: LocalPatch) -> np.ndarray:
        return self.load[patch.elements(self.mesh.n_cells)].ravel()


def _box_faces(mesh, family: LegendreFamily, order: int):
    """
    Lateral sides per axis and the top face of a cell box K*, in element
    reference points. Returns ``(faces, (top_points, top_wq))``.
    """
    d = mesh.d
    geometry = mesh.geometry
    lower, upper = family.box
    width = family.enlargement
    points, weights = tensor_rule(order, d)
    faces = []
    for axis in range(d):
        lateral = geometry.lateral[axis]
        spatial = np.delete(lower, axis) + points[:, : d - 1] * width
        sides = [
            np.column_stack([np.insert(spatial, axis, coordinate, axis=1), points[:, d - 1]])
            for coordinate in (lower[axis], upper[axis])
        ]
        measure = lateral.measure * geometry.dt * width ** (d - 1)
        faces.append(LocalFace(sides[0], sides[1], weights * measure, lateral.normal))
    top = np.column_stack([lower + points * width, np.ones(points.shape[0])])
    return faces, (top, weights * geometry.volume * width**d)


def _local_volume(mesh, family: LegendreFamily, order: int):
    lower, _ = family.box
    d = mesh.d
    points, weights = tensor_rule(order, d + 1)
    scaled = points.copy()
    scaled[:, :d] = lower + points[:, :d] * family.enlargement
    wq = weights * family.enlargement**d * mesh.geometry.volume * mesh.geometry.dt
    return scaled, wq


def local_matrix(
    mesh, family: LegendreFamily, flux: FluxParameters, counts: tuple[int, ...], order: int | None = None
) -> sp.csr_matrix:
    """
    Matrix of the local form on a box of ``counts`` cells of one slab.

    Every cell carries the integration-by-parts volume terms and the top
    mass; neighbouring cells are coupled by the time-like flux and the sides
    of the box get zero-data Dirichlet terms.
    """
    counts = tuple(int(n) for n in counts)
    if len(counts) != mesh.d or min(counts) < 1:
        raise ValueError(f"Patch shape {counts} does not fit a {mesh.d}D mesh")
    if family.enlargement != 1.0 and max(counts) > 1:
        raise ValueError("An enlarged box K* only fits single-cell patches")
    order = order or default_order(family.degree)
    frame = physical_frame(mesh.tensor, flux)
    points, wq = _local_volume(mesh, family, order)
    faces, (top_points, top_wq) = _box_faces(mesh, family, order)
    top = family.tabulate(top_points)
    cell_block = volume_block(
        family.tabulate_derivatives(points), family.tabulate(points), wq, frame.sqrt_a
    ) + mass_block(top, top, top_wq)

    outer, inner = [], []
    for face in faces:
        lower, upper = family.tabulate(face.lower), family.tabulate(face.upper)
        an = frame.sqrt_a @ face.normal
        gamma = float(face.normal @ frame.penalty_a @ face.normal)
        outer.append(
            (
                dirichlet_block(lower, lower, face.wq, -an, gamma, flux),
                dirichlet_block(upper, upper, face.wq, an, gamma, flux),
            )
        )
        inner.append(time_like_blocks(upper, lower, upper, lower, face.wq, an, gamma, flux))

    m = family.size
    accumulator = _SlabAccumulator(int(np.prod(counts)) * m)

    def block(position: int) -> slice:
        return slice(position * m, (position + 1) * m)

    for position, index in enumerate(np.ndindex(*counts)):
        accumulator.add(block(position), block(position), cell_block)
        for axis in range(mesh.d):
            if index[axis] == 0:
                accumulator.add(block(position), block(position), outer[axis][0])
            if index[axis] == counts[axis] - 1:
                accumulator.add(block(position), block(position), outer[axis][1])
                continue
            neighbour = list(index)
            neighbour[axis] += 1
            sides = (block(position), block(int(np.ravel_multi_index(neighbour, counts))))
            for a in range(2):
                for b in range(2):
                    accumulator.add(sides[a], sides[b], inner[axis][a][b])
    return accumulator.tocsr()


def local_load(mesh, family: LegendreFamily, source, order: int | None = None) -> np.ndarray:
    """Rows int_{K*} f w_i per element, shape (n_elements, m). ``source`` is called as ``source(x, t)``."""
    order = order or default_order(family.degree)
    points, wq = _local_volume(mesh, family, order)
    W, _ = family.tabulate(points)
    load = np.empty((mesh.n_elements, family.size))
    for element in mesh.elements:
        x, t = mesh.physical_points(element.id, points)
        load[element.id] = W.T @ (wq * source(x, t))
    return load


def local_patches(mesh, mode: str, size: int = DEFAULT_PATCH_SIZE) -> list[LocalPatch]:
    """
    Cell patches of the local problems.

    Nonoverlapping mode solves one patch per slab covering the whole grid.
    Overlapping mode centres a box of ``size`` cells per axis on every
    element, clipped to the grid, and keeps that element only.
    """
    if mode not in LOCAL_MODES:
        raise ValueError(f"Unknown local mode '{mode}', expected one of {LOCAL_MODES}")
    shape = tuple(mesh.shape)
    if mode == NONOVERLAPPING:
        cells = np.arange(mesh.n_cells)
        return [LocalPatch(slab, shape, cells, cells) for slab in range(mesh.n_slabs)]
    if size < 1 or size % 2 == 0:
        raise ValueError(f"Patch size must be a positive odd number of cells, got {size}")
    radius = size // 2
    upper_index = np.array(shape) - 1
    boxes = []
    for index in np.ndindex(*shape):
        centre = np.array(index)
        lower = np.maximum(centre - radius, 0)
        counts = tuple(int(n) for n in np.minimum(centre + radius, upper_index) - lower + 1)
        positions = np.array(list(np.ndindex(*counts))) + lower
        cells = np.ravel_multi_index(tuple(positions.T), shape)
        keep = np.array([np.ravel_multi_index(tuple(centre - lower), counts)])
        boxes.append((counts, cells, keep))
    return [
        LocalPatch(slab, counts, cells, keep)
        for slab in range(mesh.n_slabs)
        for counts, cells, keep in boxes
    ]


def assemble_local(
    mesh,
    q: int,
    source,
    flux: FluxParameters,
    mode: str = OVERLAPPING,
    size: int = DEFAULT_PATCH_SIZE,
    enlargement: float = 1.0,
    order: int | None = None,
) -> LocalSystem:
    """
    Local Q_q systems for the particular solution with zero initial data at
    the slab bottom and zero Dirichlet data on the sides of each patch.
    """
    if enlargement != 1.0 and (mode == NONOVERLAPPING or size != 1):
        log.warning("Fictitious box enlargement only applies to single-cell patches; ignoring it")
        enlargement = 1.0
    family = LegendreFamily(mesh, q, enlargement)
    patches = local_patches(mesh, mode, size)
    matrices: dict[tuple[int, ...], sp.csr_matrix] = {}
    for patch in patches:
        if patch.counts not in matrices:
            matrices[patch.counts] = local_matrix(mesh, family, flux, patch.counts, order)
    load = local_load(mesh, family, source, order)
    log.info(f"Local {mode} systems: {len(patches)} problems over {len(matrices)} patch shapes")
    return LocalSystem(
        mesh=mesh, family=family, mode=mode, patches=patches, matrices=matrices, load=load
    )
