"""
Tensor-product space-time meshes and their classified face skeleton.

The spatial grid is uniform on an axis-aligned box given either in physical or
in hat coordinates; the cells in the other coordinate system are its images
under S^{-1} or S. Every slab reuses the same spatial grid.
"""

import itertools
import logging
from collections.abc import Iterable
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from trefftz_dg.anisotropy import AnisotropyTensor
from trefftz_dg.errors import InvalidBoundarySpecError, InvalidDomainError

log = logging.getLogger(__name__)

FRAMES = ("physical", "hat")
DIRICHLET = "dirichlet"
NEUMANN = "neumann"
MIXED = "mixed"
BOUNDARY_MODES = (DIRICHLET, NEUMANN, MIXED)


class FaceKind(Enum):
    SPACE_LIKE = "space_like"
    TIME_LIKE = "time_like"
    INITIAL = "initial"
    FINAL = "final"
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


@dataclass(frozen=True)
class Domain:
    """Spatial box ``[lower, upper]`` in ``frame`` coordinates and final time ``T``."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    T: float = 1.0
    frame: str = "physical"

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.shape != upper.shape or lower.ndim != 1 or not 1 <= lower.size <= 3:
            raise InvalidDomainError(f"Box corners {self.lower} and {self.upper} are incompatible")
        if np.any(upper - lower <= 0):
            raise InvalidDomainError(f"Degenerate box [{self.lower}, {self.upper}]")
        if not self.T > 0:
            raise InvalidDomainError(f"Final time must be positive, got {self.T}")
        if self.frame not in FRAMES:
            raise InvalidDomainError(f"Unknown coordinate frame '{self.frame}'")

    @classmethod
    def unit(cls, d: int, frame: str = "physical", T: float = 1.0) -> "Domain":
        return cls(lower=(0.0,) * d, upper=(1.0,) * d, T=T, frame=frame)

    @property
    def d(self) -> int:
        return len(self.lower)


@dataclass(frozen=True)
class BoundarySpec:
    """
    Dirichlet/Neumann assignment of the box sides ``(axis, side)`` with side 0
    the lower and side 1 the upper face, in the box's own frame.
    """

    sides: dict[tuple[int, int], str]

    @classmethod
    def from_sides(
        cls,
        d: int,
        dirichlet: Iterable[tuple[int, int]] = (),
        neumann: Iterable[tuple[int, int]] = (),
    ) -> "BoundarySpec":
        dirichlet = set(map(tuple, dirichlet))
        neumann = set(map(tuple, neumann))
        overlap = dirichlet & neumann
        if overlap:
            raise InvalidBoundarySpecError(f"Sides {sorted(overlap)} are both Dirichlet and Neumann")
        expected = {(axis, side) for axis in range(d) for side in (0, 1)}
        unknown = (dirichlet | neumann) - expected
        if unknown:
            raise InvalidBoundarySpecError(f"Sides {sorted(unknown)} do not exist in dimension {d}")
        missing = expected - dirichlet - neumann
        if missing:
            raise InvalidBoundarySpecError(f"Sides {sorted(missing)} have no boundary condition")
        sides = {s: DIRICHLET for s in dirichlet}
        sides.update({s: NEUMANN for s in neumann})
        return cls(sides=sides)

    @classmethod
    def from_mode(cls, mode: str, d: int) -> "BoundarySpec":
        """``dirichlet``, ``neumann``, or ``mixed`` (Dirichlet on x_1 = 0, 1)."""
        all_sides = [(axis, side) for axis in range(d) for side in (0, 1)]
        if mode == DIRICHLET:
            return cls.from_sides(d, dirichlet=all_sides)
        if mode == NEUMANN:
            return cls.from_sides(d, neumann=all_sides)
        if mode == MIXED:
            return cls.from_sides(
                d,
                dirichlet=[s for s in all_sides if s[0] == 0],
                neumann=[s for s in all_sides if s[0] != 0],
            )
        raise InvalidBoundarySpecError(f"Unknown boundary mode '{mode}'")

    def kind(self, axis: int, side: int) -> FaceKind:
        return FaceKind.DIRICHLET if self.sides[(axis, side)] == DIRICHLET else FaceKind.NEUMANN


@dataclass(frozen=True)
class LateralGeometry:
    measure: float  # spatial (d-1)-measure of the face
    hat_measure: float
    normal: np.ndarray  # unit physical normal of the upper face
    hat_normal: np.ndarray


@dataclass(frozen=True)
class CellGeometry:
    """
    Shared geometry of all elements: x = x0 + to_physical @ r and
    x_hat = x0_hat + to_hat @ r for spatial reference coordinates r in [0, 1]^d.
    """

    width: np.ndarray
    to_physical: np.ndarray
    to_hat: np.ndarray
    dt: float
    volume: float
    hat_volume: float
    diameter: float
    hat_diameter: float
    lateral: tuple[LateralGeometry, ...]

    @property
    def hat_half_width(self) -> float:
        return 0.5 * self.hat_diameter


@dataclass(frozen=True)
class Element:
    id: int
    cell: int
    slab: int
    index: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class FaceRecord:
    """
    One face of the skeleton.

    For space-like faces ``minus`` is the earlier element; for time-like faces
    ``minus`` is the element on the lower side along ``axis`` and ``normal``
    points from minus to plus. Boundary faces carry the outward normal.
    ``minus_face``/``plus_face`` are local face indices (lateral ``2*axis + side``,
    bottom ``2d``, top ``2d + 1``).
    """

    id: int
    kind: FaceKind
    minus: int
    minus_face: int
    measure: float
    hat_measure: float
    normal: np.ndarray
    hat_normal: np.ndarray
    nt: float
    slab: int
    plus: int | None = None
    plus_face: int | None = None
    axis: int | None = None
    time: float | None = None


def _diameter(J: np.ndarray) -> float:
    d = J.shape[0]
    return max(
        float(np.linalg.norm(J @ np.array(signs))) for signs in itertools.product((-1, 1), repeat=d)
    )


def _lateral_geometry(M_phys: np.ndarray, M_hat: np.ndarray, width: np.ndarray):
    d = width.size
    faces = []
    for axis in range(d):
        reference = float(np.prod(np.delete(width, axis)))
        measures, normals = [], []
        for M in (M_phys, M_hat):
            conormal = np.linalg.inv(M).T[:, axis]
            norm = np.linalg.norm(conormal)
            measures.append(abs(np.linalg.det(M)) * norm * reference)
            normals.append(conormal / norm)
        faces.append(
            LateralGeometry(
                measure=measures[0],
                hat_measure=measures[1],
                normal=normals[0],
                hat_normal=normals[1],
            )
        )
    return tuple(faces)


@dataclass(eq=False)
class SpaceTimeMesh:
    d: int
    tensor: AnisotropyTensor
    domain: Domain
    boundary: BoundarySpec
    level: int
    shape: tuple[int, ...]
    times: np.ndarray
    geometry: CellGeometry
    grid_to_physical: np.ndarray
    grid_to_hat: np.ndarray
    origins: np.ndarray
    elements: list[Element] = field(default_factory=list)
    faces: list[FaceRecord] = field(default_factory=list)
    faces_by_slab: list[list[int]] = field(default_factory=list)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    @property
    def n_slabs(self) -> int:
        return self.times.size - 1

    @property
    def n_elements(self) -> int:
        return self.n_cells * self.n_slabs

    @property
    def grid_width(self) -> float:
        return float(np.max(self.geometry.width))

    @property
    def h(self) -> float:
        return self.geometry.diameter

    @property
    def h_hat(self) -> float:
        return self.geometry.hat_diameter

    @property
    def quasi_uniformity(self) -> float:
        sizes = [self.geometry.hat_diameter, self.geometry.dt]
        return max(sizes) / min(sizes)

    def element_id(self, cell: int, slab: int) -> int:
        return slab * self.n_cells + cell

    def element_times(self, element: int) -> tuple[float, float]:
        slab = self.elements[element].slab
        return float(self.times[slab]), float(self.times[slab + 1])

    def slab_elements(self, slab: int) -> range:
        return range(slab * self.n_cells, (slab + 1) * self.n_cells)

    def physical_points(self, element: int, ref_points: np.ndarray):
        """Physical points (n, d) and times (n,) of element reference coordinates."""
        e = self.elements[element]
        origin = self.grid_to_physical @ self.origins[e.cell]
        x = origin + ref_points[:, : self.d] @ self.geometry.to_physical.T
        t = self.times[e.slab] + ref_points[:, self.d] * self.geometry.dt
        return x, t

    def hat_centroid(self, element: int) -> np.ndarray:
        e = self.elements[element]
        center = self.origins[e.cell] + 0.5 * self.geometry.width
        return self.grid_to_hat @ center

    def locate(self, x, t) -> tuple[np.ndarray, np.ndarray]:
        """
        Element ids and element reference coordinates of physical points.

        Points on slab boundaries are assigned to the earlier slab; points
        outside the domain are clipped to the nearest element.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = np.broadcast_to(np.asarray(t, dtype=float).reshape(-1), (x.shape[0],))
        grid = x @ np.linalg.inv(self.grid_to_physical).T
        scaled = (grid - np.asarray(self.domain.lower)) / self.geometry.width
        index = np.clip(np.floor(scaled).astype(int), 0, np.array(self.shape) - 1)
        cells = np.ravel_multi_index(index.T, self.shape)
        slabs = np.clip(np.searchsorted(self.times, t, side="left") - 1, 0, self.n_slabs - 1)
        ref_time = (t - self.times[slabs]) / self.geometry.dt
        ref = np.column_stack([scaled - index, ref_time])
        return slabs * self.n_cells + cells, ref

    def dump(self) -> list[str]:
        """Plain-text listing of elements and faces, one record per line."""
        lines = [
            f"# mesh d={self.d} level={self.level} cells={self.n_cells} slabs={self.n_slabs}"
        ]
        for e in self.elements:
            t0, t1 = self.element_times(e.id)
            lines.append(f"element {e.id} cell {e.cell} slab {e.slab} t {t0:.6g} {t1:.6g}")
        for f in self.faces:
            plus = "-" if f.plus is None else str(f.plus)
            normal = " ".join(f"{value:.6g}" for value in f.normal)
            lines.append(
                f"face {f.id} {f.kind.value} {f.minus} {plus} {f.measure:.6e} "
                f"{f.hat_measure:.6e} nt {f.nt:g} n {normal}"
            )
        return lines


def generate(
    domain: Domain,
    tensor: AnisotropyTensor,
    level: int,
    n_steps: int | None = None,
    boundary: BoundarySpec | None = None,
) -> SpaceTimeMesh:
    """
    Uniform space-time mesh with 2^level cells per axis and ``n_steps`` slabs
    (default 2^level).

    Parameters
    ----------
    domain : Domain
        Spatial box in physical or hat coordinates, and final time.
    tensor : AnisotropyTensor
        Defines the map between the two coordinate systems.
    level : int
        Refinement level l >= 0.
    n_steps : int, optional
        Number of time slabs N >= 1.
    boundary : BoundarySpec, optional
        Side assignment; all-Neumann when omitted.

    Returns
    -------
    SpaceTimeMesh
    """
    d = domain.d
    if tensor.d != d:
        raise InvalidDomainError(f"Domain dimension {d} differs from tensor dimension {tensor.d}")
    if level < 0:
        raise InvalidDomainError(f"Level must be >= 0, got {level}")
    n_steps = 2**level if n_steps is None else n_steps
    if n_steps < 1:
        raise InvalidDomainError(f"Number of time steps must be >= 1, got {n_steps}")
    boundary = boundary or BoundarySpec.from_mode(NEUMANN, d)
    if set(boundary.sides) != {(axis, side) for axis in range(d) for side in (0, 1)}:
        raise InvalidBoundarySpecError(f"Boundary specification does not cover all sides of a {d}D box")

    shape = (2**level,) * d
    lower = np.asarray(domain.lower, dtype=float)
    width = (np.asarray(domain.upper, dtype=float) - lower) / np.array(shape)
    if domain.frame == "physical":
        grid_to_physical, grid_to_hat = np.eye(d), tensor.S
    else:
        grid_to_physical, grid_to_hat = tensor.S_inv, np.eye(d)

    to_physical = grid_to_physical @ np.diag(width)
    to_hat = grid_to_hat @ np.diag(width)
    times = np.linspace(0.0, domain.T, n_steps + 1)
    geometry = CellGeometry(
        width=width,
        to_physical=to_physical,
        to_hat=to_hat,
        dt=domain.T / n_steps,
        volume=abs(float(np.linalg.det(to_physical))),
        hat_volume=abs(float(np.linalg.det(to_hat))),
        diameter=_diameter(to_physical),
        hat_diameter=_diameter(to_hat),
        lateral=_lateral_geometry(grid_to_physical, grid_to_hat, width),
    )

    index_list = list(itertools.product(*(range(n) for n in shape)))
    origins = lower + np.array(index_list, dtype=float) * width
    mesh = SpaceTimeMesh(
        d=d,
        tensor=tensor,
        domain=domain,
        boundary=boundary,
        level=level,
        shape=shape,
        times=times,
        geometry=geometry,
        grid_to_physical=grid_to_physical,
        grid_to_hat=grid_to_hat,
        origins=origins,
    )
    n_cells = mesh.n_cells
    for slab in range(n_steps):
        for cell, index in enumerate(index_list):
            mesh.elements.append(Element(id=slab * n_cells + cell, cell=cell, slab=slab, index=index))

    _build_faces(mesh, index_list)
    log.info(
        f"Mesh level {level}: {n_cells} cells x {n_steps} slabs, "
        f"{len(mesh.faces)} faces, h = {mesh.h:.4g}, h_hat = {mesh.h_hat:.4g}, "
        f"quasi-uniformity {mesh.quasi_uniformity:.4g}"
    )
    return mesh


def _build_faces(mesh: SpaceTimeMesh, index_list: list[tuple[int, ...]]):
    d = mesh.d
    geometry = mesh.geometry
    n_cells = mesh.n_cells
    zero = np.zeros(d)

    def add(**kwargs) -> None:
        face = FaceRecord(id=len(mesh.faces), **kwargs)
        mesh.faces.append(face)
        mesh.faces_by_slab[face.slab].append(face.id)

    mesh.faces_by_slab = [[] for _ in range(mesh.n_slabs)]
    for slab in range(mesh.n_slabs):
        base = slab * n_cells
        if slab == 0:
            for cell in range(n_cells):
                add(
                    kind=FaceKind.INITIAL,
                    minus=base + cell,
                    minus_face=2 * d,
                    measure=geometry.volume,
                    hat_measure=geometry.hat_volume,
                    normal=zero,
                    hat_normal=zero,
                    nt=-1.0,
                    slab=slab,
                    time=float(mesh.times[0]),
                )
        for axis in range(d):
            lateral = geometry.lateral[axis]
            for cell, index in enumerate(index_list):
                if index[axis] + 1 >= mesh.shape[axis]:
                    continue
                neighbour = list(index)
                neighbour[axis] += 1
                other = int(np.ravel_multi_index(neighbour, mesh.shape))
                add(
                    kind=FaceKind.TIME_LIKE,
                    minus=base + cell,
                    minus_face=2 * axis + 1,
                    plus=base + other,
                    plus_face=2 * axis,
                    measure=lateral.measure * geometry.dt,
                    hat_measure=lateral.hat_measure * geometry.dt,
                    normal=lateral.normal,
                    hat_normal=lateral.hat_normal,
                    nt=0.0,
                    slab=slab,
                    axis=axis,
                )
        for axis in range(d):
            lateral = geometry.lateral[axis]
            for side in (0, 1):
                sign = 1.0 if side else -1.0
                kind = mesh.boundary.kind(axis, side)
                boundary_index = mesh.shape[axis] - 1 if side else 0
                for cell, index in enumerate(index_list):
                    if index[axis] != boundary_index:
                        continue
                    add(
                        kind=kind,
                        minus=base + cell,
                        minus_face=2 * axis + side,
                        measure=lateral.measure * geometry.dt,
                        hat_measure=lateral.hat_measure * geometry.dt,
                        normal=sign * lateral.normal,
                        hat_normal=sign * lateral.hat_normal,
                        nt=0.0,
                        slab=slab,
                        axis=axis,
                    )
        final = slab == mesh.n_slabs - 1
        for cell in range(n_cells):
            add(
                kind=FaceKind.FINAL if final else FaceKind.SPACE_LIKE,
                minus=base + cell,
                minus_face=2 * d + 1,
                plus=None if final else base + n_cells + cell,
                plus_face=None if final else 2 * d,
                measure=geometry.volume,
                hat_measure=geometry.hat_volume,
                normal=zero,
                hat_normal=zero,
                nt=1.0,
                slab=slab,
                time=float(mesh.times[slab + 1]),
            )


@dataclass(frozen=True)
class GeometryReport:
    min_size_ratio: float
    max_size_ratio: float
    max_area_ratio: float


def verify_geometry_lemmas(mesh: SpaceTimeMesh, tensor: AnisotropyTensor | None = None):
    """
    Size ratios h_hat * |Lambda^{1/2}| / h over elements and the largest face
    area ratio (|F| / |F_hat|) / (det(Lambda^{1/2}) lambda_min^{-1/2}), which
    must not exceed 1.
    """
    tensor = tensor or mesh.tensor
    geometry = mesh.geometry
    sqrt_norm = np.sqrt(tensor.lambda_max)
    size_ratio = geometry.hat_diameter * sqrt_norm / geometry.diameter
    bound = np.prod(np.sqrt(tensor.Lambda)) / np.sqrt(tensor.lambda_min)
    ratios = [geometry.volume / geometry.hat_volume]
    ratios += [lateral.measure / lateral.hat_measure for lateral in geometry.lateral]
    report = GeometryReport(
        min_size_ratio=float(size_ratio),
        max_size_ratio=float(size_ratio),
        max_area_ratio=float(max(ratios) / bound),
    )
    log.debug(f"Geometry lemmas: {report}")
    return report
