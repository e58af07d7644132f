import logging
from collections import Counter

import numpy as np
import pytest

from trefftz_dg.errors import InvalidBoundarySpecError, InvalidDomainError
from trefftz_dg.mesh import BoundarySpec, Domain, FaceKind, generate, verify_geometry_lemmas


def test_counts(small_mesh):
    mesh = small_mesh(d=2, level=1)
    assert mesh.n_cells == 4
    assert mesh.n_slabs == 2
    assert mesh.n_elements == 8
    kinds = Counter(face.kind for face in mesh.faces)
    assert kinds[FaceKind.INITIAL] == 4
    assert kinds[FaceKind.TIME_LIKE] == 8
    assert kinds[FaceKind.NEUMANN] == 16
    assert kinds[FaceKind.SPACE_LIKE] == 4
    assert kinds[FaceKind.FINAL] == 4
    assert sum(len(ids) for ids in mesh.faces_by_slab) == len(mesh.faces)


def test_time_steps_override(small_mesh):
    mesh = small_mesh(d=1, level=2, n_steps=3)
    assert mesh.n_slabs == 3
    np.testing.assert_allclose(mesh.times, [0.0, 1 / 3, 2 / 3, 1.0])
    assert mesh.geometry.dt == pytest.approx(1 / 3)


def test_quasi_uniformity_is_reported(small_mesh, caplog):
    caplog.set_level(logging.INFO, logger="trefftz_dg.mesh")
    mesh = small_mesh(d=1, level=2, n_steps=3)
    assert mesh.quasi_uniformity == pytest.approx(4 / 3)
    assert any("quasi-uniformity 1.333" in record.getMessage() for record in caplog.records)


def test_slab_face_order(small_mesh):
    mesh = small_mesh(d=2, level=1, boundary="mixed")
    kinds = [mesh.faces[i].kind for i in mesh.faces_by_slab[0]]
    assert kinds[:4] == [FaceKind.INITIAL] * 4
    assert kinds[-4:] == [FaceKind.SPACE_LIKE] * 4
    last = [mesh.faces[i].kind for i in mesh.faces_by_slab[1]]
    assert FaceKind.INITIAL not in last
    assert last[-4:] == [FaceKind.FINAL] * 4


def test_mixed_boundary_sides(small_mesh):
    mesh = small_mesh(d=2, level=1, boundary="mixed")
    for face in mesh.faces:
        if face.kind is FaceKind.DIRICHLET:
            assert face.axis == 0
        if face.kind is FaceKind.NEUMANN:
            assert face.axis == 1


def test_normals_and_neighbours(small_mesh):
    mesh = small_mesh(d=2, level=1)
    for face in mesh.faces:
        if face.kind is FaceKind.TIME_LIKE:
            axis = face.axis
            np.testing.assert_allclose(face.normal, np.eye(2)[axis])
            minus = mesh.elements[face.minus]
            plus = mesh.elements[face.plus]
            assert plus.index[axis] == minus.index[axis] + 1
            assert plus.slab == minus.slab
        elif face.kind is FaceKind.SPACE_LIKE:
            assert mesh.elements[face.plus].slab == mesh.elements[face.minus].slab + 1
            assert face.nt == 1.0
        elif face.kind is FaceKind.NEUMANN:
            assert np.linalg.norm(face.normal) == pytest.approx(1.0)
            centre = mesh.physical_points(face.minus, np.full((1, 3), 0.5))[0][0]
            # outward: moving along the normal leaves the unit box
            assert np.any((centre + face.normal) > 1.0) or np.any((centre + face.normal) < 0.0)


def test_measures_sum_to_domain(small_mesh, random_spd_tensor):
    tensor = random_spd_tensor(2, seed=1)
    physical = small_mesh(d=2, level=2, tensor=tensor)
    assert physical.n_cells * physical.geometry.volume == pytest.approx(1.0)
    assert physical.n_cells * physical.geometry.hat_volume == pytest.approx(abs(np.linalg.det(tensor.S)))
    hat = small_mesh(d=2, level=2, tensor=tensor, frame="hat")
    assert hat.n_cells * hat.geometry.hat_volume == pytest.approx(1.0)
    assert hat.n_cells * hat.geometry.volume == pytest.approx(np.prod(np.sqrt(tensor.Lambda)))


def test_hat_frame_boundary_is_skewed(small_mesh, random_spd_tensor):
    tensor = random_spd_tensor(2, seed=2, max_rho=10.0)
    mesh = small_mesh(d=2, level=0, tensor=tensor, frame="hat")
    boundary = [f for f in mesh.faces if f.kind is FaceKind.NEUMANN]
    for face in boundary:
        assert np.linalg.norm(face.hat_normal) == pytest.approx(1.0)
        assert np.max(np.abs(face.hat_normal)) == pytest.approx(1.0)
        np.testing.assert_allclose(tensor.hat_normal(face.normal), face.hat_normal, atol=1e-12)


@pytest.mark.parametrize("frame", ["physical", "hat"])
def test_geometry_lemmas(small_mesh, random_spd_tensor, frame):
    for seed in range(5):
        tensor = random_spd_tensor(3, seed=seed, max_rho=100.0)
        mesh = small_mesh(d=3, level=1, tensor=tensor, frame=frame)
        report = verify_geometry_lemmas(mesh)
        assert report.min_size_ratio >= 1.0 - 1e-12
        assert report.max_size_ratio <= np.sqrt(tensor.rho) + 1e-12
        assert report.max_area_ratio <= 1.0 + 1e-12


def test_locate_inverts_physical_points(small_mesh, random_spd_tensor):
    mesh = small_mesh(d=2, level=2, tensor=random_spd_tensor(2, seed=4), frame="hat")
    ref = np.array([[0.25, 0.75, 0.5], [0.6, 0.1, 0.3]])
    for element in (0, 7, mesh.n_elements - 1):
        x, t = mesh.physical_points(element, ref)
        elements, found = mesh.locate(x, t)
        np.testing.assert_array_equal(elements, element)
        np.testing.assert_allclose(found, ref, atol=1e-10)


def test_locate_slab_boundary_takes_earlier_slab(small_mesh):
    mesh = small_mesh(d=1, level=1)
    elements, ref = mesh.locate(np.array([[0.25]]), np.array([0.5]))
    assert mesh.elements[elements[0]].slab == 0
    assert ref[0, 1] == pytest.approx(1.0)


def test_dump(small_mesh):
    mesh = small_mesh(d=1, level=1)
    lines = mesh.dump()
    assert lines[0].startswith("# mesh d=1 level=1")
    assert len(lines) == 1 + mesh.n_elements + len(mesh.faces)
    assert lines[1].startswith("element 0 cell 0 slab 0")
    assert any(line.split()[2] == "initial" for line in lines if line.startswith("face"))


def test_invalid_domains():
    with pytest.raises(InvalidDomainError):
        Domain((0.0, 0.0), (1.0, 0.0))
    with pytest.raises(InvalidDomainError):
        Domain((0.0,), (1.0,), T=0.0)
    with pytest.raises(InvalidDomainError):
        Domain((0.0,), (1.0,), frame="polar")
    with pytest.raises(InvalidDomainError):
        Domain((0.0,) * 4, (1.0,) * 4)


def test_invalid_generation(small_mesh, random_spd_tensor):
    with pytest.raises(InvalidDomainError):
        generate(Domain.unit(2), random_spd_tensor(3, seed=0), 1)
    with pytest.raises(InvalidDomainError):
        small_mesh(d=1, level=-1)
    with pytest.raises(InvalidDomainError):
        small_mesh(d=1, level=1, n_steps=0)


def test_boundary_spec_validation():
    with pytest.raises(InvalidBoundarySpecError):
        BoundarySpec.from_sides(1, dirichlet=[(0, 0)], neumann=[(0, 0), (0, 1)])
    with pytest.raises(InvalidBoundarySpecError):
        BoundarySpec.from_sides(1, dirichlet=[(0, 0)])
    with pytest.raises(InvalidBoundarySpecError):
        BoundarySpec.from_sides(1, dirichlet=[(0, 0), (0, 1), (1, 0)])
    with pytest.raises(InvalidBoundarySpecError):
        BoundarySpec.from_mode("robin", 2)
    spec = BoundarySpec.from_mode("mixed", 3)
    assert spec.kind(0, 1) is FaceKind.DIRICHLET
    assert spec.kind(2, 0) is FaceKind.NEUMANN
