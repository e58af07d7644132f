import dataclasses

import numpy as np
import pytest
import scipy.sparse as sp

from trefftz_dg.analysis import dg_plus_seminorm, dg_seminorm
from trefftz_dg.assembly import (
    NONOVERLAPPING,
    OVERLAPPING,
    FluxParameters,
    assemble_method1,
    assemble_method2,
    assemble_nonhomogeneous_rhs,
    local_load,
    local_matrix,
    local_patches,
)
from trefftz_dg.cases import make_case
from trefftz_dg.errors import DegreeMismatchError, DimensionMismatchError, MissingBoundaryDataError
from trefftz_dg.local_basis import LegendreFamily
from trefftz_dg.mesh import generate
from trefftz_dg.solver import DiscreteSolution
from trefftz_dg.trefftz_basis import TrefftzFamily


def _case_mesh(case, level=1):
    return generate(case.domain, case.tensor, level, 2**level, case.boundary)


def _unit_field(system, j):
    coefficients = np.zeros((system.mesh.n_elements, system.block_size))
    coefficients[0, j] = 1.0
    return DiscreteSolution(system.mesh, system.family, coefficients, system.method)


@pytest.fixture
def single_element():
    case = make_case("nonhom1d")
    mesh = _case_mesh(case, level=0)
    family = TrefftzFamily(mesh, 0)
    return case, mesh, family, assemble_method1(mesh, family, FluxParameters(), case)


def test_single_element_entries(single_element):
    _, mesh, family, system = single_element
    assert mesh.n_elements == 1
    assert system.block_size == 2
    M = system.matrix().toarray()
    W, T = family.tabulate(np.array([[0.2, 0.3], [0.7, 0.9]]))
    j = int(np.argmax(np.abs(W[0])))
    k = 1 - j
    # constant w with tau = 0: final mass plus two Dirichlet penalties
    np.testing.assert_allclose(W[:, j], W[0, j])
    np.testing.assert_allclose(T[:, j], 0.0, atol=1e-14)
    assert M[j, j] == pytest.approx(3.0 * W[0, j] ** 2)
    # constant tau with w = 0: final mass only
    np.testing.assert_allclose(W[:, k], 0.0, atol=1e-14)
    assert M[k, k] == pytest.approx(T[0, k, 0] ** 2)


def test_single_element_seminorms(single_element):
    _, mesh, family, system = single_element
    W, T = family.tabulate(np.array([[0.5, 0.5]]))
    j = int(np.argmax(np.abs(W[0])))
    k = 1 - j
    w_field = _unit_field(system, j)
    assert dg_seminorm(w_field, mesh) ** 2 == pytest.approx(3.0 * W[0, j] ** 2)
    assert dg_plus_seminorm(w_field, mesh) ** 2 == pytest.approx(3.0 * W[0, j] ** 2)
    tau_field = _unit_field(system, k)
    assert dg_seminorm(tau_field, mesh) ** 2 == pytest.approx(T[0, k, 0] ** 2)
    assert dg_plus_seminorm(tau_field, mesh) ** 2 == pytest.approx(3.0 * T[0, k, 0] ** 2)


@pytest.mark.parametrize("boundary", ["mixed", "neumann"])
def test_form_on_diagonal_equals_dg_seminorm(random_spd_tensor, boundary):
    case = make_case("nonhom2d", tensor=random_spd_tensor(2, seed=21, max_rho=10.0), boundary=boundary)
    mesh = _case_mesh(case)
    family = TrefftzFamily(mesh, 1)
    flux = FluxParameters(alpha=2.0, beta=0.5, delta=0.25)
    rng = np.random.default_rng(0)
    for frame, assemble in (("physical", assemble_method1), ("hat", assemble_method2)):
        system = assemble(mesh, family, flux, case)
        for _ in range(3):
            u = rng.standard_normal(system.dofs)
            field = DiscreteSolution(mesh, family, u.reshape(mesh.n_elements, -1), system.method)
            expected = dg_seminorm(field, mesh, flux, frame) ** 2
            assert system.bilinear(u, u) == pytest.approx(expected, rel=1e-9)


def test_methods_agree_for_identity_tensor():
    case = make_case("hom2d_hat", lambda1=1.0)
    mesh = _case_mesh(case)
    family = TrefftzFamily(mesh, 2)
    flux = FluxParameters()
    physical = assemble_method1(mesh, family, flux, case)
    hat = assemble_method2(mesh, family, flux, case)
    np.testing.assert_allclose(physical.matrix().toarray(), hat.matrix().toarray(), atol=1e-12)
    np.testing.assert_allclose(physical.rhs_vector(), hat.rhs_vector(), atol=1e-12)


def test_block_structure():
    case = make_case("hom2d_hat", lambda1=0.5)
    mesh = _case_mesh(case, level=2)
    family = TrefftzFamily(mesh, 1)
    system = assemble_method2(mesh, family, FluxParameters(), case)
    assert system.n_slabs == mesh.n_slabs == 4
    assert system.coupling[0] is None
    assert all(sp.issparse(block) for block in system.coupling[1:])
    assert system.diagonal[0].shape == (system.slab_size, system.slab_size)
    assert system.matrix().shape == (system.dofs, system.dofs)
    # initial data only enters the load, so every slab shares one block
    for n in range(1, system.n_slabs):
        np.testing.assert_allclose(system.diagonal[n].toarray(), system.diagonal[0].toarray())
    assert system.columns(mesh.element_id(3, 2)) == slice(
        mesh.element_id(3, 2) * system.block_size, (mesh.element_id(3, 2) + 1) * system.block_size
    )


def test_missing_boundary_data():
    case = make_case("nonhom2d", boundary="dirichlet")
    mesh = _case_mesh(case)
    without_dirichlet = dataclasses.replace(case, data_families=frozenset({"initial", "neumann", "source"}))
    with pytest.raises(MissingBoundaryDataError):
        assemble_method1(mesh, TrefftzFamily(mesh, 1), FluxParameters(), without_dirichlet)


def test_dimension_mismatch():
    mesh = _case_mesh(make_case("nonhom2d"))
    with pytest.raises(DimensionMismatchError):
        assemble_method1(mesh, TrefftzFamily(mesh, 1), FluxParameters(), make_case("nonhom1d"))


def test_flux_parameters_validation():
    with pytest.raises(ValueError):
        FluxParameters(alpha=0.0)
    with pytest.raises(ValueError):
        FluxParameters(beta=-1.0)


def test_particular_solution_must_match_mesh():
    case = make_case("nonhom1d")
    mesh = _case_mesh(case)
    system = assemble_method1(mesh, TrefftzFamily(mesh, 1), FluxParameters(), case)
    family = LegendreFamily(mesh, 1)
    wrong_shape = DiscreteSolution(mesh, family, np.zeros((mesh.n_elements, family.size + 1)), "local")
    with pytest.raises(DegreeMismatchError):
        assemble_nonhomogeneous_rhs(system, case, wrong_shape)
    other_mesh = _case_mesh(case, level=2)
    elsewhere = DiscreteSolution(
        other_mesh, family, np.zeros((other_mesh.n_elements, family.size)), "local"
    )
    with pytest.raises(DegreeMismatchError):
        assemble_nonhomogeneous_rhs(system, case, elsewhere)


def test_zero_particular_adds_source_load():
    case = make_case("nonhom1d")
    mesh = _case_mesh(case)
    system = assemble_method1(mesh, TrefftzFamily(mesh, 1), FluxParameters(), case)
    family = LegendreFamily(mesh, 1)
    zero = DiscreteSolution(mesh, family, np.zeros((mesh.n_elements, family.size)), "local")
    rhs = assemble_nonhomogeneous_rhs(system, case, zero)
    assert len(rhs) == system.n_slabs
    assert not np.allclose(np.concatenate(rhs), system.rhs_vector())


def test_methods_differ_for_anisotropic_tensor():
    case = make_case("hom2d_hat", lambda1=3.0 / 7.0)
    assert case.tensor.rho == pytest.approx(7.0 / 3.0)
    mesh = _case_mesh(case)
    family = TrefftzFamily(mesh, 2)
    physical = assemble_method1(mesh, family, FluxParameters(), case).matrix().toarray()
    hat = assemble_method2(mesh, family, FluxParameters(), case).matrix().toarray()
    assert np.max(np.abs(physical - hat)) > 1e-6


@pytest.mark.parametrize("d", [1, 2])
def test_local_system_shapes(small_mesh, d):
    mesh = small_mesh(d=d, level=1, boundary="dirichlet")
    family = LegendreFamily(mesh, 1)
    m = family.size
    single = local_matrix(mesh, family, FluxParameters(), (1,) * d)
    assert sp.issparse(single)
    assert single.shape == (m, m)
    slab = local_matrix(mesh, family, FluxParameters(), mesh.shape)
    assert slab.shape == (mesh.n_cells * m, mesh.n_cells * m)

    def source(x, t):
        return np.ones(x.shape[0])

    assert local_load(mesh, family, source).shape == (mesh.n_elements, m)
    with pytest.raises(ValueError):
        local_matrix(mesh, family, FluxParameters(), (1,) * (d + 1))


def test_local_patches_are_clipped_and_centred(small_mesh):
    mesh = small_mesh(d=2, level=3, n_steps=2)
    patches = local_patches(mesh, OVERLAPPING, size=5)
    assert len(patches) == mesh.n_elements
    counts = {patch.counts for patch in patches}
    assert (3, 3) in counts and (5, 5) in counts and (3, 5) in counts
    kept = np.concatenate([patch.elements(mesh.n_cells)[patch.keep] for patch in patches])
    np.testing.assert_array_equal(np.sort(kept), np.arange(mesh.n_elements))
    interior = next(patch for patch in patches if patch.counts == (5, 5))
    assert interior.keep.tolist() == [12]
    centre = mesh.elements[int(interior.cells[12])].index
    corner = mesh.elements[int(interior.cells[0])].index
    assert tuple(np.subtract(centre, corner)) == (2, 2)


def test_nonoverlapping_patches_cover_each_slab(small_mesh):
    mesh = small_mesh(d=2, level=2)
    patches = local_patches(mesh, NONOVERLAPPING)
    assert len(patches) == mesh.n_slabs
    for slab, patch in enumerate(patches):
        assert patch.counts == mesh.shape
        np.testing.assert_array_equal(
            patch.elements(mesh.n_cells), np.arange(slab * mesh.n_cells, (slab + 1) * mesh.n_cells)
        )


@pytest.mark.parametrize("mode, size", [("patchwork", 5), (OVERLAPPING, 4), (OVERLAPPING, 0)])
def test_local_patches_reject_bad_arguments(small_mesh, mode, size):
    with pytest.raises(ValueError):
        local_patches(small_mesh(d=1, level=2), mode, size)


def test_enlarged_box_is_single_cell_only(small_mesh):
    mesh = small_mesh(d=2, level=2)
    family = LegendreFamily(mesh, 1, enlargement=2.0)
    assert local_matrix(mesh, family, FluxParameters(), (1, 1)).shape == (family.size, family.size)
    with pytest.raises(ValueError):
        local_matrix(mesh, family, FluxParameters(), (3, 3))
