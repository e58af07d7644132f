import logging

import numpy as np
import pytest
import scipy.sparse as sp

from trefftz_dg.analysis import FieldSum, l2_error_at_time
from trefftz_dg.assembly import (
    NONOVERLAPPING,
    OVERLAPPING,
    FluxParameters,
    assemble_method1,
    assemble_method2,
    assemble_nonhomogeneous_rhs,
)
from trefftz_dg.cases import make_case
from trefftz_dg.errors import SingularBlockError
from trefftz_dg.mesh import generate
from trefftz_dg.quadrature import tensor_rule
from trefftz_dg.solver import BlockFactorization, solve, solve_particular
from trefftz_dg.trefftz_basis import TrefftzFamily


def _case_mesh(case, level=1):
    return generate(case.domain, case.tensor, level, 2**level, case.boundary)


@pytest.mark.parametrize("assemble", [assemble_method1, assemble_method2])
@pytest.mark.parametrize("boundary", ["neumann", "mixed"])
def test_patch_solution_is_reproduced(random_spd_tensor, assemble, boundary):
    case = make_case("patch", tensor=random_spd_tensor(2, seed=17, max_rho=8.0), boundary=boundary)
    mesh = _case_mesh(case)
    family = TrefftzFamily(mesh, 2)
    solution = solve(assemble(mesh, family, FluxParameters(), case))
    points, _ = tensor_rule(3, 3)
    for element in range(mesh.n_elements):
        w, tau = solution.trace(element, points)
        x, t = mesh.physical_points(element, points)
        np.testing.assert_allclose(w, case.v(x, t), atol=1e-9)
        np.testing.assert_allclose(tau, case.sigma(x, t), atol=1e-9)


def test_zero_data_gives_zero_solution():
    case = make_case("zero")
    mesh = _case_mesh(case)
    solution = solve(assemble_method1(mesh, TrefftzFamily(mesh, 1), FluxParameters(), case))
    assert solution.coefficients.shape == (mesh.n_elements, solution.family.size)
    np.testing.assert_array_equal(solution.coefficients, 0.0)
    assert solution.dofs == solution.coefficients.size


def test_evaluate_matches_trace():
    case = make_case("hom2d_hat", lambda1=0.5)
    mesh = _case_mesh(case)
    solution = solve(assemble_method2(mesh, TrefftzFamily(mesh, 1), FluxParameters(), case))
    assert solution.map_back
    ref = np.array([[0.4, 0.6, 0.3]])
    x, t = mesh.physical_points(5, ref)
    v, sigma = solution.evaluate(x, t)
    w, tau = solution.trace(5, ref)
    np.testing.assert_allclose(v, w)
    np.testing.assert_allclose(sigma, tau)


@pytest.mark.parametrize(
    "matrix",
    [np.zeros((3, 3)), np.array([[1.0, 1.0], [1.0, 1.0]]), sp.csr_matrix(np.zeros((2, 2)))],
)
def test_singular_blocks_are_reported(matrix):
    with pytest.raises(SingularBlockError) as info:
        BlockFactorization(matrix, slab=4)
    assert info.value.slab == 4
    assert str(info.value).startswith("Slab 4:")


def test_block_factorization_solves():
    matrix = sp.csr_matrix(np.array([[4.0, 1.0], [2.0, 3.0]]))
    factorization = BlockFactorization(matrix, slab=0)
    assert factorization.dense
    np.testing.assert_allclose(factorization.solve(np.array([5.0, 5.0])), [1.0, 1.0])


def test_identical_blocks_share_factorization(caplog):
    case = make_case("hom2d_hat", lambda1=0.5)
    mesh = _case_mesh(case, level=2)
    system = assemble_method1(mesh, TrefftzFamily(mesh, 1), FluxParameters(), case)
    caplog.set_level(logging.DEBUG, logger="trefftz_dg.solver")
    solve(system)
    reused = [record for record in caplog.records if "reusing factorization" in record.getMessage()]
    assert len(reused) == mesh.n_slabs - 1


@pytest.mark.parametrize("mode", [OVERLAPPING, NONOVERLAPPING])
def test_particular_solution_shapes(mode):
    case = make_case("nonhom1d")
    mesh = _case_mesh(case)
    particular = solve_particular(mesh, 2, case.f, mode=mode)
    assert particular.coefficients.shape == (mesh.n_elements, particular.family.size)
    assert particular.method == "local"
    assert np.any(particular.coefficients != 0.0)


@pytest.mark.parametrize("mode", [OVERLAPPING, NONOVERLAPPING])
def test_combined_scheme_approximates_solution(mode):
    case = make_case("nonhom1d")
    mesh = _case_mesh(case, level=2)
    system = assemble_method1(mesh, TrefftzFamily(mesh, 3), FluxParameters(), case)
    particular = solve_particular(mesh, 3, case.f, mode=mode)
    correction = solve(system, rhs=assemble_nonhomogeneous_rhs(system, case, particular))
    errors = l2_error_at_time(FieldSum([particular, correction]), case, 1.0)
    assert errors.err_v < 0.1
    assert errors.err_sigma < 0.1
    assert not errors.absolute_v


def test_patch_covering_grid_matches_nonoverlapping():
    case = make_case("nonhom2d", lambda1=0.5616, boundary="neumann")
    mesh = _case_mesh(case)
    overlapping = solve_particular(mesh, 1, case.f, mode=OVERLAPPING, size=5)
    nonoverlapping = solve_particular(mesh, 1, case.f, mode=NONOVERLAPPING)
    np.testing.assert_allclose(overlapping.coefficients, nonoverlapping.coefficients, rtol=1e-10, atol=1e-12)


def test_single_cell_patches_on_enlarged_boxes():
    case = make_case("nonhom1d")
    mesh = _case_mesh(case, level=2)
    plain = solve_particular(mesh, 2, case.f, size=1)
    enlarged = solve_particular(mesh, 2, case.f, size=1, enlargement=2.0)
    assert enlarged.family.enlargement == 2.0
    assert not np.allclose(plain.coefficients, enlarged.coefficients)


def test_enlargement_is_ignored_on_larger_patches(caplog):
    case = make_case("nonhom1d")
    mesh = _case_mesh(case)
    caplog.set_level(logging.WARNING, logger="trefftz_dg.assembly")
    particular = solve_particular(mesh, 1, case.f, size=3, enlargement=2.0)
    assert particular.family.enlargement == 1.0
    assert any("enlargement" in record.getMessage() for record in caplog.records)


def test_later_slab_load_leaves_earlier_slabs_unchanged():
    case = make_case("hom2d_hat", lambda1=0.5)
    mesh = _case_mesh(case, level=2)
    system = assemble_method1(mesh, TrefftzFamily(mesh, 1), FluxParameters(), case)
    baseline = solve(system)
    rhs = [block.copy() for block in system.rhs]
    rhs[2] += np.random.default_rng(3).standard_normal(rhs[2].shape)
    perturbed = solve(system, rhs=rhs)
    earlier = slice(0, 2 * mesh.n_cells)
    np.testing.assert_array_equal(perturbed.coefficients[earlier], baseline.coefficients[earlier])
    later = slice(2 * mesh.n_cells, None)
    assert not np.allclose(perturbed.coefficients[later], baseline.coefficients[later])
