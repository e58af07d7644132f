import logging

import numpy as np
import pytest

from trefftz_dg.cases import CASES, lambda1_for_rho, make_case
from trefftz_dg.errors import UnknownCaseError
from trefftz_dg.mesh import FaceKind


def _divergence_of_flux(case, x, t, eps=1e-5):
    """div(A^{1/2} sigma) by central differences."""
    total = np.zeros(x.shape[0])
    for k in range(case.d):
        step = np.zeros(case.d)
        step[k] = eps
        upper = case.sigma(x + step, t) @ case.tensor.sqrt.T
        lower = case.sigma(x - step, t) @ case.tensor.sqrt.T
        total += (upper[:, k] - lower[:, k]) / (2 * eps)
    return total


def _gradient_residual(case, x, t, eps=1e-5):
    """A^{1/2} grad v + d_t sigma by central differences."""
    grad = np.zeros_like(x)
    for k in range(case.d):
        step = np.zeros(case.d)
        step[k] = eps
        grad[:, k] = (case.v(x + step, t) - case.v(x - step, t)) / (2 * eps)
    sigma_t = (case.sigma(x, t + eps) - case.sigma(x, t - eps)) / (2 * eps)
    return grad @ case.tensor.sqrt.T + sigma_t


def test_catalogue():
    assert set(CASES) == {"hom2d_hat", "hom3d_hat", "nonhom1d", "nonhom2d", "nonhom3d", "patch", "zero"}
    with pytest.raises(UnknownCaseError):
        make_case("nonhom4d")


def test_nonhom1d_source():
    case = make_case("nonhom1d")
    x = np.linspace(0.05, 0.95, 7)[:, None]
    t = np.linspace(0.0, 1.0, 7)
    np.testing.assert_allclose(case.f(x, t), -np.pi**2 * case.U(x, t), atol=1e-12)
    assert not case.homogeneous
    assert case.boundary.kind(0, 0) is FaceKind.DIRICHLET


@pytest.mark.parametrize("case_id", ["hom2d_hat", "hom3d_hat", "nonhom1d", "nonhom2d", "nonhom3d", "patch"])
def test_fields_solve_the_system(case_id):
    case = make_case(case_id, lambda1=lambda1_for_rho(8.0))
    rng = np.random.default_rng(3)
    x = rng.uniform(0.1, 0.9, size=(6, case.d))
    t = rng.uniform(0.1, 0.9, size=6)
    np.testing.assert_allclose(_gradient_residual(case, x, t), 0.0, atol=1e-5)
    balance = _divergence_of_flux(case, x, t) + (case.v(x, t + 1e-5) - case.v(x, t - 1e-5)) / 2e-5
    np.testing.assert_allclose(balance, case.f(x, t), atol=1e-5)


def test_hat_cases_are_homogeneous():
    for case_id in ("hom2d_hat", "hom3d_hat", "patch", "zero"):
        case = make_case(case_id)
        assert case.homogeneous
        np.testing.assert_array_equal(case.f(np.full((3, case.d), 0.5), 0.2), 0.0)


def test_initial_and_boundary_data_agree_with_fields():
    case = make_case("nonhom2d", lambda1=0.5, boundary="mixed")
    x = np.array([[0.0, 0.3], [1.0, 0.8]])
    np.testing.assert_allclose(case.v0(x), case.v(x, 0.0))
    np.testing.assert_allclose(case.sigma0(x), case.sigma(x, 0.0))
    np.testing.assert_allclose(case.g_dirichlet(x, 0.4), case.v(x, 0.4))
    normal = np.array([[-1.0, 0.0], [1.0, 0.0]])
    expected = np.sum((case.tensor.sqrt @ case.sigma(x, 0.4).T).T * normal, axis=1)
    np.testing.assert_allclose(case.g_neumann(x, 0.4, normal), expected)


def test_patch_solution():
    case = make_case("patch")
    x = np.array([[0.2, 0.4]])
    np.testing.assert_allclose(case.v(x, 0.5), [1.0])
    y = case.tensor.to_hat(x)
    np.testing.assert_allclose(case.sigma(x, 0.5), (-np.array([[2 * y[0, 0], 0.0]])) @ case.tensor.P)


def test_lambda1_for_rho():
    assert lambda1_for_rho(1.0) == 1.0
    assert lambda1_for_rho(4.0) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        lambda1_for_rho(0.5)


def test_non_catalogue_boundary_warns(caplog):
    with caplog.at_level(logging.WARNING, logger="trefftz_dg.cases"):
        case = make_case("nonhom1d", boundary="neumann")
    assert "not part of the catalogue" in caplog.text
    assert case.boundary.kind(0, 1) is FaceKind.NEUMANN


def test_explicit_tensor(random_spd_tensor):
    tensor = random_spd_tensor(2, seed=12)
    case = make_case("nonhom2d", tensor=tensor)
    assert case.tensor is tensor
    assert case.d == 2
