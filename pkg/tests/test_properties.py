import numpy as np
import pytest

import trefftz_dg.assembly
import trefftz_dg.properties
from trefftz_dg.analysis import dg_plus_seminorm
from trefftz_dg.config import parse_config
from trefftz_dg.errors import PropertyFailure
from trefftz_dg.experiments import build_case
from trefftz_dg.mesh import generate
from trefftz_dg.properties import (
    PropertyResult,
    assert_properties,
    check_continuity,
    check_geometry,
    first_failure,
    run_properties,
)
from trefftz_dg.quadrature import default_order
from trefftz_dg.trefftz_basis import TrefftzFamily

NAMES = [
    "eigendecomposition",
    "transform identities",
    "Trefftz residuals",
    "mesh size ratio",
    "face area bound",
    "coercivity identity",
    "continuity bound",
    "transformation stability",
    "energy bound",
    "patch test",
]


@pytest.mark.parametrize(
    "text",
    [
        "case = hom2d_hat\np = 1\ntensor.lambda1 = 0.5616\nproperties.samples = 3\n",
        "case = nonhom2d\np = 2\nboundary = mixed\n"
        "tensor.random = true\ntensor.max_rho = 10\nseed = 42\nproperties.samples = 2\n",
        "case = nonhom1d\np = 2\nproperties.samples = 2\n",
    ],
)
def test_properties_hold(text):
    results = run_properties(parse_config(text))
    assert [result.name for result in results] == NAMES
    failure = first_failure(results)
    assert failure is None, f"{failure.name}: {failure.value} > {failure.limit}"
    assert_properties(results)


def test_broken_average_sign_is_detected(monkeypatch):
    monkeypatch.setattr(trefftz_dg.assembly, "AVERAGE_SIGN", -1.0)
    results = run_properties(parse_config("case = hom2d_hat\np = 1\nproperties.samples = 2\n"))
    failure = first_failure(results)
    assert failure is not None
    assert failure.name == "coercivity identity"


def test_assert_properties_raises():
    results = [
        PropertyResult("eigendecomposition", True, 0.0, 1e-12),
        PropertyResult("energy bound", False, 2.0, 1.0),
    ]
    with pytest.raises(PropertyFailure) as info:
        assert_properties(results)
    assert info.value.name == "energy bound"


def test_geometry_check_reports_quasi_uniformity(small_mesh):
    mesh = small_mesh(d=2, level=1)
    size_ratio = check_geometry(mesh)[0]
    assert size_ratio.passed
    assert f"quasi-uniformity {mesh.quasi_uniformity:.4g}" in size_ratio.detail


def test_continuity_takes_worse_direction(monkeypatch):
    config = parse_config("case = hom2d_hat\np = 1\nproperties.samples = 2\n")
    case = build_case(config)
    mesh = generate(case.domain, case.tensor, 1, 2, case.boundary)
    family = TrefftzFamily(mesh, 1)
    order = default_order(1)
    baseline = check_continuity(mesh, family, config, case, order, np.random.default_rng(4))
    assert baseline.passed

    calls = []

    def lopsided_plus(field, *args, **kwargs):
        calls.append(field)
        value = dg_plus_seminorm(field, *args, **kwargs)
        # every second call is for w
        return value * (1e-6 if len(calls) % 2 == 0 else 1.0)

    monkeypatch.setattr(trefftz_dg.properties, "dg_plus_seminorm", lopsided_plus)
    shrunk = check_continuity(mesh, family, config, case, order, np.random.default_rng(4))
    assert not shrunk.passed
    assert shrunk.value > baseline.value
