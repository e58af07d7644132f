import numpy as np
import pytest

from trefftz_dg.anisotropy import make_tensor, random_spd
from trefftz_dg.mesh import BoundarySpec, Domain, generate
from trefftz_dg.properties import random_polynomial as _random_polynomial


@pytest.fixture
def random_spd_tensor():
    def _factory(d: int, seed: int | None = None, max_rho: float = 100.0):
        rng = np.random.default_rng(seed)
        return make_tensor(random_spd(d, rng, max_rho))

    return _factory


@pytest.fixture
def random_polynomial():
    def _factory(d: int, degree: int, seed: int | None = None):
        return _random_polynomial(d, degree, np.random.default_rng(seed))

    return _factory


@pytest.fixture
def small_mesh():
    def _factory(
        d: int = 2,
        level: int = 1,
        tensor=None,
        boundary: str = "neumann",
        frame: str = "physical",
        n_steps: int | None = None,
    ):
        tensor = tensor or make_tensor(np.eye(d))
        return generate(
            Domain.unit(d, frame=frame),
            tensor,
            level,
            n_steps,
            BoundarySpec.from_mode(boundary, d),
        )

    return _factory
