import numpy as np
import pytest
from hypothesis import settings

from riemstab.manifolds import Euclidean, HalfPlane, Sphere
from riemstab.scenarios import (
    build_example_euclidean,
    build_example_hyperbolic,
    build_linear_oracle,
)

settings.register_profile("repo", deadline=None, max_examples=60)
settings.load_profile("repo")


@pytest.fixture
def hp():
    return HalfPlane()


@pytest.fixture
def flat2():
    return Euclidean(2)


@pytest.fixture
def sphere2():
    return Sphere(2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def hyp_const():
    """Hyperbolic example with a=1 and d = 1."""
    return build_example_hyperbolic(a=1.0, d=1.0)


@pytest.fixture(scope="session")
def hyp_sin():
    return build_example_hyperbolic(a=1.0, d="two_plus_sin")


@pytest.fixture(scope="session")
def euc_sin():
    return build_example_euclidean(a=1.0, d="two_plus_sin")


@pytest.fixture(scope="session")
def lin1():
    return build_linear_oracle(n=1, lam=1.0)


def sample_half_plane(rng, n, x1_scale=3.0, log_x2=2.0):
    """Points with x1 uniform in [-s, s] and log x2 uniform in [-L, L]."""
    return np.stack([rng.uniform(-x1_scale, x1_scale, n), np.exp(rng.uniform(-log_x2, log_x2, n))], axis=-1)


def sample_tangent(m, x, rng, max_norm):
    """Tangent vectors at x with metric norm uniform in [0, max_norm]."""
    X = rng.normal(size=x.shape)
    X /= m.norm(x, X)[..., None]
    return X * rng.uniform(0, max_norm, x.shape[:-1])[..., None]


# -- acceptance summary -----------------------------------------------------------

ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """``criterion(n, ok, detail)`` records one acceptance line, then asserts."""

    def record(n, ok, detail):
        ACCEPTANCE[n] = (bool(ok), detail)
        print(f"acceptance {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
