import numpy as np
import pytest

from tnet.nnops import backend
from tnet.tensor import Rng


@pytest.fixture
def rng():
    return Rng(1234)


@pytest.fixture(params=sorted(backend.BACKENDS))
def kernel_backend(request):
    """Run a test once per available kernel backend."""
    prev = backend.NAME
    backend.use(request.param)
    yield request.param
    backend.use(prev)


def randn(rng, *shape, dtype=np.float64):
    return rng.normal(int(np.prod(shape))).reshape(shape).astype(dtype)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("[C")[1].split("]")[0])):
            terminalreporter.write_line(line)
