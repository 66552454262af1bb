import numpy as np
import pytest

from cram import _backend, _fallback
from cram.data import standardize
from cram.experiments import SyntheticSpec, generate_synthetic

BACKENDS = ["python"] + (["cython"] if _backend.BACKEND == "cython" else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run a test once per available kernel backend."""
    if request.param == "python":
        monkeypatch.setattr(_backend, "local_linear_weights", _fallback.local_linear_weights)
        monkeypatch.setattr(_backend, "run_sweeps", _fallback.run_sweeps)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def synth_raw():
    return generate_synthetic(SyntheticSpec(n=150, sigma=1.0, seed=7))


@pytest.fixture(scope="session")
def synth(synth_raw):
    return standardize(synth_raw)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
