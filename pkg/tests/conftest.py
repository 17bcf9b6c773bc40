import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

finite = st.floats(-50.0, 50.0, allow_nan=False, allow_infinity=False)
vec3 = arrays(np.float64, 3, elements=finite)


@st.composite
def unit_vectors(draw):
    v = draw(arrays(np.float64, 3, elements=st.floats(-1.0, 1.0, allow_nan=False)))
    n = np.linalg.norm(v)
    if n < 1e-3:
        v = np.array([0.0, 0.0, 1.0])
        n = 1.0
    return v / n


def random_unit(rng, size=None):
    shape = (3,) if size is None else (size, 3)
    v = rng.normal(size=shape)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_rotation(rng):
    Q, R = np.linalg.qr(rng.normal(size=(3, 3)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance verdicts ---------------------------------------------------------------

VERDICTS = []


def verdict(label, ok, detail=""):
    """Record a PASS/FAIL line for the end-of-run summary, then assert."""
    line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
    VERDICTS.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
