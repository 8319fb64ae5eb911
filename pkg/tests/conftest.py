import contextlib

import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from gradednet import GradedVector, GradingSignature

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# zero or a magnitude in [1e-6, 1e3]; subnormals only test the FPU
_mag = st.floats(min_value=1e-6, max_value=1e3)
finite = st.one_of(st.just(0.0), _mag, _mag.map(lambda x: -x))


@st.composite
def int_signatures(draw, min_grades=1, max_grades=4, max_dim=3, max_grade=10):
    grades = draw(st.lists(st.integers(0, max_grade), min_size=min_grades, max_size=max_grades, unique=True))
    dims = draw(st.lists(st.integers(1, max_dim), min_size=len(grades), max_size=len(grades)))
    return GradingSignature(zip(grades, dims))


@st.composite
def vectors(draw, sig, elements=finite):
    vals = draw(st.lists(elements, min_size=sig.total_dim, max_size=sig.total_dim))
    return GradedVector.from_flat(sig, vals)


@st.composite
def sig_and_vectors(draw, n=1, **kw):
    sig = draw(int_signatures(**kw))
    return (sig, *[draw(vectors(sig)) for _ in range(n)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance reporting ------------------------------------------------------
# each acceptance criterion records one line, printed in the terminal summary

ACCEPTANCE = {}


@pytest.fixture
def criterion():
    @contextlib.contextmanager
    def record(number: int, title: str):
        detail = []
        try:
            yield detail
        except BaseException as exc:
            msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
            ACCEPTANCE[number] = f"criterion {number:>2} FAIL  {title}: {'; '.join(detail + [msg])}"
            raise
        ACCEPTANCE[number] = f"criterion {number:>2} PASS  {title}: {'; '.join(detail)}"
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
