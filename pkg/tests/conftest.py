import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=400, deadline=None)
settings.load_profile("default")

# skew part with N strictly inside the tame disc
tame_N = st.floats(min_value=0.0, max_value=1.99, allow_nan=False)
angles = st.floats(min_value=0.0, max_value=2.0 * np.pi, allow_nan=False)
half_times = st.floats(min_value=0.0, max_value=0.5, allow_nan=False)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
