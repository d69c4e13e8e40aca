import sys

import numpy as np
import pytest

from zsnft.signal import PulseSpec, generate, make_grid


def sampled(family="sech", amp=1.0, window=(-25.0, 25.0), n=1024, **kw):
    return generate(PulseSpec(family, amp, **kw), make_grid(window[0], window[1], n))


@pytest.fixture(scope="session")
def sy27():
    return sampled("sech", 2.7, (-25, 25), 1024)


@pytest.fixture(scope="session")
def sech1():
    return sampled("sech", 1.0, (-25, 25), 1024)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
