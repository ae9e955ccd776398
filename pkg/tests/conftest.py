import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

LAM = 0.01


@pytest.fixture
def lam():
    return LAM


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_users(rng, K, L=1, lo=-1.0, hi=1.0):
    from clma.channel import UserPathSet
    out = []
    for _ in range(K):
        b = rng.normal(size=L) + 1j * rng.normal(size=L)
        out.append(UserPathSet(rng.uniform(lo, hi, L), rng.uniform(lo, hi, L), b))
    return out


def random_apv(rng, M, N, lam, span=5.0):
    from clma.channel import ApvPair
    x = np.sort(rng.uniform(0, span * lam, M)) + np.arange(M) * 1e-6
    y = np.sort(rng.uniform(0, span * lam, N)) + np.arange(N) * 1e-6
    return ApvPair(x, y, lam)


#: One line per acceptance criterion, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
