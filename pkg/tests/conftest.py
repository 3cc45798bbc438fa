import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "lab", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("lab")


def brute_turning(P, closed=False):
    """Reference turning constant: every pair, sub-diameters by pdist."""
    from scipy.spatial.distance import pdist

    P = np.asarray(P, dtype=float)
    n = len(P)

    def diam(idx):
        Q = P[idx]
        return float(pdist(Q).max()) if len(Q) > 1 else 0.0

    best, wit = -1.0, None
    for i in range(n):
        for j in range(i + 1, n):
            d = float(np.linalg.norm(P[i] - P[j]))
            if d == 0:
                continue
            arc = diam(np.arange(i, j + 1))
            if closed:
                arc = min(arc, diam(np.r_[np.arange(j, n), np.arange(0, i + 1)]))
            r = arc / d
            if r > best + 1e-15:
                best, wit = r, (i, j)
    return best, wit


@pytest.fixture
def rs():
    return np.random.default_rng(12345)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one verdict line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
