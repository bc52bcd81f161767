import numpy as np
import pytest

from xcreg.fcurve import Grid, MultiCurveSample, SubintervalSpec


def bump(t, centre=25.0, width=3.0, amp=1.0):
    return amp * np.exp(-((t - centre) ** 2) / (2 * width**2))


def shifted_pair(delta=2.0, n=3, step=0.05, window=(10.0, 40.0)):
    """Two components with X_k(t) = X_j(t - delta), so the criterion vanishes at tau = -delta."""
    g = Grid.uniform(0, 50, step)
    amps = 1.0 + np.arange(n)
    centres = 24.0 + np.arange(n)
    xj = np.stack([bump(g.points, c, 3.0, a) for c, a in zip(centres, amps)])
    xk = np.stack([bump(g.points - delta, c, 3.0, a) for c, a in zip(centres, amps)])
    sample = MultiCurveSample(g, np.stack([xj, xk], axis=1))
    return sample, SubintervalSpec.on(g, *window), amps, centres


@pytest.fixture
def pair2():
    return shifted_pair()


# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key}. {text}")
