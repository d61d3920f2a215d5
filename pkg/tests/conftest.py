import numpy as np
import pytest

from mfg_imitation import AttractorKernel, CongestionReward, FiniteMfg
from mfg_imitation.attractor import ATTRACTOR_REWARD


class BrokenClipKernel(AttractorKernel):
    """Attractor kernel whose clipping saturates at 0.9 instead of 1."""

    def fall_probability(self, rho):
        return np.minimum(0.9, super().fall_probability(rho))


def build_broken_attractor(lipschitz_l, horizon):
    return FiniteMfg(2, 2, horizon, np.array([1.0, 0.0]), BrokenClipKernel(lipschitz_l),
                     CongestionReward(ATTRACTOR_REWARD, 0.0))


@pytest.fixture
def broken_builder():
    return build_broken_attractor


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
