import numpy as np
import pytest

from csfbench import generate
from csfbench.patterns import enumerate_vocabulary

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def vocab():
    return enumerate_vocabulary()


@pytest.fixture(scope="session")
def csf_setup():
    """A calibrated CSF rule with its 20k-window dataset (seed 0)."""
    voc = enumerate_vocabulary()
    rule = generate.sample_csf_rule(voc, k_effective=10, seed=0)
    generate.calibrate_threshold(rule, seed=0)
    dataset = generate.generate_csf(rule, generate.GenConfig(n_windows=20_000, seed=0))
    return rule, dataset


@pytest.fixture(scope="session")
def random_dataset():
    return generate.generate_random(generate.GenConfig(n_windows=20_000, seed=1))


def monotone_window(n=20, up=True):
    """Strictly monotone price window."""
    base = np.arange(1.0, n + 1.0)
    return base if up else base[::-1].copy()
