import os
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from bsmreg import Dataset
from bsmreg.regression import link_inverse


def _dataset_path(env):
    path = os.environ.get(env)
    if path and Path(path).is_file():
        return Path(path)
    return None


@pytest.fixture(scope="session")
def mockjurors():
    """MockJurors exported from R's betareg (set BSMREG_MOCKJURORS_CSV)."""
    path = _dataset_path("BSMREG_MOCKJURORS_CSV")
    if path is None:
        pytest.skip("BSMREG_MOCKJURORS_CSV not set; MockJurors golden checks skipped")
    return path


@pytest.fixture(scope="session")
def sdac():
    """sdac exported from R's simplexreg (set BSMREG_SDAC_CSV)."""
    path = _dataset_path("BSMREG_SDAC_CSV")
    if path is None:
        pytest.skip("BSMREG_SDAC_CSV not set; sdac golden checks skipped")
    return path


def simulate_beta_regression(seed, n=500, beta=(0.5, 1.0), phi=0.25):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    mu = link_inverse(beta[0] + beta[1] * x)
    y = rng.beta(mu / phi, (1 - mu) / phi)
    return Dataset.from_arrays(y, x, ["x"])


def simulate_tpb_regression(seed, n=1000, beta=(0.5, 1.0), phi=0.1, theta1=0.85, theta2=8.0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    mu = link_inverse(beta[0] + beta[1] * x)
    w = np.where(rng.random(n) < theta1, 1.0, 1.0 / theta2) if theta1 < 1 else np.ones(n)
    y = rng.beta(mu * w / phi, (1 - mu) * w / phi)
    y = np.clip(y, 1e-300, 1 - 1e-16)
    return Dataset.from_arrays(y, x, ["x"])


@pytest.fixture
def beta_data():
    return simulate_beta_regression(11, n=300)


@pytest.fixture
def tpb_data():
    return simulate_tpb_regression(5, n=600)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
