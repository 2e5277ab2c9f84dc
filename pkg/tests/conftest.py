import numpy as np
import pytest

from scenario_rl.benchmarks import regime_shift_config
from scenario_rl.scr import SCRParams, ScenarioContext
from scenario_rl.tape import generate_synthetic_tape

SMALL_SCR = SCRParams(k=8, S=16, L_g=100, fit_window=60)
FIT_STOP = 420


def small_tape(seed=0, n_days=600, n_assets=4):
    cfg = regime_shift_config(seed, n_assets=n_assets, n_days=n_days)
    return generate_synthetic_tape(cfg).standardized(FIT_STOP)


@pytest.fixture(scope="session")
def tape():
    return small_tape()


@pytest.fixture(scope="session")
def ctx(tape):
    return ScenarioContext(tape, FIT_STOP, SMALL_SCR, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
