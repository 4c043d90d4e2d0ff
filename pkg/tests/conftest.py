import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # tests import oracles directly

from pncem.model import ModelParams

# phi x gamma grid shared by the closed-form tests (sigma_eps^2 fixed at 0.1)
PHI_GRID = (-0.99, -0.5, -0.1, 0.1, 0.5, 0.99)
GAMMA_GRID = (0.1, 1.0, 10.0)
N_GRID = (2, 5, 20, 50)

# the nine simulation-study settings
STUDY_PHI = (-0.95, 0.1, 0.95)
STUDY_GAMMA = (0.1, 1.0, 10.0)


def params_for(phi: float, gamma: float, mu: float = 1.0,
               sigma_eps_sq: float = 0.1) -> ModelParams:
    return ModelParams(mu, gamma * sigma_eps_sq, sigma_eps_sq, phi)


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
