"""Built-in data set: three Indian sector indices (Bank, Infra, IT).

Nominal moments are quarterly simple returns in percent; perturbations
move each sector's expected return along its own axis.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .market_data import MomentEstimates
from .uncertainty import BasicShifts, PerturbationFamily, UncertainReturnModel

ASSETS = ("Nifty Bank", "Nifty Infra", "Nifty IT")
MU0 = np.array([2.609, -1.430, 6.329])
SIGMA = np.array(
    [
        [24.126, -1.460, 11.032],
        [-1.460, 8.237, 0.461],
        [11.032, 0.461, 18.034],
    ]
)
SHIFT_SCALES = np.array([0.2, 0.1, 0.3])
MEAN_UPPER = np.array([0.3, 0.2, 0.1])
MEAN_LOWER = -MEAN_UPPER
STD = np.array([0.1, 0.1, 0.1])
BETA = 0.95
TAU_GRID = (1.5, 3.5, 0.2)

PRESETS = ("paper",)


def paper_moments() -> MomentEstimates:
    return MomentEstimates(mu0=MU0.copy(), sigma=SIGMA.copy(), assets=ASSETS)


def paper_model(tau: float = 1.5, beta: float = BETA, with_std: bool = True) -> UncertainReturnModel:
    family = PerturbationFamily(MEAN_LOWER.copy(), MEAN_UPPER.copy(), STD.copy() if with_std else None)
    return UncertainReturnModel(MU0.copy(), BasicShifts.diagonal(SHIFT_SCALES), family, beta=beta, tau=tau)


def fixture_path(name: str = "nifty_prices.csv"):
    """Path of a bundled data file (a context-free Traversable)."""
    return resources.files(__package__) / "data" / name
