import warnings

import pytest

from ccportfolio import presets
from ccportfolio.frontier import sweep

KINDS = ("nominal", "piecewise_linear", "bernstein", "piecewise_quadratic")


@pytest.fixture(scope="session")
def model():
    return presets.paper_model()


@pytest.fixture(scope="session")
def moments():
    return presets.paper_moments()


@pytest.fixture(scope="session")
def tables(model, moments):
    """One sweep per kind over 1.5:3.5:0.2, shared by the whole session."""
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        return {k: sweep(model, moments, k, *presets.TAU_GRID) for k in KINDS}
