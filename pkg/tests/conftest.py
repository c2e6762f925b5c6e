import numpy as np
import pytest

from fpplab import (
    Exponential,
    Gamma,
    LogNormal,
    PiecewiseLinearCdf,
    StandardNormal,
    Uniform,
)

FPP_LAWS = {
    "exp": Exponential(1.0),
    "uniform": Uniform(1.0, 3.0),
    "gamma": Gamma(2.0, 1.0),
    "lognormal": LogNormal(0.0, 0.5),
}

ALL_LAWS = {
    **FPP_LAWS,
    "pwl": PiecewiseLinearCdf(xs=(0.5, 1.0, 2.0, 4.0), fs=(0.0, 0.3, 0.8, 1.0)),
    "gaussian": StandardNormal(),
}


@pytest.fixture(params=sorted(FPP_LAWS), ids=sorted(FPP_LAWS))
def fpp_law(request):
    """The four positively supported laws the lattice experiments use."""
    return FPP_LAWS[request.param]


@pytest.fixture(params=sorted(ALL_LAWS), ids=sorted(ALL_LAWS))
def any_law(request):
    return ALL_LAWS[request.param]


@pytest.fixture
def prob_grid():
    return np.linspace(1e-6, 1.0 - 1e-6, 1000)
