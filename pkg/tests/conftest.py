"""Shared fixtures: the parameter sets of the reference experiments"""

import pytest

from skewsim.kernels.density import SkewParams, TruncationPolicy
from skewsim.sampling.streams import RandomStream


@pytest.fixture
def symmetric_params():
    """Skewness (0.5, -0.5): mass pushed between the barriers."""
    return SkewParams(z1=0.0, z2=1.0, beta1=0.5, beta2=-0.5)


@pytest.fixture
def inside_params():
    return SkewParams(z1=0.0, z2=1.0, beta1=0.3, beta2=-0.7)


@pytest.fixture
def outside_params():
    return SkewParams(z1=0.0, z2=1.0, beta1=-0.7, beta2=0.3)


@pytest.fixture
def concordant_params():
    return SkewParams(z1=0.0, z2=1.0, beta1=-0.8, beta2=-0.6)


@pytest.fixture
def reflecting_params():
    """z1 fully reflecting, z2 semipermeable."""
    return SkewParams(z1=0.0, z2=1.0, beta1=1.0, beta2=-0.4)


@pytest.fixture
def drift_params():
    return SkewParams(z1=0.0, z2=1.0, beta1=0.4, beta2=0.2, mu=1.0)


@pytest.fixture
def policy():
    return TruncationPolicy(n_max=10, tol=1e-10)


@pytest.fixture
def rng():
    return RandomStream(seed=20240501, stream_id=0)
