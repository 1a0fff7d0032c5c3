import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("roughmill", deadline=None, max_examples=40)
settings.load_profile("roughmill")


@pytest.fixture
def op8():
    from roughmill.hilbert_scale import SpectralOperator
    return SpectralOperator.dirichlet_laplacian(8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
