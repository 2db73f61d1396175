import numpy as np
import pytest

from iqsig import GenerationConfig, generate_signature_set


@pytest.fixture(scope="session")
def sigset5():
    """Five KS-separated signatures, the default experiment seed."""
    return generate_signature_set(GenerationConfig(n_signatures=5, ks_epsilon=0.2, seed=42))


@pytest.fixture(scope="session")
def sigset4():
    """Four signatures whose pairwise KS distances sit in the reported band."""
    return generate_signature_set(GenerationConfig(n_signatures=4, ks_epsilon=0.2, seed=9))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
