import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


def random_low_occupancy_state(rng, cutoff=30, support=18):
    """Random single-mode density matrix supported away from the truncation edge."""
    from quadratomo.fock import DensityMatrix
    block = rng.standard_normal((support, support)) + 1j * rng.standard_normal((support, support))
    block = block @ block.conj().T
    m = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    m[:support, :support] = block / np.trace(block).real
    return DensityMatrix(m, cutoff)
