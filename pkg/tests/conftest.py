import numpy as np
import pytest

from ofdma_diffusion.linop import MaskedChannelOp


def random_masked_op(rng, L=None, M=None, N=None, complex_gains=True, min_gain=0.1):
    """Random structured operator with nonzero gains, for oracle tests."""
    if L is None:
        L = int(rng.integers(2, 17))
    if M is None:
        M = int(rng.integers(1, L + 1))
    if N is None:
        N = int(rng.integers(0, M + 1))
    selected = rng.choice(L, size=N, replace=False)
    slots = rng.choice(M, size=N, replace=False)
    mag = rng.uniform(min_gain, 2.0, size=N)
    if complex_gains:
        phase = rng.uniform(0, 2 * np.pi, size=N)
        gains = mag * np.exp(1j * phase)
    else:
        gains = mag * rng.choice([-1.0, 1.0], size=N)
    return MaskedChannelOp(L=L, M=M, selected=selected, slots=slots, gains=gains)


def dense_matrix(op):
    """Brute-force dense L x M matrix of a structured operator."""
    a = np.zeros((op.L, op.M), dtype=np.complex128)
    for i in range(op.N):
        a[op.selected[i], op.slots[i]] = op.gains[i]
    return a


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
