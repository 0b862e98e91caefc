import numpy as np
import pytest

from lowrank_gemm import DenseMatrix, SpectrumSpec, SvdFactors, synth_matrix


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def orthonormal_columns(rng, rows, cols):
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.where(np.diag(r) >= 0, 1.0, -1.0)


def random_factors(rng, m, n, rank, sigma_max=10.0, sigma_min=0.1):
    """Well-conditioned seeded SvdFactors for oracle tests."""
    s = np.sort(rng.uniform(sigma_min, sigma_max, rank))[::-1]
    return SvdFactors(
        DenseMatrix(orthonormal_columns(rng, m, rank)),
        s,
        DenseMatrix(orthonormal_columns(rng, n, rank).T),
    )


def knee_matrix(n, seed, plateau=None, floor=2e-3):
    plateau = plateau if plateau is not None else max(1, n // 16)
    sv = (1.0,) * plateau + (floor,) * (n - plateau)
    return synth_matrix(SpectrumSpec(n, n, sv, seed))
