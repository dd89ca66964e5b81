"""Factorization conventions: ordering, phases, rank threshold, validation."""

import numpy as np
import pytest

from robustmimo import linalg


def _random_complex(rng, m, n):
    return (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / np.sqrt(2.0)


def test_as_complex_matrix_rejects_bad_inputs():
    with pytest.raises(ValueError):
        linalg.as_complex_matrix(np.ones(3))
    with pytest.raises(ValueError):
        linalg.as_complex_matrix(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        linalg.as_complex_matrix([[np.nan, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        linalg.as_complex_matrix([[np.inf]])


def test_as_complex_matrix_accepts_lists():
    m = linalg.as_complex_matrix([[1, 2], [3, 4]])
    assert m.dtype == np.complex128
    assert m.shape == (2, 2)


@pytest.mark.parametrize("shape", [(1, 1), (2, 2), (3, 2), (2, 3), (4, 4), (5, 3)])
def test_svd_reconstructs(shape):
    for seed in range(10):
        rng = np.random.default_rng(seed)
        a = _random_complex(rng, *shape)
        fac = linalg.svd(a)
        assert np.allclose(fac.reconstruct(), a, atol=1e-12)
        # square unitary factors
        m, n = shape
        assert fac.u.shape == (m, m)
        assert fac.v.shape == (n, n)
        assert np.allclose(fac.u.conj().T @ fac.u, np.eye(m), atol=1e-12)
        assert np.allclose(fac.v.conj().T @ fac.v, np.eye(n), atol=1e-12)
        assert np.all(np.diff(fac.sigma) <= 0)
        assert np.all(fac.sigma >= 0)


def test_svd_phase_convention():
    # first nonzero entry of every right singular vector is real nonnegative
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        a = _random_complex(rng, 4, 3)
        fac = linalg.svd(a)
        for j in range(fac.v.shape[1]):
            col = fac.v[:, j]
            lead = col[np.flatnonzero(np.abs(col) > 1e-9)[0]]
            assert abs(lead.imag) < 1e-12
            assert lead.real > 0


def test_svd_deterministic():
    rng = np.random.default_rng(7)
    a = _random_complex(rng, 3, 3)
    f1 = linalg.svd(a)
    f2 = linalg.svd(a)
    assert np.array_equal(f1.u, f2.u)
    assert np.array_equal(f1.sigma, f2.sigma)
    assert np.array_equal(f1.v, f2.v)


def test_rank_detects_deficiency():
    rng = np.random.default_rng(3)
    u = _random_complex(rng, 4, 1)
    v = _random_complex(rng, 4, 1)
    a = u @ v.conj().T  # rank one by construction
    assert linalg.svd(a).rank() == 1
    b = _random_complex(rng, 4, 4)
    assert linalg.svd(b).rank() == 4
    assert linalg.svd(np.zeros((3, 3))).rank() == 0


def test_frobenius_norm_matches_numpy():
    rng = np.random.default_rng(11)
    a = _random_complex(rng, 3, 5)
    assert linalg.frobenius_norm(a) == pytest.approx(float(np.linalg.norm(a)), rel=1e-15)


def test_hermitian_eigen_roundtrip():
    for seed in range(10):
        rng = np.random.default_rng(200 + seed)
        b = _random_complex(rng, 4, 4)
        a = b @ b.conj().T
        w, q = linalg.hermitian_eigen(a)
        assert np.all(np.diff(w) <= 1e-12)
        assert np.allclose(q @ np.diag(w) @ q.conj().T, a, atol=1e-10)
        assert np.allclose(q.conj().T @ q, np.eye(4), atol=1e-12)


def test_hermitian_eigen_rejects_bad_matrices():
    with pytest.raises(ValueError):
        linalg.hermitian_eigen(np.ones((2, 3)))
    skew = np.array([[0.0, 1.0], [-1.0, 0.0]])
    with pytest.raises(ValueError):
        linalg.hermitian_eigen(skew)
