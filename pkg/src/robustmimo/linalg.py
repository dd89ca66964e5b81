"""Dense complex linear algebra helpers shared by the transceiver code.

Everything operates on small dense matrices (a few hundred entries at most),
so the emphasis is on strict validation and reproducible output rather than
raw speed. Factorizations are backed by LAPACK; this module pins down the
conventions (ordering, phase normalization, rank threshold) the rest of the
package relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Singular values at or below RANK_RTOL * sigma_max count as zero in rank tests.
RANK_RTOL = 1e-12

_HERMITIAN_RTOL = 1e-10
_PHASE_ATOL = 1e-12


def as_complex_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return `a` as a 2-D complex128 array with finite entries."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.size == 0:
        raise ValueError(f"{name} must be a nonempty 2-D array")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


@dataclass(frozen=True)
class SvdFactors:
    """Full singular value decomposition with square unitary factors.

    `u` is M x M, `v` is N x N and `sigma` holds the min(M, N) singular
    values in nonincreasing order; the input factors as
    u @ Sigma @ v.conj().T with Sigma the M x N rectangular diagonal.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        """Multiply the factors back together."""
        m, n = self.u.shape[0], self.v.shape[0]
        smat = np.zeros((m, n), dtype=np.complex128)
        k = self.sigma.size
        smat[:k, :k] = np.diag(self.sigma)
        return self.u @ smat @ self.v.conj().T

    def rank(self) -> int:
        """Numerical rank under the shared relative threshold."""
        if self.sigma.size == 0 or self.sigma[0] <= 0.0:
            return 0
        return int(np.count_nonzero(self.sigma > RANK_RTOL * self.sigma[0]))


def _normalize_column_phase(col: np.ndarray) -> complex:
    """Unit phase factor making the first nonzero entry of `col` real nonnegative."""
    for entry in col:
        if abs(entry) > _PHASE_ATOL:
            return entry / abs(entry)
    return 1.0 + 0.0j


def svd(a) -> SvdFactors:
    """Full SVD of a complex matrix with a deterministic phase convention.

    The first nonzero entry of every right singular vector is made real and
    nonnegative (the paired left vector absorbs the conjugate phase, so the
    product is unchanged). Raises numpy.linalg.LinAlgError if the iteration
    fails to converge; garbage is never returned silently.
    """
    m = as_complex_matrix(a)
    u, sigma, vh = np.linalg.svd(m, full_matrices=True)
    v = vh.conj().T
    k = sigma.size
    for j in range(v.shape[1]):
        phase = _normalize_column_phase(v[:, j])
        v[:, j] *= np.conj(phase)
        if j < k:
            u[:, j] *= np.conj(phase)
    # leftover left singular vectors (M > N) get the same treatment on their own
    for j in range(k, u.shape[1]):
        u[:, j] *= np.conj(_normalize_column_phase(u[:, j]))
    return SvdFactors(u=u, sigma=sigma, v=v)


def frobenius_norm(a) -> float:
    """Frobenius norm of a complex matrix."""
    return float(np.linalg.norm(as_complex_matrix(a)))


def hermitian_eigen(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns (eigenvalues, eigenvectors) with eigenvalues real in
    nonincreasing order and eigenvectors as the matching unitary columns.
    The input must be square and Hermitian to a relative 1e-10.
    """
    m = as_complex_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise ValueError("hermitian_eigen needs a square matrix")
    scale = max(1.0, float(np.linalg.norm(m)))
    if np.linalg.norm(m - m.conj().T) > _HERMITIAN_RTOL * scale:
        raise ValueError("matrix is not Hermitian to tolerance")
    w, q = np.linalg.eigh((m + m.conj().T) / 2.0)
    return w[::-1].copy(), q[:, ::-1].copy()
