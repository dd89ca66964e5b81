"""Worst-case channel error inside a Frobenius-norm ball.

For a fixed linear transceiver (precoder F, equalizer G) and a nominal
channel H, the receive error energy

    mse = || G (H + E) F - I ||_F^2 + noise_var * || G ||_F^2

is a convex quadratic in the perturbation E, so its maximum over the ball
||E||_F <= epsilon sits on the boundary and is characterized by a shifted
linear system plus a scalar secular equation in the multiplier omega. This
module solves that system exactly, both for general matrices and for the
per-stream diagonal form produced by the channel-diagonalizing design.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg

SECULAR_MAX_ITERS = 200
SECULAR_RTOL = 1e-12

# coefficients below _COEFF_RTOL * max|c| are treated as exactly zero when
# classifying the hard case; eigenvalues within _CLUSTER_RTOL of the top one
# share its eigenspace
_COEFF_RTOL = 1e-14
_CLUSTER_RTOL = 1e-12


class SecularSolveError(RuntimeError):
    """Secular root finder hit its iteration cap.

    Carries the best multiplier found and its equation residual so callers
    can report a meaningful failure.
    """

    def __init__(self, message: str, omega: float, residual: float):
        super().__init__(message)
        self.omega = omega
        self.residual = residual


@dataclass(frozen=True)
class DesignProblem:
    """Problem data for a robust transceiver design.

    h_tilde is the nominal M x N channel estimate, epsilon the radius of the
    Frobenius uncertainty ball, noise_var the receive noise variance per
    dimension, power the transmit power budget tr(F F^H) <= power, and
    streams the number of data streams carried.
    """

    h_tilde: np.ndarray
    epsilon: float
    noise_var: float
    power: float
    streams: int

    def __post_init__(self):
        h = linalg.as_complex_matrix(self.h_tilde, "h_tilde")
        object.__setattr__(self, "h_tilde", h)
        if not (np.isfinite(self.epsilon) and self.epsilon >= 0.0):
            raise ValueError("epsilon must be finite and nonnegative")
        if not (np.isfinite(self.noise_var) and self.noise_var > 0.0):
            raise ValueError("noise_var must be finite and positive")
        if not (np.isfinite(self.power) and self.power > 0.0):
            raise ValueError("power must be finite and positive")
        rank = linalg.svd(h).rank()
        if not 1 <= self.streams <= rank:
            raise ValueError(
                f"streams must lie in [1, numerical rank {rank}] of h_tilde"
            )

    @property
    def m_receive(self) -> int:
        return self.h_tilde.shape[0]

    @property
    def n_transmit(self) -> int:
        return self.h_tilde.shape[1]


@dataclass(frozen=True)
class WorstCaseCertificate:
    """Boundary maximizer of the error energy plus its optimality data.

    e_star attains the worst case, omega is the multiplier of the norm
    constraint (at least the largest eigenvalue of the error quadratic form),
    mse_value the attained objective, kkt_residual the norm of the shifted
    stationarity system residual, and hard_case marks a degenerate top
    eigenspace where part of the norm budget was placed freely.
    """

    e_star: np.ndarray
    omega: float
    mse_value: float
    kkt_residual: float
    hard_case: bool


def mse(f_mat, g_mat, e_mat, problem: DesignProblem) -> float:
    """Receive error energy of (F, G) under channel perturbation E."""
    f = linalg.as_complex_matrix(f_mat, "F")
    g = linalg.as_complex_matrix(g_mat, "G")
    e = linalg.as_complex_matrix(e_mat, "E")
    h = problem.h_tilde
    m, n = h.shape
    L = g.shape[0]
    if f.shape != (n, L) or g.shape != (L, m) or e.shape != (m, n):
        raise ValueError("F, G, E dimensions do not conform with h_tilde")
    resid = g @ (h + e) @ f - np.eye(L)
    return float(np.sum(np.abs(resid) ** 2) + problem.noise_var * np.sum(np.abs(g) ** 2))


def _degenerate_mask(lam: np.ndarray, coeffs_abs: np.ndarray) -> np.ndarray:
    """Directions in the top eigenvalue cluster whose coefficient vanishes."""
    lam_max = lam.max()
    attain = lam >= lam_max - _CLUSTER_RTOL * max(1.0, abs(lam_max))
    cmax = coeffs_abs.max()
    if cmax == 0.0:
        return attain
    return attain & (coeffs_abs <= _COEFF_RTOL * cmax)


def _secular_delta(lam: np.ndarray, coeffs_abs: np.ndarray, epsilon: float):
    """Root of sum_j c_j^2 / (delta + gap_j)^2 = epsilon^2 in the shift
    delta = omega - max(lambda) >= 0.

    Working in the shift keeps the root well conditioned when it sits within
    roundoff of the top eigenvalue (the near-hard case: tiny coefficient on
    the top cluster). Returns (delta, gaps, degen, hard_case). Newton runs
    on the reciprocal-norm transform 1/sqrt(sum), which is concave and
    increasing in delta, so iterates started at the upper bracket end
    decrease monotonically to the root; bisection remains as a safeguard.
    """
    lam_max = float(lam.max())
    gaps = lam_max - lam
    degen = _degenerate_mask(lam, coeffs_abs)
    if coeffs_abs.max() == 0.0:
        return 0.0, gaps, degen, True
    keep = ~degen
    g_u = gaps[keep]
    c2 = coeffs_abs[keep] ** 2
    eps2 = epsilon * epsilon

    def sum_sq(delta: float) -> float:
        return float(np.sum(c2 / (delta + g_u) ** 2))

    cluster = lam >= lam_max - _CLUSTER_RTOL * max(1.0, abs(lam_max))
    if not np.any(cluster & keep):
        # no coefficient mass on the top cluster: the sum stays finite at the
        # boundary, so compare it against the budget there
        if sum_sq(0.0) <= eps2:
            return 0.0, gaps, degen, True

    lo = 0.0
    hi = float(np.sqrt(c2.sum())) / epsilon  # sum_sq(hi) <= eps2
    delta = hi
    best_delta, best_resid = delta, np.inf
    for _ in range(SECULAR_MAX_ITERS):
        r2 = sum_sq(delta)
        resid = r2 - eps2
        if abs(resid) < best_resid:
            best_delta, best_resid = delta, abs(resid)
        if abs(resid) <= SECULAR_RTOL * eps2:
            return delta, gaps, degen, False
        if resid > 0.0:
            lo = delta
        else:
            hi = delta
        norm = np.sqrt(r2)
        phi = 1.0 / norm - 1.0 / epsilon
        dphi = float(np.sum(c2 / (delta + g_u) ** 3)) / norm**3
        cand = delta - phi / dphi if dphi > 0.0 else np.inf
        if not (lo < cand < hi) or not np.isfinite(cand):
            cand = 0.5 * (lo + hi)
        if cand == delta:
            cand = 0.5 * (lo + hi)
            if cand == delta:
                break  # bracket collapsed to machine width
        delta = cand
    if best_resid <= SECULAR_RTOL * eps2:
        return best_delta, gaps, degen, False
    raise SecularSolveError(
        f"secular equation did not converge in {SECULAR_MAX_ITERS} iterations "
        f"(best relative residual {best_resid / eps2:.3e})",
        lam_max + best_delta,
        best_resid,
    )


def secular_solve(lambdas, coeffs, epsilon: float) -> tuple[float, bool]:
    """Solve sum_j c_j^2 / (omega - lambda_j)^2 = epsilon^2 for omega >= max(lambdas).

    Returns (omega, hard_case). In the regular case the root satisfies
    |sum - epsilon^2| <= 1e-12 * epsilon^2. The hard case occurs when every
    coefficient on the top-eigenvalue cluster vanishes and the remaining sum
    already falls below epsilon^2 at the boundary; then omega = max(lambdas)
    is returned and the caller places the leftover norm on that cluster.
    """
    lam = np.asarray(lambdas, dtype=float)
    c = np.abs(np.asarray(coeffs, dtype=float))
    if lam.ndim != 1 or lam.size == 0 or lam.shape != c.shape:
        raise ValueError("lambdas and coeffs must be matching nonempty vectors")
    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(c))):
        raise ValueError("lambdas and coeffs must be finite")
    if not (np.isfinite(epsilon) and epsilon > 0.0):
        raise ValueError("epsilon must be positive; the zero-radius case is trivial")
    delta, _, _, hard = _secular_delta(lam, c, epsilon)
    return float(lam.max()) + delta, hard


def _expand_solution(gaps, coeffs, delta, degen, hard_case, epsilon):
    """Boundary maximizer coordinates given the secular shift.

    coeffs may be complex; the result matches its dtype. Degenerate
    coordinates get zero, except that in the hard case the leftover norm
    budget goes on the first of them.
    """
    c = np.asarray(coeffs)
    x = np.zeros_like(c)
    keep = ~degen
    x[keep] = c[keep] / (delta + gaps[keep])
    if hard_case:
        spare = epsilon * epsilon - float(np.sum(np.abs(x) ** 2))
        j = int(np.flatnonzero(degen)[0])
        x[j] = np.sqrt(max(spare, 0.0))
    return x


def worst_case_error_diagonal(f, g, gamma, epsilon: float):
    """Worst real diagonal perturbation for the per-stream error model.

    Maximizes sum_i (f_i g_i (gamma_i + x_i) - 1)^2 over sum x_i^2 <= eps^2.
    Returns (x, omega, hard_case). With epsilon = 0 the zero vector and the
    trivial multiplier max_i (f_i g_i)^2 come back unflagged.
    """
    fv = np.asarray(f, dtype=float)
    gv = np.asarray(g, dtype=float)
    gam = np.asarray(gamma, dtype=float)
    if not (fv.shape == gv.shape == gam.shape) or fv.ndim != 1 or fv.size == 0:
        raise ValueError("f, g, gamma must be matching nonempty vectors")
    if np.any(fv < 0) or np.any(gv < 0) or np.any(gam < 0):
        raise ValueError("f, g, gamma must be entrywise nonnegative")
    if not (np.isfinite(epsilon) and epsilon >= 0.0):
        raise ValueError("epsilon must be finite and nonnegative")
    a = fv * gv
    lam = a * a
    if epsilon == 0.0:
        return np.zeros_like(a), float(lam.max()), False
    d = a * (a * gam - 1.0)
    delta, gaps, degen, hard = _secular_delta(lam, np.abs(d), epsilon)
    x = _expand_solution(gaps, d, delta, degen, hard, epsilon)
    return x, float(lam.max()) + delta, hard


def worst_case_error_general(f_mat, g_mat, problem: DesignProblem) -> WorstCaseCertificate:
    """Globally worst channel perturbation for an arbitrary transceiver.

    Vectorizes E, diagonalizes the quadratic form of the error energy and
    solves the resulting secular system. The certificate is an exact global
    maximizer of the convex objective over the closed ball.
    """
    f = linalg.as_complex_matrix(f_mat, "F")
    g = linalg.as_complex_matrix(g_mat, "G")
    h = problem.h_tilde
    m, n = h.shape
    L = g.shape[0]
    if f.shape != (n, L) or g.shape[1] != m:
        raise ValueError("F, G dimensions do not conform with h_tilde")
    eps = problem.epsilon

    if eps == 0.0:
        e0 = np.zeros((m, n), dtype=np.complex128)
        sf = np.linalg.svd(f, compute_uv=False)
        sg = np.linalg.svd(g, compute_uv=False)
        lam_top = float((sf[0] * sg[0]) ** 2) if sf.size and sg.size else 0.0
        return WorstCaseCertificate(
            e_star=e0,
            omega=lam_top,
            mse_value=mse(f, g, e0, problem),
            kkt_residual=0.0,
            hard_case=False,
        )

    a0 = (g @ h @ f - np.eye(L)).reshape(-1, order="F")
    # kmat = kron(F.T, G) without generic-kron overhead: vec(G E F) = kmat @ vec(E)
    ft = f.T
    kmat = (ft[:, None, :, None] * g[None, :, None, :]).reshape(L * L, m * n)
    q = kmat.conj().T @ kmat
    q = (q + q.conj().T) / 2.0
    evals, w = linalg.hermitian_eigen(q)
    d = kmat.conj().T @ a0
    cvec = w.conj().T @ d

    delta, gaps, degen, hard = _secular_delta(evals, np.abs(cvec), eps)
    omega = float(evals.max()) + delta
    y = _expand_solution(gaps, cvec, delta, degen, hard, eps)
    e = w @ y
    e_star = e.reshape((m, n), order="F")
    kkt = float(np.linalg.norm(omega * e - q @ e - d))
    value = float(np.sum(np.abs(kmat @ e + a0) ** 2)
                  + problem.noise_var * np.sum(np.abs(g) ** 2))
    return WorstCaseCertificate(
        e_star=e_star,
        omega=float(omega),
        mse_value=value,
        kkt_residual=kkt,
        hard_case=hard,
    )
