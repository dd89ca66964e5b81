"""Brute-force verifiers.

Independent of the production solvers: Monte Carlo lower bounds on the
worst-case MSE, exhaustive grid search over diagonal perturbations, and a
gradient-free search over unstructured transceivers at desk scale. Used by
tests to cross-check certificates and the diagonalizing structure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from . import design, linalg, worstcase
from .design import Transceiver
from .worstcase import DesignProblem

_SAMPLE_CHUNK = 4096


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned search grid: bounds and point counts per dimension."""

    lower: np.ndarray
    upper: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        cnt = np.atleast_1d(np.asarray(self.counts, dtype=int))
        if not (lo.shape == hi.shape == cnt.shape) or lo.ndim != 1:
            raise ValueError("lower, upper, counts must be vectors of one common length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("grid bounds must be finite")
        if np.any(hi < lo):
            raise ValueError("upper bounds must not be below lower bounds")
        if np.any(cnt < 2):
            raise ValueError("point counts must be at least 2")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "counts", cnt)

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, c) for lo, hi, c in zip(self.lower, self.upper, self.counts)]


def sampled_worst_case(f_mat, g_mat, problem: DesignProblem, n_samples: int, seed: int) -> float:
    """Monte Carlo lower bound on the worst-case MSE.

    Maximizes the MSE over perturbations drawn uniformly on the Frobenius
    sphere of radius epsilon (complex Gaussian fill, normalized, scaled).
    Chunks draw from counter-split generator streams, so the result for a
    fixed seed does not depend on the evaluation schedule.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    f = linalg.as_complex_matrix(f_mat, "F")
    g = linalg.as_complex_matrix(g_mat, "G")
    zero = np.zeros_like(problem.h_tilde)
    if problem.epsilon == 0.0:
        return worstcase.mse(f, g, zero, problem)
    m, n = problem.h_tilde.shape
    base = g @ problem.h_tilde @ f - np.eye(f.shape[1])
    noise = problem.noise_var * linalg.frobenius_norm(g) ** 2
    root = np.random.Philox(key=seed)
    best = -np.inf
    done = 0
    chunk_idx = 0
    while done < n_samples:
        k = min(_SAMPLE_CHUNK, n_samples - done)
        rng = np.random.Generator(root.jumped(chunk_idx))
        z = rng.normal(size=(k, m, n)) + 1j * rng.normal(size=(k, m, n))
        norms = np.sqrt(np.sum(np.abs(z) ** 2, axis=(1, 2)))
        norms = np.maximum(norms, np.finfo(float).tiny)
        e = (problem.epsilon / norms)[:, None, None] * z
        res = base[None, :, :] + np.einsum("lm,kmn,nj->klj", g, e, f)
        vals = np.sum(np.abs(res) ** 2, axis=(1, 2)) + noise
        best = max(best, float(vals.max()))
        done += k
        chunk_idx += 1
    return best


def grid_worst_case_diagonal(f, g, gamma, epsilon: float, grid: GridSpec, noise_var: float = 0.0):
    """Exhaustive search for the worst real diagonal perturbation.

    Scans the grid restricted to the ball sum x_i^2 <= epsilon^2 and returns
    the best point with its MSE value (including the noise term when
    noise_var is given). Refuses more than three streams; the grid explodes.
    """
    fv = np.asarray(f, dtype=float)
    gv = np.asarray(g, dtype=float)
    gam = np.asarray(gamma, dtype=float)
    L = fv.size
    if L > 3:
        raise ValueError("grid search supports at most 3 streams")
    if not (fv.shape == gv.shape == gam.shape == (L,)) or L == 0:
        raise ValueError("f, g, gamma must be matching nonempty vectors")
    if grid.lower.size != L:
        raise ValueError("grid dimension must match the number of streams")
    a = fv * gv
    noise = float(noise_var * np.sum(gv**2))
    mesh = np.meshgrid(*grid.axes(), indexing="ij")
    radius2 = sum(m**2 for m in mesh)
    mask = radius2 <= epsilon**2 * (1.0 + 1e-12)
    if not mask.any():
        x0 = np.zeros(L)
        return x0, float(np.sum((a * gam - 1.0) ** 2)) + noise
    err = np.zeros_like(mesh[0])
    for i in range(L):
        err += (a[i] * (gam[i] + mesh[i]) - 1.0) ** 2
    err = np.where(mask, err, -np.inf)
    flat = int(np.argmax(err))
    idx = np.unravel_index(flat, err.shape)
    x_best = np.array([float(mesh[i][idx]) for i in range(L)])
    return x_best, float(err[idx]) + noise


def _pack(f_mat, g_mat):
    return np.concatenate([
        f_mat.real.ravel(), f_mat.imag.ravel(),
        g_mat.real.ravel(), g_mat.imag.ravel(),
    ])


def _unpack(params):
    f_mat = (params[0:4] + 1j * params[4:8]).reshape(2, 2)
    g_mat = (params[8:12] + 1j * params[12:16]).reshape(2, 2)
    return f_mat, g_mat


def _project_power(f_mat, power):
    total = float(np.sum(np.abs(f_mat) ** 2))
    if total > power:
        return f_mat * np.sqrt(power / total)
    return f_mat


def unstructured_design_search(problem: DesignProblem, restarts: int, seed: int) -> Transceiver:
    """Best-effort search over arbitrary 2x2 transceivers.

    Runs a Nelder-Mead simplex over the 16 real parameters of (F, G) with
    the power budget enforced by radial projection, from `restarts` random
    starts plus the structured optimum. The objective is the exact
    worst-case MSE, so the result can only tie or beat structured designs
    if the structure were suboptimal.
    """
    if problem.h_tilde.shape != (2, 2) or problem.streams != 2:
        raise ValueError("unstructured search is restricted to M = N = L = 2")
    power = problem.power

    def objective(params):
        f_mat, g_mat = _unpack(params)
        f_mat = _project_power(f_mat, power)
        return worstcase.worst_case_error_general(f_mat, g_mat, problem).mse_value

    structured, _ = design.robust_design(problem)
    starts = [_pack(structured.F, structured.G)]
    for r in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence((seed, r)))
        f0 = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        f0 *= np.sqrt(power) / np.linalg.norm(f0)
        g0 = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) / np.sqrt(2.0)
        starts.append(_pack(f0, g0))

    best_params = starts[0]
    best_val = objective(starts[0])
    for x0 in starts:
        res = scipy.optimize.minimize(
            objective, x0, method="Nelder-Mead",
            options={"maxiter": 1000, "maxfev": 1000, "xatol": 1e-5, "fatol": 1e-9},
        )
        val = float(res.fun)
        if val < best_val:
            best_val = val
            best_params = res.x
    f_mat, g_mat = _unpack(np.asarray(best_params, dtype=float))
    f_mat = _project_power(f_mat, power)
    wc = worstcase.worst_case_error_general(f_mat, g_mat, problem).mse_value
    return Transceiver(F=f_mat, G=g_mat, worst_case_mse=wc, method_tag="unstructured_search")
