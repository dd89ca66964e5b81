"""Transceiver construction.

Three designs over the same channel-diagonalizing structure: the globally
optimal worst-case-robust design (scalar cone program on the singular
values), the non-robust water-filling MMSE design for the nominal channel,
and an alternating block-coordinate baseline that fixes one side and solves
the restricted cone program for the other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import conic, linalg, worstcase
from .conic import ConicSolverError, ConeProgram, LinearConstraint, RotatedConeConstraint
from .worstcase import DesignProblem, WorstCaseCertificate

METHOD_TAGS = (
    "robust_optimal",
    "alternating_I",
    "alternating_II",
    "alternating_III",
    "nonrobust",
    "unstructured_search",
)
_SCHEME_TAGS = {"I": "alternating_I", "II": "alternating_II", "III": "alternating_III"}


class AlternatingFailure(RuntimeError):
    """A block subproblem of the alternating baseline failed; carries the partial trace."""

    def __init__(self, message: str, trace: "IterationTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class Transceiver:
    """A linear precoder/equalizer pair with its certified worst-case MSE."""

    F: np.ndarray  # N x L precoder
    G: np.ndarray  # L x M equalizer
    worst_case_mse: float
    method_tag: str

    def __post_init__(self):
        if self.method_tag not in METHOD_TAGS:
            raise ValueError(f"unknown method_tag {self.method_tag!r}")


@dataclass(frozen=True)
class ScalarDesign:
    """Per-stream gains in the channel-diagonalizing frame."""

    gamma: np.ndarray
    f: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        gam = np.asarray(self.gamma, dtype=float)
        f = np.asarray(self.f, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if not (gam.shape == f.shape == g.shape) or gam.ndim != 1:
            raise ValueError("gamma, f, g must be vectors of one common length")
        if np.any(f < 0.0) or np.any(g < 0.0):
            raise ValueError("f and g must be entrywise nonnegative")
        object.__setattr__(self, "gamma", gam)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    objective: float
    step: str  # "f-step" or "g-step"


@dataclass(frozen=True)
class IterationTrace:
    entries: tuple[TraceEntry, ...]


def recover_scalars(m, n):
    """Map cone variables (m_i, n_i) back to gains f_i = m_i/sqrt(n_i), g_i = sqrt(n_i).

    A stream with n_i = 0 and m_i = 0 is pruned to f_i = g_i = 0; n_i = 0
    with m_i != 0 is rejected, since the stream would carry power through a
    zero equalizer.
    """
    m = np.asarray(m, dtype=float)
    n = np.asarray(n, dtype=float)
    if m.shape != n.shape or m.ndim != 1:
        raise ValueError("m and n must be vectors of the same length")
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(n))):
        raise ValueError("m and n must be finite")
    if np.any(n < 0.0):
        raise ValueError("n must be entrywise nonnegative")
    dead = n == 0.0
    if np.any(dead & (m != 0.0)):
        raise ValueError("stream carries power with zero equalizer gain")
    f = np.zeros_like(m)
    g = np.zeros_like(m)
    g[~dead] = np.sqrt(n[~dead])
    f[~dead] = m[~dead] / g[~dead]
    return f, g


def _lift(sv: linalg.SvdFactors, f: np.ndarray, g: np.ndarray, streams: int):
    fmat = sv.v[:, :streams] @ np.diag(f.astype(float))
    gmat = np.diag(g.astype(float)) @ sv.u[:, :streams].conj().T
    return fmat, gmat


def _water_fill(gamma: np.ndarray, noise_var: float, power: float) -> np.ndarray:
    """Exact MMSE water-filling over streams sorted by gain.

    f_i^2 = max(0, sigma/(gamma_i sqrt(nu)) - sigma^2/gamma_i^2) with the
    level nu fixed by the power budget over the active prefix.
    """
    gam = np.asarray(gamma, dtype=float)
    sig = float(np.sqrt(noise_var))
    L = gam.size
    for k in range(L, 0, -1):
        top = gam[:k]
        sqrt_nu = sig * np.sum(1.0 / top) / (power + noise_var * np.sum(1.0 / top**2))
        if top[-1] > sig * sqrt_nu:
            f = np.zeros(L)
            f[:k] = np.sqrt(sig / (top * sqrt_nu) - noise_var / top**2)
            return f
    raise AssertionError("water-filling found no active stream")  # unreachable: k=1 always passes


def _scalar_objective(f, g, gamma, epsilon: float, noise_var: float) -> float:
    # worst-case MSE of a diagonal pair: diagonal worst perturbation + noise
    a = f * g
    x, _, _ = worstcase.worst_case_error_diagonal(f, g, gamma, epsilon)
    err = np.sum((a * (gamma + x) - 1.0) ** 2)
    return float(err + noise_var * np.sum(g * g))


def _mmse_equalizer(gamma, f, noise_var):
    return gamma * f / (gamma**2 * f**2 + noise_var)


def nonrobust_design(problem: DesignProblem) -> Transceiver:
    """Water-filling MMSE design for the nominal channel, ignoring uncertainty."""
    sv = linalg.svd(problem.h_tilde)
    L = problem.streams
    gam = sv.sigma[:L]
    f = _water_fill(gam, problem.noise_var, problem.power)
    g = _mmse_equalizer(gam, f, problem.noise_var)
    fmat, gmat = _lift(sv, f, g, L)
    wc = worstcase.worst_case_error_general(fmat, gmat, problem).mse_value
    return Transceiver(F=fmat, G=gmat, worst_case_mse=wc, method_tag="nonrobust")


def _diagonal_certificate(sv, f, g, fmat, gmat, problem) -> WorstCaseCertificate:
    # certificate with the worst perturbation aligned to the channel frame,
    # validated against the stationarity system of the unrestricted inner
    # maximization
    L = problem.streams
    gam = sv.sigma[:L]
    x, omega, hard = worstcase.worst_case_error_diagonal(f, g, gam, problem.epsilon)
    e_star = (sv.u[:, :L] * x) @ sv.v[:, :L].conj().T
    mse_value = worstcase.mse(fmat, gmat, e_star, problem)
    if problem.epsilon == 0.0:
        kkt = 0.0
    else:
        kmat = np.kron(fmat.T, gmat)
        a0 = (gmat @ problem.h_tilde @ fmat - np.eye(L)).flatten(order="F")
        d = kmat.conj().T @ a0
        e = e_star.flatten(order="F")
        kkt = float(np.linalg.norm(omega * e - kmat.conj().T @ (kmat @ e) - d))
    return WorstCaseCertificate(
        e_star=e_star, omega=float(omega), mse_value=mse_value,
        kkt_residual=kkt, hard_case=hard,
    )


def robust_design(problem: DesignProblem):
    """Globally optimal worst-case-robust transceiver.

    Solves the rotated-cone scalar program on the top singular values of the
    nominal channel, recovers per-stream gains, and lifts them through the
    channel's singular bases. Returns the transceiver together with a
    certificate holding the worst-case perturbation, its multiplier and the
    stationarity residual.
    """
    sv = linalg.svd(problem.h_tilde)
    L = problem.streams
    gam = sv.sigma[:L]
    prog = conic.build_robust_program(gam, problem.epsilon, problem.noise_var, problem.power)
    sol = conic.solve(prog)
    if sol.status != "optimal":
        raise ConicSolverError(f"robust design solve ended with status {sol.status!r}", sol)
    m = np.array([sol.primal[prog.var_index(f"m{i + 1}")] for i in range(L)])
    n = np.array([sol.primal[prog.var_index(f"n{i + 1}")] for i in range(L)])
    m = np.where(n > 0.0, m, 0.0)
    n = np.maximum(n, 0.0)
    f, g = recover_scalars(m, n)
    total = float(f @ f)
    if total > problem.power:
        f = f * np.sqrt(problem.power / total)
    fmat, gmat = _lift(sv, f, g, L)
    cert = _diagonal_certificate(sv, f, g, fmat, gmat, problem)
    wc = worstcase.worst_case_error_general(fmat, gmat, problem).mse_value
    xcvr = Transceiver(F=fmat, G=gmat, worst_case_mse=wc, method_tag="robust_optimal")
    return xcvr, cert


# --- alternating baseline ---------------------------------------------------


def _expr(nv, terms, offset=0.0):
    co = np.zeros(nv)
    for idx, val in terms:
        co[idx] += val
    return conic.LinearExpr(co, float(offset))


def _solve_block(program: ConeProgram, what: str) -> conic.ConeSolution:
    sol = conic.solve(program)
    if sol.status != "optimal":
        raise ConicSolverError(f"{what} solve ended with status {sol.status!r}", sol)
    return sol


def _f_step(gamma, epsilon, noise_var, power, g_fixed):
    """Best f for fixed g: cone program over the active streams.

    Streams with g_i = 0 contribute a constant unit error and stay at
    f_i = 0; with n_i = g_i^2 fixed the noise term is a constant offset and
    the power coupling n_i p_i >= m_i^2 has a constant leading entry.
    """
    act = np.flatnonzero(g_fixed > 0.0)
    L = gamma.size
    f = np.zeros(L)
    if act.size == 0:
        return f
    robust = epsilon > 0.0
    A = act.size
    names = [f"z{i + 1}" for i in range(A)]
    if robust:
        names.append("mu")
    names += [f"m{i + 1}" for i in range(A)]
    if robust:
        names += [f"s{i + 1}" for i in range(A)]
    names += [f"p{i + 1}" for i in range(A)]
    nv = len(names)
    idx = {nm: k for k, nm in enumerate(names)}
    c = np.zeros(nv)
    cones, lins = [], []
    n_fix = g_fixed[act] ** 2
    for k, i in enumerate(act):
        zi, mi, pi = idx[f"z{k + 1}"], idx[f"m{k + 1}"], idx[f"p{k + 1}"]
        c[zi] = 1.0
        if robust:
            si = idx[f"s{k + 1}"]
            cones.append(RotatedConeConstraint(
                u=_expr(nv, [(zi, 1.0)]),
                v=_expr(nv, [(si, -1.0)], 1.0),
                w=_expr(nv, [(mi, gamma[i])], -1.0),
            ))
            cones.append(RotatedConeConstraint(
                u=_expr(nv, [(idx["mu"], 1.0)]),
                v=_expr(nv, [(si, 1.0)]),
                w=_expr(nv, [(mi, epsilon)]),
            ))
            lins.append(LinearConstraint(_expr(nv, [(si, -1.0)], 1.0 - conic.TOL_S), f"s{k + 1}_upper"))
        else:
            cones.append(RotatedConeConstraint(
                u=_expr(nv, [(zi, 1.0)]),
                v=_expr(nv, [], 1.0),
                w=_expr(nv, [(mi, gamma[i])], -1.0),
            ))
        cones.append(RotatedConeConstraint(
            u=_expr(nv, [], float(n_fix[k])),
            v=_expr(nv, [(pi, 1.0)]),
            w=_expr(nv, [(mi, 1.0)]),
        ))
    if robust:
        c[idx["mu"]] = 1.0
        lins.append(LinearConstraint(_expr(nv, [(idx["mu"], 1.0)], -conic.MU_FLOOR), "mu_floor"))
    lins.append(LinearConstraint(
        _expr(nv, [(idx[f"p{k + 1}"], -1.0) for k in range(A)], power), "power"))
    offset = float(noise_var * np.sum(n_fix) + (L - A) * 1.0)
    prog = ConeProgram(
        num_vars=nv, objective=c, cone_constraints=tuple(cones),
        linear_constraints=tuple(lins), variable_names=tuple(names),
        objective_offset=offset,
    )
    sol = _solve_block(prog, "f-step")
    m = np.array([sol.primal[idx[f"m{k + 1}"]] for k in range(A)])
    f[act] = np.maximum(m, 0.0) / g_fixed[act]
    total = float(f @ f)
    if total > power:
        f *= np.sqrt(power / total)
    return f


def _g_step(gamma, epsilon, noise_var, f_fixed):
    """Best g for fixed f: unconstrained-in-power cone program.

    m_i = f_i g_i is affine in g_i and the noise term enters through
    n_i >= g_i^2. Streams with f_i = 0 are best served by g_i = 0.
    """
    act = np.flatnonzero(f_fixed > 0.0)
    L = gamma.size
    g = np.zeros(L)
    if act.size == 0:
        return g
    robust = epsilon > 0.0
    A = act.size
    names = [f"z{i + 1}" for i in range(A)]
    if robust:
        names.append("mu")
    names += [f"n{i + 1}" for i in range(A)]
    names += [f"g{i + 1}" for i in range(A)]
    if robust:
        names += [f"s{i + 1}" for i in range(A)]
    nv = len(names)
    idx = {nm: k for k, nm in enumerate(names)}
    c = np.zeros(nv)
    cones, lins = [], []
    for k, i in enumerate(act):
        zi, ni, gi = idx[f"z{k + 1}"], idx[f"n{k + 1}"], idx[f"g{k + 1}"]
        c[zi] = 1.0
        c[ni] = noise_var
        fg = float(f_fixed[i])
        if robust:
            si = idx[f"s{k + 1}"]
            cones.append(RotatedConeConstraint(
                u=_expr(nv, [(zi, 1.0)]),
                v=_expr(nv, [(si, -1.0)], 1.0),
                w=_expr(nv, [(gi, gamma[i] * fg)], -1.0),
            ))
            cones.append(RotatedConeConstraint(
                u=_expr(nv, [(idx["mu"], 1.0)]),
                v=_expr(nv, [(si, 1.0)]),
                w=_expr(nv, [(gi, epsilon * fg)]),
            ))
            lins.append(LinearConstraint(_expr(nv, [(si, -1.0)], 1.0 - conic.TOL_S), f"s{k + 1}_upper"))
        else:
            cones.append(RotatedConeConstraint(
                u=_expr(nv, [(zi, 1.0)]),
                v=_expr(nv, [], 1.0),
                w=_expr(nv, [(gi, gamma[i] * fg)], -1.0),
            ))
        cones.append(RotatedConeConstraint(
            u=_expr(nv, [(ni, 1.0)]),
            v=_expr(nv, [], 1.0),
            w=_expr(nv, [(gi, 1.0)]),
        ))
    if robust:
        c[idx["mu"]] = 1.0
        lins.append(LinearConstraint(_expr(nv, [(idx["mu"], 1.0)], -conic.MU_FLOOR), "mu_floor"))
    prog = ConeProgram(
        num_vars=nv, objective=c, cone_constraints=tuple(cones),
        linear_constraints=tuple(lins), variable_names=tuple(names),
        objective_offset=float((L - A) * 1.0),
    )
    sol = _solve_block(prog, "g-step")
    vals = np.array([sol.primal[idx[f"g{k + 1}"]] for k in range(A)])
    g[act] = np.maximum(vals, 0.0)
    return g


def alternating_design(problem: DesignProblem, scheme: str, max_iters: int = 100,
                       tol: float = 1e-8, seed: int = 0):
    """Block-coordinate baseline: alternate exact f-steps and g-steps.

    scheme selects the starting precoder: "I" splits the power budget
    equally, "II" starts from the non-robust water-filling solution, "III"
    draws a uniformly random direction on the sphere (seeded) scaled to the
    power budget. The first equalizer is the nominal MMSE response to the
    start. Stops when the relative objective decrease over a full round
    drops below tol.
    """
    if scheme not in _SCHEME_TAGS:
        raise ValueError(f"scheme must be one of {sorted(_SCHEME_TAGS)}, got {scheme!r}")
    if not (np.isfinite(tol) and tol > 0.0):
        raise ValueError("tol must be positive")
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    sv = linalg.svd(problem.h_tilde)
    L = problem.streams
    gam = sv.sigma[:L]
    power = problem.power
    if scheme == "I":
        f = np.full(L, np.sqrt(power / L))
    elif scheme == "II":
        f = _water_fill(gam, problem.noise_var, power)
    else:
        rng = np.random.default_rng(seed)
        direction = rng.normal(size=L)
        nrm = float(np.linalg.norm(direction))
        if nrm < 1e-12:
            f = np.full(L, np.sqrt(power / L))
        else:
            f = np.abs(direction) / nrm * np.sqrt(power)
    g = _mmse_equalizer(gam, f, problem.noise_var)

    entries: list[TraceEntry] = []
    obj_prev = _scalar_objective(f, g, gam, problem.epsilon, problem.noise_var)
    for it in range(1, max_iters + 1):
        try:
            f = _f_step(gam, problem.epsilon, problem.noise_var, power, g)
            entries.append(TraceEntry(it, _scalar_objective(f, g, gam, problem.epsilon, problem.noise_var), "f-step"))
            g = _g_step(gam, problem.epsilon, problem.noise_var, f)
        except ConicSolverError as exc:
            raise AlternatingFailure(str(exc), IterationTrace(tuple(entries))) from exc
        obj = _scalar_objective(f, g, gam, problem.epsilon, problem.noise_var)
        entries.append(TraceEntry(it, obj, "g-step"))
        if obj_prev - obj < tol * max(1.0, abs(obj_prev)):
            break
        obj_prev = obj

    fmat, gmat = _lift(sv, f, g, L)
    wc = worstcase.worst_case_error_general(fmat, gmat, problem).mse_value
    xcvr = Transceiver(F=fmat, G=gmat, worst_case_mse=wc, method_tag=_SCHEME_TAGS[scheme])
    return xcvr, IterationTrace(tuple(entries))
