"""Rotated-cone reformulation of the robust per-stream design and its solver.

The robust design problem for the channel-diagonalized scalars reduces to

    minimize  sum_i z_i + mu + noise_var * sum_i n_i

where z_i bounds the i-th nominal error term, mu prices the uncertainty
ball, n_i = g_i^2 carries the noise amplification and m_i = f_i g_i is the
per-stream gain. Each 2x2 positive-semidefinite block of the matrix form
is exactly one rotated quadratic cone (u, v, w) with u v >= w^2, u >= 0,
v >= 0, which is what `build_robust_program` emits and what the dense
primal-dual interior-point method in `solve` consumes.

The solver is a Mehrotra predictor-corrector with Nesterov-Todd scaling
over a product of a nonnegative orthant and three-dimensional second-order
cones. All linear algebra is dense; the programs here have a few hundred
variables at most.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np
import scipy.linalg

TOL_S = 1e-9  # strict upper margin on each s_i: s_i <= 1 - TOL_S
MU_FLOOR = 1e-12  # lower bound on mu whenever the uncertainty radius is positive

FEAS_TOL = 1e-9
GAP_TOL = 1e-9
VIOLATION_TOL = 1e-9
MAX_ITERS = 200
STEP_FRACTION = 0.99

_TRACE = False  # set True to print per-iteration progress of solve()


class ConicSolverError(RuntimeError):
    """A cone solve needed by a design routine did not reach optimality."""

    def __init__(self, message: str, solution: "ConeSolution"):
        super().__init__(message)
        self.solution = solution


@dataclass(frozen=True)
class LinearExpr:
    """Affine expression coeffs @ x + offset over the program variables."""

    coeffs: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        co = np.asarray(self.coeffs, dtype=float)
        if co.ndim != 1:
            raise ValueError("expression coefficients must be a vector")
        object.__setattr__(self, "coeffs", co)
        object.__setattr__(self, "offset", float(self.offset))

    def value(self, x: np.ndarray) -> float:
        return float(self.coeffs @ x) + self.offset


@dataclass(frozen=True)
class RotatedConeConstraint:
    """Membership (u, v, w) in the rotated cone u v >= w^2, u >= 0, v >= 0."""

    u: LinearExpr
    v: LinearExpr
    w: LinearExpr


@dataclass(frozen=True)
class LinearConstraint:
    """Affine inequality expr >= 0."""

    expr: LinearExpr
    label: str = ""


@dataclass(frozen=True)
class ConeProgram:
    """A linear objective over rotated-cone and affine inequality constraints."""

    num_vars: int
    objective: np.ndarray
    cone_constraints: tuple[RotatedConeConstraint, ...]
    linear_constraints: tuple[LinearConstraint, ...]
    variable_names: tuple[str, ...]
    objective_offset: float = 0.0

    def __post_init__(self):
        obj = np.asarray(self.objective, dtype=float)
        object.__setattr__(self, "objective", obj)
        if obj.shape != (self.num_vars,):
            raise ValueError("objective length does not match num_vars")
        if len(self.variable_names) != self.num_vars:
            raise ValueError("variable_names length does not match num_vars")
        for cone in self.cone_constraints:
            for e in (cone.u, cone.v, cone.w):
                if e.coeffs.shape != (self.num_vars,):
                    raise ValueError("cone expression does not match num_vars")
        for lc in self.linear_constraints:
            if lc.expr.coeffs.shape != (self.num_vars,):
                raise ValueError("linear expression does not match num_vars")

    def var_index(self, name: str) -> int:
        return self.variable_names.index(name)


@dataclass(frozen=True)
class ConeSolution:
    """Outcome of a cone solve.

    status is one of {"optimal", "infeasible", "max_iters",
    "numerical_failure"}; on "optimal" the reported complementarity gap is
    below 1e-9 * (1 + |objective_value|) and every constraint violation at
    the primal point is below 1e-9.
    """

    status: str
    primal: np.ndarray
    objective_value: float
    duality_gap: float
    max_violation: float
    iterations: int
    message: str = ""


def lmi2x2_check(a: float, b: float, c: float) -> bool:
    """Whether the symmetric 2x2 matrix [[a, b], [b, c]] is positive semidefinite.

    Equivalent to the rotated-cone membership a >= 0, c >= 0, a*c >= b^2.
    """
    return bool(a >= 0.0 and c >= 0.0 and a * c >= b * b)


def _expr(nv: int, terms, offset: float = 0.0) -> LinearExpr:
    co = np.zeros(nv)
    for idx, val in terms:
        co[idx] += val
    return LinearExpr(co, float(offset))


def build_robust_program(gamma, epsilon: float, noise_var: float, power: float) -> ConeProgram:
    """Scalarized robust design as a rotated-cone program.

    Variables, per stream i of the L = len(gamma) streams:
      z_i  epigraph of the worst-case error term,
      n_i  squared equalizer gain g_i^2,
      m_i  combined gain f_i g_i,
      s_i  fraction of mu consumed by the uncertainty on stream i,
      p_i  share of the power budget,
    plus the shared uncertainty price mu. The objective is
    sum z_i + mu + noise_var * sum n_i.

    Reformulation contract: the worst-case error constraint per stream is
    the pair of 2x2 positive-semidefinite blocks

        [[z_i, gamma_i m_i - 1], [gamma_i m_i - 1, 1 - s_i]] >= 0
        [[mu, epsilon m_i], [epsilon m_i, s_i]] >= 0

    each of which is exactly one rotated cone here; the power constraint
    sum m_i^2 / n_i <= power becomes the cones n_i p_i >= m_i^2 with
    sum p_i <= power. s_i < 1 is kept strict through s_i <= 1 - 1e-9, and
    mu >= 1e-12 keeps the uncertainty price away from zero. With epsilon = 0
    the mu and s variables are dropped entirely and the error block
    degenerates to z_i >= (gamma_i m_i - 1)^2. The transceiver scalars are
    recovered as f_i = m_i / sqrt(n_i), g_i = sqrt(n_i).
    """
    gam = np.asarray(gamma, dtype=float)
    if gam.ndim != 1 or gam.size == 0 or not np.all(np.isfinite(gam)):
        raise ValueError("gamma must be a nonempty finite vector")
    if np.any(np.diff(gam) > 0):
        raise ValueError("gamma must be nonincreasing")
    if gam[-1] <= 1e-12 * gam[0] or gam[-1] <= 0:
        raise ValueError("smallest channel gain is below the rank threshold")
    if not (np.isfinite(epsilon) and epsilon >= 0.0):
        raise ValueError("epsilon must be finite and nonnegative")
    if not (np.isfinite(noise_var) and noise_var > 0.0):
        raise ValueError("noise_var must be positive")
    if not (np.isfinite(power) and power > 0.0):
        raise ValueError("power must be positive")

    L = gam.size
    robust = epsilon > 0.0
    names: list[str] = [f"z{i + 1}" for i in range(L)]
    if robust:
        names.append("mu")
    names += [f"n{i + 1}" for i in range(L)]
    names += [f"m{i + 1}" for i in range(L)]
    if robust:
        names += [f"s{i + 1}" for i in range(L)]
    names += [f"p{i + 1}" for i in range(L)]
    nv = len(names)
    idx = {name: k for k, name in enumerate(names)}

    c = np.zeros(nv)
    for i in range(L):
        c[idx[f"z{i + 1}"]] = 1.0
        c[idx[f"n{i + 1}"]] = noise_var
    if robust:
        c[idx["mu"]] = 1.0

    cones: list[RotatedConeConstraint] = []
    lins: list[LinearConstraint] = []
    for i in range(L):
        zi, ni, mi, pi = (idx[f"z{i + 1}"], idx[f"n{i + 1}"], idx[f"m{i + 1}"], idx[f"p{i + 1}"])
        if robust:
            si = idx[f"s{i + 1}"]
            cones.append(
                RotatedConeConstraint(
                    u=_expr(nv, [(zi, 1.0)]),
                    v=_expr(nv, [(si, -1.0)], 1.0),
                    w=_expr(nv, [(mi, gam[i])], -1.0),
                )
            )
        else:
            cones.append(
                RotatedConeConstraint(
                    u=_expr(nv, [(zi, 1.0)]),
                    v=_expr(nv, [], 1.0),
                    w=_expr(nv, [(mi, gam[i])], -1.0),
                )
            )
    if robust:
        for i in range(L):
            mi, si = idx[f"m{i + 1}"], idx[f"s{i + 1}"]
            cones.append(
                RotatedConeConstraint(
                    u=_expr(nv, [(idx["mu"], 1.0)]),
                    v=_expr(nv, [(si, 1.0)]),
                    w=_expr(nv, [(mi, epsilon)]),
                )
            )
    for i in range(L):
        ni, mi, pi = idx[f"n{i + 1}"], idx[f"m{i + 1}"], idx[f"p{i + 1}"]
        cones.append(
            RotatedConeConstraint(
                u=_expr(nv, [(ni, 1.0)]),
                v=_expr(nv, [(pi, 1.0)]),
                w=_expr(nv, [(mi, 1.0)]),
            )
        )

    if robust:
        for i in range(L):
            si = idx[f"s{i + 1}"]
            lins.append(
                LinearConstraint(_expr(nv, [(si, -1.0)], 1.0 - TOL_S), f"s{i + 1}_upper")
            )
        lins.append(LinearConstraint(_expr(nv, [(idx["mu"], 1.0)], -MU_FLOOR), "mu_floor"))
    power_terms = [(idx[f"p{i + 1}"], -1.0) for i in range(L)]
    lins.append(LinearConstraint(_expr(nv, power_terms, power), "power"))

    return ConeProgram(
        num_vars=nv,
        objective=c,
        cone_constraints=tuple(cones),
        linear_constraints=tuple(lins),
        variable_names=tuple(names),
    )


def dump_program(program: ConeProgram) -> str:
    """Deterministic plain-text listing of a program, one constraint per line."""

    def fmt(expr: LinearExpr) -> str:
        parts = [
            f"{expr.coeffs[k]:+.17g}*{program.variable_names[k]}"
            for k in range(program.num_vars)
            if expr.coeffs[k] != 0.0
        ]
        parts.append(f"{expr.offset:+.17g}")
        return " ".join(parts)

    lines = [
        f"conic program: {program.num_vars} variables, "
        f"{len(program.cone_constraints)} cones, "
        f"{len(program.linear_constraints)} linear"
    ]
    lines.append("variables: " + " ".join(program.variable_names))
    lines.append("minimize " + fmt(LinearExpr(program.objective, program.objective_offset)))
    for k, cone in enumerate(program.cone_constraints):
        lines.append(f"rcone {k}: u = {fmt(cone.u)} | v = {fmt(cone.v)} | w = {fmt(cone.w)}")
    for k, lc in enumerate(program.linear_constraints):
        tag = f" ({lc.label})" if lc.label else ""
        lines.append(f"linear {k}: {fmt(lc.expr)} >= 0{tag}")
    return "\n".join(lines) + "\n"


def max_violation(program: ConeProgram, x: np.ndarray) -> float:
    """Largest constraint violation of a primal point, zero when feasible."""
    worst = 0.0
    for lc in program.linear_constraints:
        worst = max(worst, -lc.expr.value(x))
    for cone in program.cone_constraints:
        u, v, w = cone.u.value(x), cone.v.value(x), cone.w.value(x)
        worst = max(worst, -u, -v, w * w - u * v)
    return worst


# --- solve telemetry -------------------------------------------------------

_LOG_STACK: list[list[ConeSolution]] = []


@contextmanager
def solution_log():
    """Collect every ConeSolution produced by solve() inside the block."""
    log: list[ConeSolution] = []
    _LOG_STACK.append(log)
    try:
        yield log
    finally:
        # lists compare by value, so nested logs with identical contents
        # would alias under list.remove; unwind by identity instead
        for i in range(len(_LOG_STACK) - 1, -1, -1):
            if _LOG_STACK[i] is log:
                del _LOG_STACK[i]
                break


# --- interior-point internals ---------------------------------------------

_J = np.diag([1.0, -1.0, -1.0])


class _NumericalError(Exception):
    pass


def _jmul(u: np.ndarray) -> np.ndarray:
    out = u.copy()
    out[:, 1:] *= -1.0
    return out


def _soc_margin(u: np.ndarray) -> np.ndarray:
    return u[:, 0] - np.hypot(u[:, 1], u[:, 2])


def _jdot_stable(u: np.ndarray) -> np.ndarray:
    # u0^2 - u1^2 - u2^2 in the factored form margin * (u0 + |tail|), which
    # stays accurate when the margin is tiny relative to u0
    tail = np.hypot(u[:, 1], u[:, 2])
    return (u[:, 0] - tail) * (u[:, 0] + tail)


def _arrow_prod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty_like(a)
    out[:, 0] = np.sum(a * b, axis=1)
    out[:, 1] = a[:, 0] * b[:, 1] + b[:, 0] * a[:, 1]
    out[:, 2] = a[:, 0] * b[:, 2] + b[:, 0] * a[:, 2]
    return out


def _arrow_mats(a: np.ndarray) -> np.ndarray:
    # arrow(a) = [[a0, a1, a2], [a1, a0, 0], [a2, 0, a0]] per block
    m = np.zeros((a.shape[0], 3, 3))
    m[:, 0, :] = a
    m[:, 1, 0] = a[:, 1]
    m[:, 2, 0] = a[:, 2]
    m[:, 1, 1] = a[:, 0]
    m[:, 2, 2] = a[:, 0]
    return m


class _Scaling:
    """Nesterov-Todd scaling point for the orthant x SOC^3 product cone.

    For each cone block W = eta * (2 v v^T - J) with v^T J v = 1, chosen so
    that W^2 z = s; then lambda = W z = W^{-1} s. The square W^2 has the
    same form directly in terms of wbar = v o v, which is what the normal
    equations use.
    """

    def __init__(self, s_l, z_l, s_q, z_q):
        if np.any(s_l <= 0.0) or np.any(z_l <= 0.0):
            raise _NumericalError("orthant iterate left the interior")
        self.w_l = np.sqrt(s_l / z_l)
        self.lam_l = np.sqrt(s_l * z_l)
        nq = s_q.shape[0]
        if nq:
            js = _jdot_stable(s_q)
            jz = _jdot_stable(z_q)
            if np.any(js <= 0.0) or np.any(jz <= 0.0) or np.any(s_q[:, 0] <= 0.0) or np.any(z_q[:, 0] <= 0.0):
                raise _NumericalError("cone iterate left the interior")
            sb = s_q / np.sqrt(js)[:, None]
            zb = z_q / np.sqrt(jz)[:, None]
            gam = np.sqrt((1.0 + np.sum(sb * zb, axis=1)) / 2.0)
            self.wbar = (sb + _jmul(zb)) / (2.0 * gam[:, None])
            # half point: v o v = wbar, so (2 v v^T - J)^2 = 2 wbar wbar^T - J
            self.v = self.wbar.copy()
            self.v[:, 0] += 1.0
            self.v /= np.sqrt(2.0 * (self.wbar[:, 0] + 1.0))[:, None]
            self.eta = (js / jz) ** 0.25
            self.lam_q = self.w_apply(z_q)
        else:
            self.wbar = np.zeros((0, 3))
            self.v = np.zeros((0, 3))
            self.eta = np.zeros(0)
            self.lam_q = np.zeros((0, 3))

    def w_apply(self, u: np.ndarray) -> np.ndarray:
        # W u = eta (2 v (v . u) - J u)
        dot = np.sum(self.v * u, axis=1)
        return self.eta[:, None] * (2.0 * self.v * dot[:, None] - _jmul(u))

    def winv_apply(self, u: np.ndarray) -> np.ndarray:
        # W^{-1} u = (1/eta) (2 (J v) ((J v) . u) - J u)
        jv = _jmul(self.v)
        dot = np.sum(jv * u, axis=1)
        return (2.0 * jv * dot[:, None] - _jmul(u)) / self.eta[:, None]

    def w_blocks(self) -> np.ndarray:
        # W = eta (2 v v^T - J) as explicit 3x3 blocks
        hmat = 2.0 * np.einsum("bi,bj->bij", self.v, self.v) - _J[None, :, :]
        return hmat * self.eta[:, None, None]

    def winv_blocks(self) -> np.ndarray:
        # W^{-1} = eta^{-1} (2 (J v)(J v)^T - J) as explicit 3x3 blocks
        jv = _jmul(self.v)
        hinv = 2.0 * np.einsum("bi,bj->bij", jv, jv) - _J[None, :, :]
        return hinv / self.eta[:, None, None]


def _max_step_orthant(u: np.ndarray, du: np.ndarray) -> float:
    neg = du < 0.0
    if not np.any(neg):
        return np.inf
    return float(np.min(-u[neg] / du[neg]))


def _max_step_soc(u: np.ndarray, du: np.ndarray) -> float:
    if u.shape[0] == 0:
        return np.inf
    a = du[:, 0] ** 2 - du[:, 1] ** 2 - du[:, 2] ** 2
    bb = 2.0 * (u[:, 0] * du[:, 0] - u[:, 1] * du[:, 1] - u[:, 2] * du[:, 2])
    cc = np.maximum(_jdot_stable(u), 0.0)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(bb)), np.maximum(cc, 1e-300))
    lin = np.abs(a) <= 1e-14 * scale
    a_safe = np.where(lin, 1.0, a)
    disc = bb * bb - 4.0 * a_safe * cc
    quad = (~lin) & (disc >= 0.0)
    root = np.sqrt(np.maximum(disc, 0.0))
    inf = np.inf
    r1 = np.where(quad, (-bb - root) / (2.0 * a_safe), inf)
    r2 = np.where(quad, (-bb + root) / (2.0 * a_safe), inf)
    neg_b = np.where(bb < 0.0, bb, -1.0)
    r3 = np.where(lin & (bb < 0.0), -cc / neg_b, inf)
    neg_d = np.where(du[:, 0] < 0.0, du[:, 0], -1.0)
    r4 = np.where(du[:, 0] < 0.0, -u[:, 0] / neg_d, inf)  # head crossing zero
    cands = np.concatenate([r1, r2, r3, r4])
    cands[cands <= 0.0] = inf
    return float(cands.min())


def _interior(s_l, z_l, s_q, z_q) -> bool:
    if np.any(s_l <= 0.0) or np.any(z_l <= 0.0):
        return False
    if s_q.shape[0]:
        if np.any(_soc_margin(s_q) <= 0.0) or np.any(_soc_margin(z_q) <= 0.0):
            return False
    return True


def _shift_interior(v: np.ndarray, p: int, nq: int) -> np.ndarray:
    """Push a composite cone point strictly inside by adding a multiple of e."""
    margins = []
    if p:
        margins.append(np.min(v[:p]))
    if nq:
        margins.append(np.min(_soc_margin(v[p:].reshape(nq, 3))))
    t = min(margins)
    if t < 1.0:
        out = v.copy()
        shift = 1.0 - t
        if p:
            out[:p] += shift
        if nq:
            blocks = out[p:].reshape(nq, 3)
            blocks[:, 0] += shift
        return out
    return v


def solve(program: ConeProgram) -> ConeSolution:
    """Solve a ConeProgram with a Mehrotra predictor-corrector interior-point method.

    The rotated cones are mapped isometrically onto standard second-order
    cones via (u, v, w) -> (u + v, u - v, 2 w); the iteration then runs over
    the product of the inequality orthant and those cones with
    Nesterov-Todd scaling, dense normal-equation solves and a combined
    predictor-corrector step. Deterministic: no randomness anywhere.
    """
    nv = program.num_vars
    p = len(program.linear_constraints)
    nq = len(program.cone_constraints)
    if p + nq == 0:
        raise ValueError("program has no constraints")
    rows = p + 3 * nq
    gmat = np.zeros((rows, nv))
    h = np.zeros(rows)
    for j, lc in enumerate(program.linear_constraints):
        gmat[j] = -lc.expr.coeffs
        h[j] = lc.expr.offset
    for k, cone in enumerate(program.cone_constraints):
        r = p + 3 * k
        gmat[r] = -(cone.u.coeffs + cone.v.coeffs)
        h[r] = cone.u.offset + cone.v.offset
        gmat[r + 1] = -(cone.u.coeffs - cone.v.coeffs)
        h[r + 1] = cone.u.offset - cone.v.offset
        gmat[r + 2] = -2.0 * cone.w.coeffs
        h[r + 2] = 2.0 * cone.w.offset

    # Ruiz equilibration to tame variable and constraint scale spread; rows
    # of one cone block share a factor so membership is preserved. The
    # complementarity gap and the objective value are invariant.
    d_col = np.ones(nv)
    for _ in range(6):
        rn = np.max(np.abs(gmat), axis=1)
        if nq:
            rn[p:] = np.repeat(rn[p:].reshape(nq, 3).max(axis=1), 3)
        fr = 1.0 / np.sqrt(np.maximum(rn, 1e-12))
        gmat *= fr[:, None]
        h *= fr
        cn = np.max(np.abs(gmat), axis=0)
        fc = 1.0 / np.sqrt(np.maximum(cn, 1e-12))
        gmat *= fc[None, :]
        d_col *= fc
    c = program.objective * d_col

    def finish(status, x, s, z, iters, message=""):
        x_orig = d_col * x
        obj = float(program.objective @ x_orig) + program.objective_offset
        return ConeSolution(
            status=status,
            primal=x_orig,
            objective_value=obj,
            duality_gap=float(s @ z),
            max_violation=max_violation(program, x_orig),
            iterations=iters,
            message=message,
        )

    def publish(sol: ConeSolution) -> ConeSolution:
        for log in _LOG_STACK:
            log.append(sol)
        return sol

    # least-squares start, shifted strictly inside the cone
    x = np.linalg.lstsq(gmat, h, rcond=None)[0]
    s = _shift_interior(h - gmat @ x, p, nq)
    z = _shift_interior(np.linalg.lstsq(gmat.T, -c, rcond=None)[0], p, nq)

    norm_h = max(1.0, float(np.linalg.norm(h)))
    norm_c = max(1.0, float(np.linalg.norm(c)))
    rho_deg = p + nq
    best = None
    best_score = np.inf

    # full Newton system over (dx, ds, dz):
    #   [0  0  G^T] [dx]   [-rx]
    #   [G  I  0  ] [ds] = [-rz]
    #   [0  C1 C2 ] [dz]   [ d ]
    # where the third block row is the scaled complementarity linearization
    # lambda o (W^{-1} ds + W dz) = d. Factoring the system whole keeps every
    # residual at backward-error level; the G and identity blocks are fixed.
    dim = nv + 2 * rows
    amat = np.zeros((dim, dim))
    amat[:nv, nv + rows:] = gmat.T
    amat[nv:nv + rows, :nv] = gmat
    amat[nv:nv + rows, nv:nv + rows] = np.eye(rows)

    status, message = "max_iters", ""
    iters_done = 0
    try:
        for it in range(1, MAX_ITERS + 1):
            iters_done = it
            s_l, s_q = s[:p], s[p:].reshape(nq, 3)
            z_l, z_q = z[:p], z[p:].reshape(nq, 3)

            if not (np.isfinite(x).all() and np.isfinite(s).all() and np.isfinite(z).all()):
                raise _NumericalError("non-finite iterate")
            rx = gmat.T @ z + c
            rz = gmat @ x + s - h
            gap = float(s @ z)
            obj = float(c @ x)
            pres = float(np.linalg.norm(rz)) / norm_h
            dres = float(np.linalg.norm(rx)) / norm_c
            if _TRACE:
                print(f"[ipm] it={it:3d} pres={pres:.2e} dres={dres:.2e} gap={gap:.3e} obj={obj:.8e}")
            score = max(pres, dres, gap / (1.0 + abs(obj)))
            if score < best_score:
                best_score = score
                best = (x.copy(), s.copy(), z.copy(), it - 1)
            if pres <= FEAS_TOL and dres <= FEAS_TOL and gap <= GAP_TOL * (1.0 + abs(obj)):
                if max_violation(program, d_col * x) < VIOLATION_TOL:
                    return publish(finish("optimal", x, s, z, it - 1))
            hz = float(h @ z)
            if hz < -1e-10 and float(np.linalg.norm(rx - c)) / (-hz) <= 1e-8:
                return publish(
                    finish("infeasible", x, s, z, it - 1, "primal infeasibility certificate")
                )
            cx = float(c @ x)
            if cx < -1e-10 and float(np.linalg.norm(rz + h)) / (-cx) <= 1e-8:
                return publish(
                    finish("infeasible", x, s, z, it - 1, "dual infeasibility certificate (primal unbounded)")
                )

            scal = _Scaling(s_l, z_l, s_q, z_q)
            mu = gap / rho_deg

            # refresh the complementarity block row and refactor. For the
            # orthant lambda o (W^{-1} ds + W dz) reduces to z ds + s dz.
            r3 = nv + rows
            amat[r3:, nv:] = 0.0
            if p:
                ii = np.arange(p)
                amat[r3 + ii, nv + ii] = z_l
                amat[r3 + ii, nv + rows + ii] = s_l
            if nq:
                arr_lam = _arrow_mats(scal.lam_q)
                cs_blocks = np.matmul(arr_lam, scal.winv_blocks())
                cz_blocks = np.matmul(arr_lam, scal.w_blocks())
                off = 3 * np.arange(nq)
                ri = (r3 + p + off)[:, None, None] + np.arange(3)[None, :, None]
                ci = (nv + p + off)[:, None, None] + np.arange(3)[None, None, :]
                amat[ri, ci] = cs_blocks
                amat[ri, ci + rows] = cz_blocks

            # equilibrate, factor; refinement runs against the exact matrix
            row_sc = np.ones(dim)
            col_sc = np.ones(dim)
            asc = amat.copy()
            for _ in range(3):
                rn = np.maximum(np.max(np.abs(asc), axis=1), 1e-12)
                asc /= rn[:, None]
                row_sc /= rn
                cn = np.maximum(np.max(np.abs(asc), axis=0), 1e-12)
                asc /= cn[None, :]
                col_sc /= cn
            try:
                lu = scipy.linalg.lu_factor(asc, check_finite=False)
            except (np.linalg.LinAlgError, ValueError) as exc:
                raise _NumericalError(f"KKT factorization failed: {exc}")

            def kkt_solve(d_l, d_q):
                # Newton direction for complementarity target d, with two
                # rounds of iterative refinement
                rhs = np.concatenate([-rx, -rz, d_l, d_q.ravel()])
                sol = col_sc * scipy.linalg.lu_solve(lu, rhs * row_sc, check_finite=False)
                for _ in range(2):
                    resid = rhs - amat @ sol
                    sol += col_sc * scipy.linalg.lu_solve(lu, resid * row_sc, check_finite=False)
                if _TRACE:
                    resid = rhs - amat @ sol
                    print(
                        f"        solve res: dual={np.linalg.norm(resid[:nv]):.2e} "
                        f"prim={np.linalg.norm(resid[nv:nv + rows]):.2e} "
                        f"comp={np.linalg.norm(resid[nv + rows:]):.2e} "
                        f"|d|={np.linalg.norm(np.concatenate([d_l, d_q.ravel()])):.2e}"
                    )
                return sol[:nv], sol[nv:nv + rows], sol[nv + rows:]

            # predictor: pure Newton step toward complementarity zero
            ds_l_aff = -scal.lam_l**2
            ds_q_aff = -_arrow_prod(scal.lam_q, scal.lam_q) if nq else np.zeros((0, 3))
            dx_a, ds_a, dz_a = kkt_solve(ds_l_aff, ds_q_aff)

            def boundary_step(ds, dz):
                alpha = np.inf
                if p:
                    alpha = min(alpha, _max_step_orthant(
                        np.concatenate([s[:p], z[:p]]), np.concatenate([ds[:p], dz[:p]])))
                if nq:
                    alpha = min(alpha, _max_step_soc(
                        np.concatenate([s_q, z_q]),
                        np.concatenate([ds[p:].reshape(nq, 3), dz[p:].reshape(nq, 3)])))
                return alpha

            alpha_aff = min(1.0, boundary_step(ds_a, dz_a))
            gap_aff = float((s + alpha_aff * ds_a) @ (z + alpha_aff * dz_a))
            sigma = min(1.0, max((max(gap_aff, 0.0) / gap) ** 3, 1e-8))

            # corrector with Mehrotra second-order term
            corr_l = ds_l_aff + sigma * mu
            if p:
                wis = ds_a[:p] / scal.w_l
                wzd = scal.w_l * dz_a[:p]
                corr_l = corr_l - wis * wzd
            if nq:
                wis_q = scal.winv_apply(ds_a[p:].reshape(nq, 3))
                wzd_q = scal.w_apply(dz_a[p:].reshape(nq, 3))
                corr_q = ds_q_aff - _arrow_prod(wis_q, wzd_q)
                corr_q[:, 0] += sigma * mu
            else:
                corr_q = np.zeros((0, 3))
            dx_c, ds_c, dz_c = kkt_solve(corr_l, corr_q)

            alpha = min(1.0, STEP_FRACTION * boundary_step(ds_c, dz_c))
            if alpha < 0.2 * alpha_aff:
                # the second-order correction backfired; fall back to a
                # plain predictor-centering direction
                cent_l = ds_l_aff + sigma * mu
                cent_q = ds_q_aff.copy()
                if nq:
                    cent_q[:, 0] += sigma * mu
                dx_c, ds_c, dz_c = kkt_solve(cent_l, cent_q)
                alpha = min(1.0, STEP_FRACTION * boundary_step(ds_c, dz_c))
            if _TRACE:
                print(f"      sigma={sigma:.2e} alpha_aff={alpha_aff:.3e} alpha={alpha:.3e}")
            while alpha > 1e-13 and not _interior(
                (s + alpha * ds_c)[:p],
                (z + alpha * dz_c)[:p],
                (s + alpha * ds_c)[p:].reshape(nq, 3),
                (z + alpha * dz_c)[p:].reshape(nq, 3),
            ):
                alpha *= 0.5
            if alpha <= 1e-13:
                raise _NumericalError("step length collapsed")

            x = x + alpha * dx_c
            s = s + alpha * ds_c
            z = z + alpha * dz_c
    except _NumericalError as exc:
        status, message = "numerical_failure", str(exc)

    bx, bs, bz, bit = best if best is not None else (x, s, z, iters_done)
    return publish(finish(status, bx, bs, bz, iters_done, message))
