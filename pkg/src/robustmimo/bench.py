"""Monte Carlo bench harness.

Sweeps square channel sizes, transmit powers and uncertainty levels over
seeded random channels, runs the configured design methods, and writes one
CSV row per (trial, cell, method) plus a per-cell mean summary. Rows are
deterministic for a fixed config: channel seeds derive from (seed, L,
trial), so every method in a cell sees the same channel draw.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import conic, design, worstcase
from .worstcase import DesignProblem

BENCH_METHODS = (
    "robust_optimal",
    "alternating_I",
    "alternating_II",
    "alternating_III",
    "nonrobust",
)
CSV_COLUMNS = (
    "trial", "seed", "L", "P_dBW", "rho", "method", "status",
    "worst_case_mse", "nominal_mse", "wall_time_s", "iterations",
)
SUMMARY_COLUMNS = (
    "L", "P_dBW", "rho", "method", "trials",
    "mean_worst_case_mse", "mean_nominal_mse", "mean_wall_time_s", "mean_iterations",
)
_ALT_SCHEMES = {"alternating_I": "I", "alternating_II": "II", "alternating_III": "III"}


@dataclass(frozen=True)
class BenchConfig:
    """Sweep description: M = N = L for each L in dims, P = 10^(dBW/10)."""

    dims: tuple
    power_dbw: tuple
    rho: tuple
    trials: int = 100
    seed: int = 0
    methods: tuple = BENCH_METHODS
    noise_var: float = 1.0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        power = tuple(float(p) for p in self.power_dbw)
        rho = tuple(float(r) for r in self.rho)
        methods = tuple(str(m) for m in self.methods)
        if not dims or any(d < 1 for d in dims):
            raise ValueError("dims must be a nonempty list of positive sizes")
        if not power or not all(np.isfinite(power)):
            raise ValueError("power_dBW must be a nonempty list of finite values")
        if not rho or any(not (0.0 <= r < 1.0) for r in rho):
            raise ValueError("rho values must lie in [0, 1)")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not methods or any(m not in BENCH_METHODS for m in methods):
            raise ValueError(f"methods must be a nonempty subset of {BENCH_METHODS}")
        if not (np.isfinite(self.noise_var) and self.noise_var > 0.0):
            raise ValueError("noise_var must be positive")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "power_dbw", power)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "trials", int(self.trials))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "noise_var", float(self.noise_var))


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    dim: int
    power_dbw: float
    rho: float
    method: str
    status: str
    worst_case_mse: float
    nominal_mse: float
    wall_time_s: float
    iterations: int

    def csv_row(self) -> str:
        return ",".join([
            str(self.trial), str(self.seed), str(self.dim),
            repr(self.power_dbw), repr(self.rho), self.method, self.status,
            repr(self.worst_case_mse), repr(self.nominal_mse),
            repr(self.wall_time_s), str(self.iterations),
        ])


def parse_config(path: str) -> BenchConfig:
    """Read a flat key=value config; list values are comma-separated.

    Keys: dims, power_dBW, rho, trials, seed, methods, noise_var. Lines
    starting with # and blank lines are skipped.
    """
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()

    def split(val):
        return [tok.strip() for tok in val.split(",") if tok.strip()]

    known = {"dims", "power_dBW", "rho", "trials", "seed", "methods", "noise_var"}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for req in ("dims", "power_dBW", "rho"):
        if req not in values:
            raise ValueError(f"config is missing required key {req!r}")
    kwargs = {
        "dims": tuple(int(t) for t in split(values["dims"])),
        "power_dbw": tuple(float(t) for t in split(values["power_dBW"])),
        "rho": tuple(float(t) for t in split(values["rho"])),
    }
    if "trials" in values:
        kwargs["trials"] = int(values["trials"])
    if "seed" in values:
        kwargs["seed"] = int(values["seed"])
    if "noise_var" in values:
        kwargs["noise_var"] = float(values["noise_var"])
    if "methods" in values:
        toks = split(values["methods"])
        kwargs["methods"] = BENCH_METHODS if toks == ["all"] else tuple(toks)
    return BenchConfig(**kwargs)


def generate_channel(m: int, n: int, seed: int) -> np.ndarray:
    """i.i.d. CN(0, 1) channel draw, deterministic for a fixed seed."""
    if m < 1 or n < 1:
        raise ValueError("channel dimensions must be positive")
    rng = np.random.default_rng(seed)
    return (rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))) / np.sqrt(2.0)


def _derive_seed(base: int, *parts: int) -> int:
    ss = np.random.SeedSequence((base,) + parts)
    return int(ss.generate_state(1, np.uint64)[0])


def _run_method(problem: DesignProblem, method: str, alt_seed: int):
    t0 = time.perf_counter()
    try:
        with conic.solution_log() as log:
            if method == "robust_optimal":
                xcvr, _ = design.robust_design(problem)
            elif method == "nonrobust":
                xcvr = design.nonrobust_design(problem)
            else:
                xcvr, _ = design.alternating_design(problem, _ALT_SCHEMES[method], seed=alt_seed)
        wall = time.perf_counter() - t0
        iters = int(sum(sol.iterations for sol in log))
        zero = np.zeros_like(problem.h_tilde)
        nominal = worstcase.mse(xcvr.F, xcvr.G, zero, problem)
        return "ok", xcvr.worst_case_mse, nominal, wall, iters
    except Exception as exc:  # per-trial failures become rows, not crashes
        wall = time.perf_counter() - t0
        return f"failed:{type(exc).__name__}", float("nan"), float("nan"), wall, 0


def run_experiment(config: BenchConfig, rows_path: str | None = None,
                   summary_path: str | None = None) -> list[TrialRecord]:
    """Run the sweep and return all rows, optionally streaming them to CSV."""
    records: list[TrialRecord] = []
    rows_file = open(rows_path, "w", encoding="utf-8") if rows_path else None
    try:
        if rows_file:
            rows_file.write(",".join(CSV_COLUMNS) + "\n")
        for trial in range(config.trials):
            for dim in config.dims:
                chan_seed = _derive_seed(config.seed, dim, trial)
                alt_seed = _derive_seed(config.seed, dim, trial, 1)
                h = generate_channel(dim, dim, chan_seed)
                hnorm2 = float(np.sum(np.abs(h) ** 2))
                for p_dbw in config.power_dbw:
                    power = 10.0 ** (p_dbw / 10.0)
                    for rho in config.rho:
                        eps = float(np.sqrt(rho * hnorm2))
                        problem = DesignProblem(
                            h_tilde=h, epsilon=eps, noise_var=config.noise_var,
                            power=power, streams=dim,
                        )
                        for method in config.methods:
                            status, wc, nominal, wall, iters = _run_method(problem, method, alt_seed)
                            rec = TrialRecord(
                                trial=trial, seed=chan_seed, dim=dim,
                                power_dbw=p_dbw, rho=rho, method=method,
                                status=status, worst_case_mse=wc,
                                nominal_mse=nominal, wall_time_s=wall,
                                iterations=iters,
                            )
                            records.append(rec)
                            if rows_file:
                                rows_file.write(rec.csv_row() + "\n")
    finally:
        if rows_file:
            rows_file.close()
    if summary_path:
        write_summary(records, summary_path)
    return records


def summarize(records) -> list[tuple]:
    """Per-cell means over successful rows, in first-appearance cell order."""
    order = []
    groups = {}
    for rec in records:
        key = (rec.dim, rec.power_dbw, rec.rho, rec.method)
        if key not in groups:
            groups[key] = []
            order.append(key)
        if rec.status == "ok":
            groups[key].append(rec)
    out = []
    for key in order:
        rows = groups[key]
        n = len(rows)
        if n:
            means = tuple(
                float(np.mean([getattr(r, name) for r in rows]))
                for name in ("worst_case_mse", "nominal_mse", "wall_time_s", "iterations")
            )
        else:
            means = (float("nan"),) * 4
        out.append(key + (n,) + means)
    return out


def write_summary(records, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for dim, p_dbw, rho, method, n, wc, nominal, wall, iters in summarize(records):
            fh.write(",".join([
                str(dim), repr(p_dbw), repr(rho), method, str(n),
                repr(wc), repr(nominal), repr(wall), repr(iters),
            ]) + "\n")
