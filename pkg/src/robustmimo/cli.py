"""Command-line front end.

Subcommands: `design` builds a transceiver for one channel instance,
`worstcase` evaluates the exact worst-case perturbation for a given
transceiver, and `bench` runs a Monte Carlo sweep from a config file.
Exit codes: 0 on success, 1 on usage errors, 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import bench, design, worstcase
from .worstcase import DesignProblem


class _Parser(argparse.ArgumentParser):
    # argparse defaults to exit code 2 on bad arguments; the interface
    # reserves 2 for runtime failures and 1 for usage errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def read_matrix(path: str) -> np.ndarray:
    """Read a complex matrix file: an "M N" header, then M rows of N entries.

    Entries are python complex literals without spaces, e.g. 1.5 or 0.2-1j.
    """
    lines = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if line and not line.startswith("#"):
                lines.append(line)
    if not lines:
        raise ValueError(f"{path}: empty matrix file")
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError(f"{path}: header must be two integers 'M N'")
    m, n = int(head[0]), int(head[1])
    if len(lines) != 1 + m:
        raise ValueError(f"{path}: expected {m} matrix rows, found {len(lines) - 1}")
    rows = []
    for line in lines[1:]:
        toks = line.split()
        if len(toks) != n:
            raise ValueError(f"{path}: expected {n} entries per row, found {len(toks)}")
        rows.append([complex(tok) for tok in toks])
    return np.array(rows, dtype=np.complex128)


def format_matrix(mat: np.ndarray) -> str:
    """Render a matrix in the file format read_matrix accepts."""
    mat = np.atleast_2d(np.asarray(mat, dtype=np.complex128))
    m, n = mat.shape
    lines = [f"{m} {n}"]
    for i in range(m):
        lines.append(" ".join(_fmt_complex(mat[i, j]) for j in range(n)))
    return "\n".join(lines)


def _fmt_complex(z: complex) -> str:
    return f"({z.real:.12g}{z.imag:+.12g}j)"


def _build_parser() -> _Parser:
    parser = _Parser(prog="robustmimo", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_design = sub.add_parser("design", help="design a transceiver for one channel instance")
    src = p_design.add_mutually_exclusive_group(required=True)
    src.add_argument("--channel", help="channel matrix file")
    src.add_argument("--seed", type=int, help="draw a random L x L channel from this seed")
    p_design.add_argument("--L", type=int, dest="dim", help="channel size when drawing from a seed (M = N = L)")
    rad = p_design.add_mutually_exclusive_group()
    rad.add_argument("--rho", type=float, help="uncertainty as a fraction of the squared channel norm")
    rad.add_argument("--epsilon", type=float, help="uncertainty radius (Frobenius norm bound)")
    p_design.add_argument("--power-dbw", type=float, default=20.0, help="transmit power in dBW (default 20)")
    p_design.add_argument("--noise-var", type=float, default=1.0, help="noise variance (default 1)")
    p_design.add_argument("--streams", type=int, help="number of streams (default: full rank budget)")
    p_design.add_argument("--method", default="robust_optimal",
                          choices=("robust_optimal", "nonrobust",
                                   "alternating_I", "alternating_II", "alternating_III"))
    p_design.add_argument("--alt-seed", type=int, default=0, help="start seed for alternating scheme III")

    p_wc = sub.add_parser("worstcase", help="evaluate the exact worst-case perturbation for F, G")
    p_wc.add_argument("--f", required=True, help="precoder matrix file (N x L)")
    p_wc.add_argument("--g", required=True, help="equalizer matrix file (L x M)")
    p_wc.add_argument("--channel", required=True, help="nominal channel matrix file (M x N)")
    p_wc.add_argument("--epsilon", type=float, required=True, help="uncertainty radius")
    p_wc.add_argument("--noise-var", type=float, default=1.0, help="noise variance (default 1)")

    p_bench = sub.add_parser("bench", help="run a Monte Carlo sweep from a config file")
    p_bench.add_argument("--config", required=True, help="key = value config file")
    p_bench.add_argument("--out", default="bench_results.csv", help="per-trial CSV path")
    p_bench.add_argument("--summary", help="summary CSV path (default: <out>_summary.csv)")
    return parser


def _cmd_design(args) -> int:
    if args.channel is not None:
        h = read_matrix(args.channel)
    else:
        if args.dim is None:
            raise ValueError("--seed requires --L to size the channel")
        h = bench.generate_channel(args.dim, args.dim, args.seed)
    if args.epsilon is not None:
        eps = args.epsilon
    elif args.rho is not None:
        eps = float(np.sqrt(args.rho) * np.linalg.norm(h, "fro"))
    else:
        eps = 0.0
    streams = args.streams if args.streams is not None else min(h.shape)
    power = 10.0 ** (args.power_dbw / 10.0)
    problem = DesignProblem(h_tilde=h, epsilon=eps, noise_var=args.noise_var,
                            power=power, streams=streams)
    cert = None
    if args.method == "robust_optimal":
        xcvr, cert = design.robust_design(problem)
    elif args.method == "nonrobust":
        xcvr = design.nonrobust_design(problem)
    else:
        xcvr, _ = design.alternating_design(problem, args.method.rsplit("_", 1)[1], seed=args.alt_seed)
    print(f"method = {xcvr.method_tag}")
    print(f"worst-case MSE = {xcvr.worst_case_mse:.12g}")
    print("F =")
    print(format_matrix(xcvr.F))
    print("G =")
    print(format_matrix(xcvr.G))
    if cert is not None:
        print(f"omega = {cert.omega:.12g}")
        print(f"kkt residual = {cert.kkt_residual:.3g}")
        print(f"hard case = {cert.hard_case}")
        print("E* =")
        print(format_matrix(cert.e_star))
    return 0


def _cmd_worstcase(args) -> int:
    f = read_matrix(args.f)
    g = read_matrix(args.g)
    h = read_matrix(args.channel)
    streams = min(min(h.shape), f.shape[1])
    problem = DesignProblem(h_tilde=h, epsilon=args.epsilon, noise_var=args.noise_var,
                            power=max(1.0, float(np.sum(np.abs(f) ** 2))), streams=streams)
    cert = worstcase.worst_case_error_general(f, g, problem)
    print(f"worst-case MSE = {cert.mse_value:.6f}")
    print(f"omega = {cert.omega:.12g}")
    print(f"hard case = {cert.hard_case}")
    print("E* =")
    print(format_matrix(cert.e_star))
    return 0


def _cmd_bench(args) -> int:
    config = bench.parse_config(args.config)
    summary = args.summary
    if summary is None:
        stem, ext = os.path.splitext(args.out)
        summary = f"{stem}_summary{ext or '.csv'}"
    records = bench.run_experiment(config, rows_path=args.out, summary_path=summary)
    failures = sum(1 for r in records if r.status != "ok")
    print(f"wrote {len(records)} rows to {args.out} and summary to {summary}")
    if failures:
        print(f"{failures} trial rows failed; see the status column", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "design":
            return _cmd_design(args)
        if args.command == "worstcase":
            return _cmd_worstcase(args)
        return _cmd_bench(args)
    except Exception as exc:  # runtime failures exit 2 with a diagnostic
        print(f"robustmimo {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
