"""Command-line interface.

Exit codes: 0 when the check is positive (observer exists, file written,
verdicts agree), 2 when it ran and is negative, 1 on any error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .datamat import build_data_matrices, disturbance_rank_evidence, read_trajectory, write_trajectory
from .ddcheck import existence_data_driven
from .ddsynth import synthesize
from .errors import UIOError
from .io import load_scenario, load_system, load_uio, save_system, save_uio
from .numkit import DEFAULT_TOL, Tolerance, spectrum
from .oracle import (
    check_uio_conditions,
    design_model_based,
    example_system,
    existence_model_based,
    random_experiment,
    random_system,
)
from .sim import acceptor_z0, error_experiment, parse_disturbance, write_error_csv

EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE = 0, 1, 2


def fmt(value) -> str:
    """12 significant digits; complex values as ``a+bj``."""
    if isinstance(value, (complex, np.complexfloating)):
        value = complex(value)
        if value.imag == 0:
            return f"{value.real:.12g}"
        return f"{value.real:.12g}{value.imag:+.12g}j"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(fmt(v) for v in value) + "]"
    return str(value)


def fmt_matrix(M, indent: str = "  ") -> str:
    M = np.asarray(M)
    if M.size == 0:
        return f"{indent}(empty {M.shape[0]}x{M.shape[1]})"
    return "\n".join(indent + "  ".join(f"{fmt(v):>16}" for v in row) for row in M)


def parse_poles(text: str | None):
    if text is None:
        return None
    try:
        return [complex(tok.strip().replace(" ", "")) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse poles {text!r}") from None


def parse_vector(text: str | None):
    if text is None:
        return None
    return np.array([float(tok) for tok in text.split(",") if tok.strip()])


def _tol(args) -> Tolerance:
    return Tolerance(args.rank_tol, args.residual_tol, args.stability_margin)


def _print_tol(tol: Tolerance) -> None:
    print(
        f"tolerances: rank_tol={fmt(tol.rank_tol)} residual_tol={fmt(tol.residual_tol)} "
        f"stability_margin={fmt(tol.stability_margin)}"
    )


def _print_table(rows) -> None:
    width = max(len(k) for k, _ in rows)
    for key, value in rows:
        print(f"  {key:<{width}}  {fmt(value)}")


def _print_report(report) -> None:
    print(f"verdict: {'UIO exists' if report.exists else 'no UIO exists'} (source: {report.source})")
    print(f"  rank condition:   {'holds' if report.rank_CE_ok else 'violated'}")
    print(f"  pencil condition: {'holds' if report.rosenbrock_ok else 'violated'}")
    if report.unstable_zeros:
        print(f"  rank drops with |z| >= 1: {fmt(report.unstable_zeros)}")
    for name in report.violated:
        print(f"  violated: {name}")
    if report.marginal:
        print("  warning: a rank decision is within two decades of the cutoff")
    print("evidence:")
    _print_table([(k, v) for k, v in report.evidence.items() if k != "tolerance"])


def cmd_check(args) -> int:
    tol = _tol(args)
    dm = build_data_matrices(read_trajectory(args.data), args.r)
    report = existence_data_driven(dm, args.r, tol)
    _print_tol(tol)
    print(f"data: n={dm.n} m={dm.m} p={dm.p} r={dm.r} T={dm.T}")
    _print_report(report)
    print("disturbance rank evidence:")
    _print_table(list(disturbance_rank_evidence(dm, tol).items()))
    return EXIT_OK if report.exists else EXIT_NEGATIVE


def _print_uio(U) -> None:
    for name, M in (("A_UIO", U.A), ("B_u", U.B_u), ("B_y", U.B_y), ("D", U.D)):
        print(f"{name}:")
        print(fmt_matrix(M))


def cmd_synth(args) -> int:
    tol = _tol(args)
    dm = build_data_matrices(read_trajectory(args.data), args.r)
    result = synthesize(dm, args.r, args.poles, tol, args.budget, args.seed, args.baseline)
    _print_tol(tol)
    _print_report(result.report)
    if result.uio is None:
        return EXIT_NEGATIVE
    spec = spectrum(result.uio.A, tol)
    print(f"observer spectrum: {fmt(list(spec.eigenvalues))} (spectral radius {fmt(spec.spectral_radius)})")
    _print_uio(result.uio)
    if args.output:
        save_uio(result.uio, args.output)
        print(f"wrote {args.output}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    tol = _tol(args)
    S = load_system(args.system)
    report = existence_model_based(S, tol)
    _print_tol(tol)
    print(f"system: n={S.n} m={S.m} p={S.p} r={S.r}")
    _print_report(report)
    if not report.exists:
        return EXIT_NEGATIVE
    if args.design or args.output:
        U = design_model_based(S, args.poles, tol, budget=args.budget, seed=args.seed)
        _print_uio(U)
        check = check_uio_conditions(S, U, tol)
        _print_table(list(check._asdict().items()))
        if args.output:
            save_uio(U, args.output)
            print(f"wrote {args.output}")
    return EXIT_OK


def _trial_dims(rng, args):
    n = args.n if args.n is not None else int(rng.integers(2, 6))
    r = args.r if args.r is not None else int(rng.integers(1, min(n, 3) + 1))
    p = args.p if args.p is not None else int(rng.integers(r, n + 2))
    m = args.m if args.m is not None else int(rng.integers(0, 3))
    return n, m, p, r


def cmd_compare(args) -> int:
    tol = _tol(args)
    if args.trials < 0:
        raise ValueError("--trials must be >= 0")
    rng = np.random.default_rng(args.seed)
    seeds = rng.integers(0, 2**31, size=(args.trials, 2))
    _print_tol(tol)
    print(f"{'trial':>5}  {'n':>2} {'m':>2} {'p':>2} {'r':>2}  {'construction':<12} {'T':>4}  {'model':<5}  {'data':<5}  agree")
    agree = 0
    for k in range(args.trials):
        n, m, p, r = _trial_dims(rng, args)
        want = k % 2 == 0
        S = random_system(n, m, p, r, want, seed=int(seeds[k, 0]), tol=tol)
        T = max(2 * (n + m + r), 1) * args.length_factor + 1
        dm = build_data_matrices(random_experiment(S, T, seed=int(seeds[k, 1])), r)
        model = existence_model_based(S, tol).exists
        data = existence_data_driven(dm, r, tol).exists
        agree += model == data
        print(
            f"{k:>5}  {n:>2} {m:>2} {p:>2} {r:>2}  {S.meta.get('construction', ''):<12} {T:>4}  "
            f"{str(model):<5}  {str(data):<5}  {'yes' if model == data else 'NO'}"
        )
    print(f"agreement: {agree}/{args.trials}")
    return EXIT_OK if agree == args.trials else EXIT_NEGATIVE


def cmd_simulate(args) -> int:
    tol = _tol(args)
    if args.scenario:
        sc = load_scenario(args.scenario)
        system, uio, horizon, seed, dist = sc.system, sc.uio, sc.horizon, sc.seed, sc.disturbance
        x0 = None if sc.x0 is None else np.array(sc.x0)
        z0_text = None if sc.z0 is None else ",".join(str(v) for v in sc.z0)
    else:
        if not (args.system and args.uio):
            raise ValueError("simulate needs SYSTEM and UIO paths or --scenario")
        system, uio, horizon, seed, dist = args.system, args.uio, args.horizon, args.seed, args.disturbance
        x0 = parse_vector(args.x0)
        z0_text = args.z0
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    S, U = load_system(system), load_uio(uio)
    T = horizon + 1
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal(S.n) if x0 is None else x0
    u = rng.uniform(-1.0, 1.0, size=(T - 1, S.m)) if S.m else None
    d = parse_disturbance(dist, S.r, T - 1, seed=int(rng.integers(2**31)))
    if z0_text == "acceptor":
        z0 = acceptor_z0(U, x0, S.C @ x0)
    else:
        z0 = parse_vector(z0_text)
    run = error_experiment(S, U, x0, z0, d, u, T, tol)
    comment = f"horizon={horizon} seed={seed} disturbance={dist}" if args.comment else None
    write_error_csv(run.e, args.output or sys.stdout, comment)
    if args.output:
        print(f"wrote {args.output}")
    return EXIT_OK


def cmd_example(args) -> int:
    S = example_system()
    save_system(S, args.system)
    print(f"wrote {args.system}")
    if args.data:
        traj = random_experiment(S, args.horizon, seed=args.seed, d_range=(args.low, args.high))
        write_trajectory(traj, args.data, include_d=args.with_d)
        print(f"wrote {args.data}")
    return EXIT_OK


def cmd_generate(args) -> int:
    tol = _tol(args)
    want = args.violation == "none"
    S = random_system(
        args.n, args.m, args.p, args.r, want, seed=args.seed,
        violation=None if want or args.violation == "any" else args.violation, tol=tol,
    )
    save_system(S, args.system)
    print(f"wrote {args.system} ({S.meta.get('construction')})")
    if args.data:
        T = args.horizon or 3 * (S.n + S.m + S.r) + 1
        traj = random_experiment(S, T, seed=args.seed + 1)
        write_trajectory(traj, args.data, include_d=args.with_d)
        print(f"wrote {args.data}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    tol = argparse.ArgumentParser(add_help=False)
    tol.add_argument("--rank-tol", type=float, default=DEFAULT_TOL.rank_tol, help="relative singular-value cutoff")
    tol.add_argument("--residual-tol", type=float, default=DEFAULT_TOL.residual_tol, help="residual cutoff")
    tol.add_argument(
        "--stability-margin", type=float, default=DEFAULT_TOL.stability_margin, help="margin inside the unit circle"
    )

    parser = argparse.ArgumentParser(prog="dduio", description="Data-driven unknown-input observers.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[tol], help="decide from data whether an observer exists")
    p.add_argument("data", help="trajectory CSV")
    p.add_argument("--r", type=int, required=True, help="unknown-input dimension")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("synth", parents=[tol], help="synthesize an observer from data")
    p.add_argument("data", help="trajectory CSV")
    p.add_argument("--r", type=int, required=True, help="unknown-input dimension")
    p.add_argument("--poles", type=parse_poles, default=None, help="comma-separated poles (default: all zero)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=64, help="random draws for the detectability search")
    p.add_argument("--baseline", action="store_true", help="skip pole placement (T2 = 0)")
    p.add_argument("-o", "--output", help="observer JSON to write")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("oracle", parents=[tol], help="model-based existence test and design")
    p.add_argument("system", help="system JSON")
    p.add_argument("--design", action="store_true", help="also design an observer")
    p.add_argument("--poles", type=parse_poles, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=64)
    p.add_argument("-o", "--output", help="observer JSON to write (implies --design)")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("compare", parents=[tol], help="data-driven vs model-based verdicts on random systems")
    p.add_argument("--trials", type=int, default=100)
    for dim in ("n", "m", "p", "r"):
        p.add_argument(f"--{dim}", type=int, default=None, help=f"fix {dim} (random per trial when omitted)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--length-factor", type=int, default=2, help="T = factor * 2(n+m+r) + 1")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", parents=[tol], help="estimation-error trajectory as CSV")
    p.add_argument("system", nargs="?", help="system JSON")
    p.add_argument("uio", nargs="?", help="observer JSON")
    p.add_argument("--scenario", help="JSON scenario file (overrides the other flags)")
    p.add_argument("--horizon", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--disturbance", default="uniform(-10,10)", help="zero, uniform(a,b) or file:PATH")
    p.add_argument("--x0", help="comma-separated initial state (random when omitted)")
    p.add_argument("--z0", help="comma-separated observer state, or 'acceptor' (default: zero)")
    p.add_argument("--comment", action="store_true", help="prefix the CSV with a settings line")
    p.add_argument("-o", "--output", help="error CSV to write (stdout when omitted)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("example", help="write the three-state example system and optional data")
    p.add_argument("--system", default="example_system.json")
    p.add_argument("--data", help="trajectory CSV to write")
    p.add_argument("--horizon", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--low", type=float, default=-2.0)
    p.add_argument("--high", type=float, default=2.0)
    p.add_argument("--with-d", action="store_true", help="include the disturbance columns")
    p.set_defaults(func=cmd_example)

    p = sub.add_parser("generate", parents=[tol], help="random test system and optional data")
    for dim in ("n", "m", "p", "r"):
        p.add_argument(f"--{dim}", type=int, required=True)
    p.add_argument("--violation", choices=["none", "any", "rank", "zero"], default="none")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--system", required=True, help="system JSON to write")
    p.add_argument("--data", help="trajectory CSV to write")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--with-d", action="store_true")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UIOError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
