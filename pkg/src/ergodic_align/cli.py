"""Command-line front end: simulations, exact oracles, the composition
optimizer, and reproducible table/figure/regime sweeps as CSV or JSON."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from fractions import Fraction
from typing import Optional

from . import analysis
from .channel import MatrixStream
from .gfq import PrimeField
from .schemes import Composition, SchemeSpec, jap_run, japb_run


class CliError(Exception):
    """Invalid input or a failed guard; printed as a one-line diagnostic."""


def _parse_fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise CliError(f"bad fraction {text!r}; use forms like 1/3 or 0.25")


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("ERGODIC_ALIGN_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise CliError(f"ERGODIC_ALIGN_SEED must be an integer, got {env!r}")
    return 0


def _field(q: int) -> PrimeField:
    try:
        return PrimeField(q)
    except (ValueError, TypeError) as exc:
        raise CliError(str(exc))


def _deadline(args) -> Optional[float]:
    if getattr(args, "budget_seconds", None) is None:
        return None
    return time.monotonic() + args.budget_seconds


def _scheme_spec(args, n: int) -> SchemeSpec:
    kind = args.scheme
    if kind in ("jap", "japb"):
        if not args.a:
            raise CliError(f"--scheme {kind} requires --a")
        a = _composition(args.a, n)
        return SchemeSpec(kind, a=a)
    if kind == "child":
        if args.parent_m is None:
            raise CliError("--scheme child requires --parent-m")
        m = args.parent_m
        if args.parent in ("jap", "japb"):
            a = _composition(args.a, m) if args.a else Composition((m,))
            parent = SchemeSpec(args.parent, a=a)
        else:
            parent = SchemeSpec("ngjv")
        return SchemeSpec("child", parent=parent, m=m)
    return SchemeSpec(kind)


def _composition(text: str, n: int) -> Composition:
    try:
        a = Composition.parse(text)
    except ValueError as exc:
        raise CliError(str(exc))
    if a.n != n:
        raise CliError(f"composition {a} sums to {a.n}, expected n={n}")
    return a


def _emit(rows: list[dict], args) -> None:
    """Write fully accumulated rows; CSV gets a header row, JSON a list."""
    if not rows:
        raise CliError("nothing to write")
    if args.format == "json":
        text = json.dumps(rows, indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
        text = buf.getvalue()
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _frac_cols(name: str, value: Fraction) -> dict:
    return {name: f"{value.numerator}/{value.denominator}",
            f"{name}_float": float(value)}


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    if args.trials < 1:
        raise CliError(f"--trials must be >= 1, got {args.trials}")
    seed = _resolve_seed(args)
    rows = []
    for q in args.q:
        _field(q)
        spec = _scheme_spec(args, args.n)
        try:
            stats = analysis.monte_carlo(
                spec, args.n, q, args.trials, seed, threads=args.threads
            )
        except ValueError as exc:
            raise CliError(str(exc))
        row = {"scheme": stats.scheme, "n": args.n, "q": q,
               "trials": args.trials, "seed": seed,
               "mean_delay": stats.mean_delay, "std_error": stats.std_error}
        row.update(_frac_cols("dof", spec.dof(args.n)))
        row["per_round_means"] = (
            ";".join(f"{v:.6g}" for v in stats.per_round_means)
            if stats.per_round_means else ""
        )
        row["resample_rate"] = stats.resample_rate
        rows.append(row)
    _emit(rows, args)
    return 0


def cmd_exact(args) -> int:
    seed = _resolve_seed(args)
    if args.oracle == "lemma3":
        value = analysis.lemma3_failure(args.q[0], args.L)
        row = {"oracle": "lemma3", "q": args.q[0], "L": args.L}
        row.update(_frac_cols("value", value))
        _emit([row], args)
        return 0
    if args.oracle == "span":
        q = args.q[0]
        field = _field(q)
        import numpy as np

        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        basis = rng.integers(1, q, size=(args.k, args.len), dtype=np.int64)
        try:
            value = analysis.span_fullness(list(basis), field)
        except analysis.EnumerationTooLarge as exc:
            raise CliError(str(exc))
        row = {"oracle": "span", "q": q, "k": args.k, "len": args.len, "seed": seed}
        row.update(_frac_cols("value", value))
        _emit([row], args)
        return 0
    if args.oracle == "round":
        q = args.q[0]
        field = _field(q)
        a = _composition(args.a, args.n)
        if not 1 <= args.k <= a.K:
            raise CliError(f"--k must be in 1..{a.K}, got {args.k}")
        stream = MatrixStream(args.n, field, seed, stream=0)
        run_fn = japb_run if args.beamform else jap_run
        run = run_fn(a, stream.next_matrix(), stream)
        history = [run.slot_matrices[t] for t in run.slots[:args.k]]
        try:
            value = analysis.exact_round_probability(
                a, args.k, history, field,
                beamform=args.beamform, method=args.method,
            )
        except analysis.EnumerationTooLarge as exc:
            raise CliError(str(exc))
        row = {"oracle": "round", "n": args.n, "q": q, "a": str(a),
               "k": args.k, "beamform": args.beamform,
               "method": args.method, "seed": seed}
        row.update(_frac_cols("value", value))
        _emit([row], args)
        return 0
    raise CliError(f"unknown oracle {args.oracle!r}")


def cmd_optimize(args) -> int:
    if args.K is None:
        raise CliError("--K is required")
    try:
        opt = analysis.optimize(args.n, args.K, deadline=_deadline(args))
    except ValueError as exc:
        raise CliError(str(exc))
    except analysis.BudgetExceeded as exc:
        raise CliError(str(exc))
    row = {"n": opt.n, "K": opt.K, "T": opt.T,
           "argmin": str(opt.argmins[0]),
           "argmin_count": opt.argmin_count,
           "unique": opt.unique,
           "all_argmins": ";".join(str(c) for c in opt.argmins)}
    _emit([row], args)
    return 0


def cmd_table(args) -> int:
    deadline = _deadline(args)
    rows = []
    try:
        for n in range(3, 9):
            for K in range(1, n):
                opt = analysis.optimize(n, K, deadline=deadline)
                rows.append({
                    "n": n, "K": K, "T": opt.T,
                    "argmin": str(opt.argmins[0]),
                    "unique": opt.unique,
                    "note": "tdma-equivalent" if opt.T == 0 else "",
                })
    except analysis.BudgetExceeded as exc:
        raise CliError(str(exc))
    _emit(rows, args)
    return 0


def cmd_figure(args) -> int:
    deadline = _deadline(args)
    ns = args.n_list or list(range(3, 8))
    rows = []

    def point(n, scheme, label, dof, exponent):
        row = {"n": n, "scheme": scheme, "label": label}
        row.update(_frac_cols("dof", Fraction(dof)))
        row["exponent"] = exponent
        rows.append(row)

    try:
        for n in ns:
            if n < 3:
                raise CliError(f"figure needs n >= 3, got {n}")
            point(n, "ngjv", "ngjv", Fraction(1, 2), n * n)
            point(n, "tdma", "tdma", Fraction(1, n), 0)
            for K in range(1, n - 1):
                opt = analysis.optimize(n, K, deadline=deadline)
                point(n, "japb", f"japb{opt.argmins[0]}",
                      Fraction(1, K + 1), opt.T)
            for m in range(2, n):
                point(n, "child", f"child(m={m},ngjv)",
                      Fraction(m, 2 * n), m * m)
                for K in range(1, m):
                    opt = analysis.optimize(m, K, deadline=deadline)
                    point(n, "child", f"child(m={m},japb{opt.argmins[0]})",
                          Fraction(m, n * (K + 1)), opt.T)
    except analysis.BudgetExceeded as exc:
        raise CliError(str(exc))
    _emit(rows, args)
    return 0


def cmd_regimes(args) -> int:
    deadline = _deadline(args)
    ns = args.n_list or [12, 18, 24, 30]
    alphas = [_parse_fraction(t) for t in (args.alpha or ["1/2", "1/3", "1/4"])]
    betas = [_parse_fraction(t) for t in (args.beta or ["3/2", "2", "3"])]
    rows = []
    try:
        for alpha in alphas:
            params = analysis.RegimeParams("I", alpha=alpha)
            K = int(1 / alpha) - 1
            for n in ns:
                if not 1 <= K <= n - 2:
                    continue
                predicted = analysis.regime_parent(params, n)
                exact = analysis.optimize(n, K, deadline=deadline).T
                row = {"regime": "I", "param": str(alpha), "n": n, "K": K}
                row.update(_frac_cols("parent_predicted", predicted))
                row["parent_exact"] = exact
                row["ratio"] = exact / float(predicted) if predicted else ""
                row["child_exact"] = analysis.regime_child(params, n)
                row["bracket_lo"] = ""
                row["bracket_hi"] = ""
                rows.append(row)
        for beta in betas:
            params = analysis.RegimeParams("II", beta=beta)
            for n in ns:
                K = round(n / beta) - 1
                if not 1 <= K <= n - 2:
                    continue
                lo, hi = analysis.regime_parent(params, n)
                exact = analysis.optimize(n, K, deadline=deadline).T
                row = {"regime": "II", "param": str(beta), "n": n, "K": K,
                       "parent_predicted": "", "parent_predicted_float": "",
                       "parent_exact": exact, "ratio": "",
                       "child_exact": analysis.regime_child(params, n),
                       "bracket_lo": float(lo), "bracket_hi": float(hi)}
                rows.append(row)
    except (ValueError, analysis.BudgetExceeded) as exc:
        raise CliError(str(exc))
    _emit(rows, args)
    return 0


def cmd_fit(args) -> int:
    if len(args.q) < 3:
        raise CliError(f"fit needs at least 3 --q values, got {len(args.q)}")
    seed = _resolve_seed(args)
    sweep = []
    rows = []
    for q in args.q:
        _field(q)
        spec = _scheme_spec(args, args.n)
        stats = analysis.monte_carlo(
            spec, args.n, q, args.trials, seed, threads=args.threads
        )
        sweep.append((q, stats.mean_delay))
    try:
        fit = analysis.fit_exponent(sweep)
    except ValueError as exc:
        raise CliError(str(exc))
    rows.append({
        "scheme": spec.label(), "n": args.n,
        "q_values": ";".join(str(q) for q in fit.q_values),
        "mean_delays": ";".join(f"{d:.6g}" for d in fit.mean_delays),
        "slope_logq": fit.slope, "slope_logqm1": fit.slope_qm1,
        "intercept": fit.intercept, "trials": args.trials, "seed": seed,
    })
    _emit(rows, args)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_common(p, scheme=False):
    p.add_argument("--n", type=int, default=3, help="number of users")
    p.add_argument("--q", type=int, action="append", default=None,
                   help="field size (repeatable)")
    if scheme:
        p.add_argument("--scheme", choices=["ngjv", "tdma", "jap", "japb", "child"],
                       default="ngjv")
        p.add_argument("--a", help="composition, e.g. 1,2,3")
        p.add_argument("--parent-m", type=int, dest="parent_m",
                       help="parent network size for child schemes")
        p.add_argument("--parent", choices=["ngjv", "jap", "japb"], default="japb",
                       help="parent scheme kind for child schemes")
        p.add_argument("--trials", type=int, default=1000)
        p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=None,
                   help="RNG seed (default: ERGODIC_ALIGN_SEED or 0)")
    p.add_argument("--budget-seconds", type=float, dest="budget_seconds", default=None)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", help="output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ergodic-align",
        description="Simulate and analyze alignment schemes over finite-field "
                    "interference channels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo delay estimation")
    _add_common(p, scheme=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("exact", help="exact enumeration oracles")
    p.add_argument("oracle", choices=["lemma3", "round", "span"])
    p.add_argument("--L", type=int, default=2, help="number of summed values")
    p.add_argument("--k", type=int, default=1, help="round index / span dimension")
    p.add_argument("--len", type=int, default=3, help="span vector length")
    p.add_argument("--a", help="composition, e.g. 1,2")
    p.add_argument("--beamform", action="store_true")
    p.add_argument("--method", choices=["rows", "matrices"], default="rows")
    _add_common(p)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("optimize", help="best composition for given n, K")
    p.add_argument("--K", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("table", help="best schemes for n = 3..8, all K")
    _add_common(p)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("figure", help="exponent vs DOF point cloud")
    p.add_argument("--n", type=int, action="append", dest="n_list", default=None)
    p.add_argument("--q", type=int, action="append", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--budget-seconds", type=float, dest="budget_seconds", default=None)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("regimes", help="asymptotic predictions vs exact optimizer")
    p.add_argument("--alpha", action="append", default=None,
                   help="regime I parameter (repeatable fraction)")
    p.add_argument("--beta", action="append", default=None,
                   help="regime II parameter (repeatable fraction)")
    p.add_argument("--n", type=int, action="append", dest="n_list", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--budget-seconds", type=float, dest="budget_seconds", default=None)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_regimes)

    p = sub.add_parser("fit", help="simulate over several q and fit the exponent")
    _add_common(p, scheme=True)
    p.set_defaults(func=cmd_fit)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "q", None) is not None and not args.q:
        args.q = None
    if hasattr(args, "q") and args.q is None:
        args.q = [3]
    for q in getattr(args, "q", []) or []:
        if q < 2:
            print(f"error: field size must be >= 2, got {q}", file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
