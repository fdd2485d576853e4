"""Command-line entry point: ``obliv-kand <command> ...``.

Exit codes: 0 success, 2 user error, 3 solver failure, 4 check failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import certificates as certs
from . import factor_lp, streaming
from .instance import InstanceError, as_fraction, brute_force_optimum, format_instance, parse_instance
from .lp import DEFAULT_TOL, SolverError
from .oblivious import as_partition, as_rounding, oblivious_value, piecewise_linear_params, sat_prob

EXIT_USER = 2
EXIT_SOLVER = 3
EXIT_CHECK = 4

# (k, perturbed ratio, piecewise params, piecewise ratio) reported in the literature
TABLE_GOLDEN = {
    2: (0.4457, (200, 0.5, 1.0), 0.4844),
    3: (0.2226, (30, 0.7, 1.0), 0.2417),
    4: (0.1157, (11, 0.8, 0.8), 0.1188),
    5: (0.0578, (7, 0.95, 0.8), 0.0589),
}


class UserError(Exception):
    pass


def _fractions(text: str) -> tuple[Fraction, ...]:
    try:
        return tuple(as_fraction(v) for v in text.split(",") if v.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise UserError(f"bad number list {text!r}") from exc


@dataclass
class RunConfig:
    command: str
    k: int
    t: tuple | None = None
    p: tuple | None = None
    form: str = "explicit"
    tol: float = DEFAULT_TOL
    threads: int = 1

    def __post_init__(self):
        if self.tol <= 0:
            raise UserError("tolerance must be positive")
        if self.k < 2:
            raise UserError("k must be at least 2")


def _algorithm(args, k: int) -> tuple[tuple, tuple, str]:
    """Resolve exactly one of the partition/rounding forms."""
    forms = [
        bool(getattr(args, "superoblivious", False)),
        getattr(args, "perturbed", None) is not None,
        getattr(args, "piecewise", None) is not None,
        args.t is not None or args.p is not None,
    ]
    if sum(forms) != 1:
        raise UserError("give exactly one of --superoblivious, --perturbed, --piecewise or -t/-p")
    c = certs.constants(k)
    if forms[0]:
        return (0, 1), (c.p_star,), "superoblivious"
    if forms[1]:
        delta, eps = (as_fraction(v) for v in args.perturbed)
        return (delta, 1), (c.p_star + eps,), "perturbed"
    if forms[2]:
        ell, x, y = args.piecewise
        t, p = piecewise_linear_params(int(ell), as_fraction(x), as_fraction(y))
        return t.t, p.p, "piecewise"
    if args.t is None or args.p is None:
        raise UserError("-t and -p must be given together")
    return _fractions(args.t), _fractions(args.p), "explicit"


def _add_algorithm_flags(sp, piecewise=True):
    sp.add_argument("-t", help="comma-separated thresholds t_0,...,t_ell (t_ell = 1)")
    sp.add_argument("-p", help="comma-separated rounding probabilities p_1,...,p_ell")
    sp.add_argument("--superoblivious", action="store_true", help="t=(0,1), p=(p*_k)")
    sp.add_argument("--perturbed", nargs=2, metavar=("DELTA", "EPS"), help="t=(delta,1), p=(p*_k+eps)")
    if piecewise:
        sp.add_argument("--piecewise", nargs=3, metavar=("ELL", "X", "Y"), help="uniform partition, two-piece rounding")


def _emit(obj, out=None):
    text = json.dumps(obj, sort_keys=True)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    print(text)


def cmd_ratio(args) -> int:
    t, p, form = _algorithm(args, args.k)
    cfg = RunConfig("ratio", args.k, t, p, form, args.tol)
    t, p = as_partition(cfg.t), as_rounding(cfg.p)
    if t.ell != p.ell:
        raise UserError(f"{t.ell} classes need {t.ell} rounding probabilities, got {p.ell}")
    res = factor_lp.approximation_ratio(cfg.k, t, p, tol=cfg.tol, method=args.method)
    meta = res.metadata()
    meta["form"] = form
    if args.weights_out and res.weights is not None:
        with open(args.weights_out, "w") as fh:
            fh.write(res.weights.to_csv())
    if args.sidecar:
        with open(args.sidecar, "w") as fh:
            json.dump(meta, fh, indent=2)
    _emit(meta)
    return 0


def _table_row(job):
    k, delta, eps, piecewise, tol = job
    c = certs.constants(k)
    row = {
        "k": k,
        "upper_bound": 2.0 ** -(k - 1),
        "alpha_star": float(c.alpha_star),
        "alpha_star_exact": str(c.alpha_star),
        "perturbed": certs.perturbed_ratio(k, delta, eps, tol=tol),
    }
    if piecewise is not None:
        ell, x, y = piecewise
        t, p = piecewise_linear_params(int(ell), as_fraction(x), as_fraction(y))
        row["piecewise"] = factor_lp.approximation_ratio(k, t, p, tol=tol).value
        row["piecewise_params"] = f"({ell} {x} {y})"
    return row


def _k_range(text: str) -> list[int]:
    try:
        if "-" in text:
            a, b = text.split("-")
            return list(range(int(a), int(b) + 1))
        return [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise UserError(f"bad k range {text!r}") from exc


def cmd_table(args) -> int:
    ks = _k_range(args.k)
    if any(k < 2 for k in ks):
        raise UserError("k must be at least 2")
    delta, eps = as_fraction(args.delta), as_fraction(args.eps)
    jobs = []
    for k in ks:
        pw = None
        if args.piecewise is not None:
            pw = tuple(args.piecewise)
        elif args.golden_piecewise and k in TABLE_GOLDEN:
            ell = TABLE_GOLDEN[k][1][0]
            if ell <= 30 or args.full:
                pw = tuple(str(v) for v in TABLE_GOLDEN[k][1])
        jobs.append((k, delta, eps, pw, args.tol))
    rows = _parallel(_table_row, jobs, args.threads)
    cols = ["k", "upper_bound", "alpha_star", "perturbed"] + (["piecewise"] if any("piecewise" in r for r in rows) else [])
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join("" if r.get(c) is None else (str(r[c]) if c == "k" else f"{r[c]:.6f}") for c in cols))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)
    if args.check:
        failed = []
        for r in rows:
            k = r["k"]
            if k not in TABLE_GOLDEN:
                continue
            pert = TABLE_GOLDEN[k][0]
            if abs(r["perturbed"] - pert) > 5e-4 or not r["perturbed"] > r["alpha_star"]:
                failed.append(f"k={k} perturbed {r['perturbed']:.6f} vs {pert}")
            if "piecewise" in r and abs(r["piecewise"] - TABLE_GOLDEN[k][2]) > 2e-3:
                failed.append(f"k={k} piecewise {r['piecewise']:.6f} vs {TABLE_GOLDEN[k][2]}")
        for f in failed:
            print(f"CHECK FAILED: {f}", file=sys.stderr)
        if failed:
            return EXIT_CHECK
    return 0


def _parallel(fn, jobs, threads):
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


def _axis(text: str) -> list[float]:
    """``a,b,c`` or ``start:stop:step`` (inclusive of stop)."""
    try:
        if ":" in text:
            a, b, s = (Fraction(v) for v in text.split(":"))
            if s <= 0:
                raise UserError("grid step must be positive")
            out, v = [], a
            while v <= b:
                out.append(float(v))
                v += s
            return out
        return [float(Fraction(v)) for v in text.split(",")]
    except (ValueError, ZeroDivisionError) as exc:
        raise UserError(f"bad grid axis {text!r}") from exc


def cmd_grid(args) -> int:
    xs, ys = _axis(args.x), _axis(args.y)
    if not xs or not ys:
        raise UserError("empty grid")
    res = factor_lp.grid_search(args.k, args.l, xs, ys, tol=args.tol, threads=args.threads)
    csv_text = res.to_csv()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv_text)
        with open(args.sidecar or args.out + ".json", "w") as fh:
            fh.write(res.sidecar(args.tol))
    sys.stdout.write(csv_text)
    for c in res.cells:
        if c.error:
            print(f"cell ({c.x}, {c.y}) failed: {c.error}", file=sys.stderr)
    if res.best is None:
        return EXIT_SOLVER
    print(json.dumps({"best": {"x": res.best.x, "y": res.best.y, "ratio": res.best.ratio}}), file=sys.stderr)
    return 0


def cmd_certify(args) -> int:
    k = args.k
    c = certs.constants(k)
    try:
        r = certs.certify(k, as_fraction(args.eps))
    except certs.CoreStrictError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CHECK
    core = r.core
    lp_value = factor_lp.approximation_ratio(k, (core.delta, 1), ((1 + core.gamma) / 2,), tol=args.tol).value
    path = args.margin_table
    if path:
        with open(path, "w") as fh:
            fh.write(certs.margin_table_csv(r.suff))
    out = {
        "k": k,
        "delta": float(core.delta),
        "eps": float(core.eps),
        "eta": float(core.eta),
        "X": float(core.X),
        "Y": float(core.Y),
        "beta": float(r.beta_prime),
        "certified_lower_bound": float(r.certified_lower_bound),
        "alpha_star": float(c.alpha_star),
        "lp_primal_value": lp_value,
        "margin_table_path": path,
    }
    _emit(out)
    if not r.certified_lower_bound > c.alpha_star or lp_value < float(r.certified_lower_bound) - 1e-6:
        return EXIT_CHECK
    return 0


def cmd_bernoulli(args) -> int:
    status = 0
    for k in _k_range(args.k):
        rep = certs.check_bernoulli(k)
        ok = rep.passed and rep.tight == certs.predicted_tight_set(k)
        _emit({
            "k": k,
            "passed": ok,
            "tight": sorted([list(ij) for ij in rep.tight]),
            "worst_margin": float(rep.worst),
        })
        if args.table:
            with open(args.table, "w") as fh:
                fh.write(certs.bernoulli_table_csv(rep))
        if not ok:
            status = EXIT_CHECK
    return status


def _stream_run(job):
    (mode, base, seed, t, p, eps, C, D, snap, obl_exact, val) = job
    if mode == "random-order":
        perm = streaming.make_rng(seed).permutation(base.m)
        st = streaming.ClauseStream(base.k, base.n, base.variables[perm], base.signs[perm], f"shuffled({seed})")
        out = streaming.random_order_estimate(st, t, p, eps, C, seed)
    else:
        out = streaming.bounded_degree_estimate(base, D, base.m, t, p, eps, C, seed)
    rec = {
        "mode": mode,
        "k": base.k,
        "eps": eps,
        "C": C,
        "seed": seed,
        "estimate": out.estimate,
        "raw": out.raw,
        "snapshot_l1_error": out.Mhat.l1_distance(snap),
        "stored_clauses": out.stored_clauses,
        "tracked_vars": out.tracked_vars,
        "exact_value": obl_exact,
    }
    if val is not None:
        rec["brute_force_value"] = val
    return rec


def cmd_stream(args) -> int:
    if args.input:
        with open(args.input) as fh:
            inst = parse_instance(fh.read())
        base = streaming.ClauseStream.from_instance(inst)
    elif args.gen:
        k, n, m = args.gen
        base = streaming.generate_random_stream(k, n, m, args.profile, args.degree_cap, args.seed)
    else:
        raise UserError("give --input FILE or --gen K N M")
    args.k = base.k
    t, p, _ = _algorithm(args, base.k)
    t, p = as_partition(t), as_rounding(p)
    D = args.degree or streaming.max_degree(base)
    snap = streaming.exact_snapshot(base, t)
    obl = float(sum(sat_prob(c, p) * w for c, w in snap.items()))
    val = None
    if base.n <= 20:
        val = float(brute_force_optimum(base.to_instance())[1])
    seeds = [args.seed + i for i in range(args.seeds)]
    jobs = [(args.mode, base, s, t, p, args.eps, args.C, D, snap, obl, val) for s in seeds]
    recs = _parallel(_stream_run, jobs, args.threads)
    for r in recs:
        print(json.dumps(r, sort_keys=True))
    if args.aggregate:
        qs = [0.01, 0.5, 0.99]
        lines = ["field," + ",".join(f"q{int(q * 100)}" for q in qs)]
        for fld in ("estimate", "snapshot_l1_error", "stored_clauses", "tracked_vars"):
            arr = np.array([r[fld] for r in recs], dtype=float)
            lines.append(fld + "," + ",".join(f"{np.quantile(arr, q):.6g}" for q in qs))
        with open(args.aggregate, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0


def cmd_gen(args) -> int:
    inst = streaming.generate_random_instance(args.k, args.n, args.m, args.profile, args.degree_cap, args.seed)
    text = format_instance(inst, comment=f"random k={args.k} n={args.n} m={args.m} profile={args.profile} seed={args.seed}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_value(args) -> int:
    with open(args.file) as fh:
        inst = parse_instance(fh.read())
    args.k = inst.k
    t, p, _ = _algorithm(args, inst.k)
    x, val = brute_force_optimum(inst)
    obl = oblivious_value(inst, t, p)
    _emit({
        "n": inst.n,
        "m": inst.m,
        "val": float(val),
        "val_exact": str(val),
        "obl": float(obl),
        "obl_exact": str(obl),
        "ratio": float(obl / val),
        "assignment": list(x),
    })
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker processes")
    common.add_argument("--tol", type=float, default=DEFAULT_TOL, help="LP tolerance")
    ap = argparse.ArgumentParser(prog="obliv-kand", description="Oblivious algorithms for Max-kAND.")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("ratio", parents=[common], help="approximation ratio of one oblivious algorithm")
    sp.add_argument("-k", type=int, required=True)
    _add_algorithm_flags(sp)
    sp.add_argument("--method", choices=["primal", "dual"], default="primal")
    sp.add_argument("--weights-out", help="write worst-case pattern weights as CSV")
    sp.add_argument("--sidecar", help="write JSON metadata")
    sp.set_defaults(func=cmd_ratio)

    sp = sub.add_parser("table", parents=[common], help="upper bound, alpha*, perturbed and piecewise ratios")
    sp.add_argument("-k", default="2-5", help="range like 2-5 or list like 2,4")
    sp.add_argument("--delta", default="0.01")
    sp.add_argument("--eps", default="0.001")
    sp.add_argument("--piecewise", nargs=3, metavar=("ELL", "X", "Y"))
    sp.add_argument("--golden-piecewise", action="store_true", help="use the published (ell, x, y) per k")
    sp.add_argument("--full", action="store_true", help="allow the long-running large-ell cases")
    sp.add_argument("--check", action="store_true", help="compare with published values, exit 4 on mismatch")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_table)

    sp = sub.add_parser("grid", parents=[common], help="grid search over two-piece rounding curves")
    sp.add_argument("-k", type=int, required=True)
    sp.add_argument("-l", type=int, required=True)
    sp.add_argument("--x", required=True, help="list a,b,c or range start:stop:step")
    sp.add_argument("--y", required=True)
    sp.add_argument("--out")
    sp.add_argument("--sidecar")
    sp.set_defaults(func=cmd_grid)

    sp = sub.add_parser("certify", parents=[common], help="strict dual certificate beating alpha*_k")
    sp.add_argument("-k", type=int, required=True)
    sp.add_argument("--eps", default="0.001")
    sp.add_argument("--margin-table")
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("bernoulli", parents=[common], help="exact two-sided Bernoulli check")
    sp.add_argument("-k", required=True, help="single k, range 2-100 or list")
    sp.add_argument("--table")
    sp.set_defaults(func=cmd_bernoulli)

    sp = sub.add_parser("stream", parents=[common], help="simulate a streaming estimator")
    sp.add_argument("--mode", choices=["random-order", "bounded-degree"], default="random-order")
    sp.add_argument("--input")
    sp.add_argument("--gen", nargs=3, type=int, metavar=("K", "N", "M"))
    sp.add_argument("--profile", default="uniform", help="uniform, skewed:Q or planted:Q")
    sp.add_argument("--degree-cap", type=int)
    sp.add_argument("--degree", type=int, help="degree bound D (default: measured)")
    sp.add_argument("--eps", type=float, default=0.05)
    sp.add_argument("-C", type=float, default=streaming.DEFAULT_C)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds")
    sp.add_argument("--aggregate", help="CSV of quantiles across seeds")
    _add_algorithm_flags(sp, piecewise=False)
    sp.set_defaults(func=cmd_stream, piecewise=None)

    sp = sub.add_parser("gen", parents=[common], help="generate a random instance file")
    sp.add_argument("-k", type=int, required=True)
    sp.add_argument("-n", type=int, required=True)
    sp.add_argument("-m", type=int, required=True)
    sp.add_argument("--profile", default="uniform")
    sp.add_argument("--degree-cap", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--out")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("value", parents=[common], help="brute-force and oblivious value of an instance")
    sp.add_argument("file")
    _add_algorithm_flags(sp)
    sp.set_defaults(func=cmd_value)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USER if exc.code else 0
    try:
        return args.func(args)
    except (UserError, InstanceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
