"""Command line runner: one seeded subcommand per experiment.

Exit status: 0 on success, 2 when the configuration is invalid, 3 when a
numerical check fails.  Artifacts go to ``--out`` (stdout when omitted) and a
one-line summary is printed (to stderr when the artifact itself is on stdout).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import acceptance
from .disorder import DomainError, PhaseDistribution, correlated_verblunski, parse_distribution, sample_phases
from .furstenberg import group_elements, noncompactness_probe
from .operators import (
    FLAVORS,
    BandParameters,
    ConstructionError,
    build_cmv,
    build_diagonal,
    build_S_plus,
    build_S_window,
    build_U_plus,
    build_U_window,
    cmv_conjugation_check,
    dump_window,
)
from .spectral import (
    RANK_THRESHOLD,
    NonUnitaryError,
    almost_sure_spectrum,
    eig_unitary,
    edge_mass,
    EDGE_MASS,
    krylov_cyclicity,
    localization_report,
    spectral_averaging_experiment,
)
from .transfer import lyapunov_sweep

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
RESIDUAL_BOUND = 1e-9
CMV_BOUND = 1e-12


class ValidationError(ValueError):
    pass


class NumericalCheckError(RuntimeError):
    pass


# ------------------------------------------------------------------ output

def fmt(x) -> str:
    """17 significant digits; integers and strings pass through."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return format(x, ".17g")
    return str(x)


def to_json(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON writer that prints every float with 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_quote(str(k))}: {to_json(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(to_json(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + to_json(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return _quote(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return to_json({"re": obj.real, "im": obj.imag}, indent, _level)
    return fmt(obj)


def _quote(s: str) -> str:
    return json.dumps(s)


def to_csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows([fmt(v) for v in row] for row in rows)
    return buf.getvalue()


def emit(args, text: str, summary: str, path=None):
    path = path or args.out
    if path:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise ValidationError(f"cannot write {path}: {exc}") from exc
        if summary:
            print(summary)
    else:
        sys.stdout.write(text)
        if summary:
            print(summary, file=sys.stderr)


# ------------------------------------------------------------------ parsing helpers

def alpha_grid(spec: str) -> np.ndarray:
    try:
        start, end, points = spec.split(",")
        start, end, points = float(start), float(end), int(points)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"alpha grid must be start,end,points, got {spec!r}") from exc
    if points < 1:
        raise argparse.ArgumentTypeError("alpha grid needs at least one point")
    return np.linspace(start, end, points)


def seed_type(s: str) -> int:
    try:
        v = int(s, 10)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"seed must be a decimal integer, got {s!r}") from exc
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def nu_type(s: str) -> PhaseDistribution:
    try:
        return parse_distribution(s)
    except (DomainError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def unit_interval(s: str) -> float:
    v = float(s)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"value must lie in (0, 1), got {v}")
    return v


def positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def read_config(path: str) -> dict[str, str]:
    """Flat ``key = value`` file; keys mirror flag names, ``#`` starts a comment."""
    cfg = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{n}: expected key=value")
        k, v = (x.strip() for x in line.split("=", 1))
        cfg[k.lstrip("-").replace("-", "_")] = v
    return cfg


# ------------------------------------------------------------------ subcommands

def _params(args) -> BandParameters:
    return BandParameters(args.t)


def cmd_build(args):
    p = _params(args)
    size = args.size
    if args.flavor == "CMV":
        om = sample_phases(args.nu, args.seed, 0, size)
        w = build_cmv(correlated_verblunski(om, args.r), size)
    elif args.flavor in ("S-plus", "U-plus"):
        w = build_S_plus(p, size)
        if args.flavor == "U-plus":
            w = build_U_plus(p, sample_phases(args.nu, args.seed, 0, size), size)
    else:
        off = args.offset if args.offset is not None else -2 * (size // 4)
        om = sample_phases(args.nu, args.seed, off, off + size)
        w = {
            "S-full": lambda: build_S_window(p, size, off),
            "U-full": lambda: build_U_window(p, om, size, off),
            "D-diagonal": lambda: build_diagonal(om, size, off),
        }[args.flavor]()
    header, body = dump_window(w, args.seed)
    d = w.defect()
    if args.out:
        emit(args, header + "\n", "", path=str(Path(args.out).with_suffix(".json")))
    text = body if args.out else header + "\n" + body
    emit(args, text, f"build {w.flavor} size={w.size} offset={w.offset} unitarity_defect={d:.3e}")


def _chunks(values, n):
    n = max(1, min(n, len(values)))
    return [c for c in np.array_split(values, n) if len(c)]


def cmd_lyapunov(args):
    p = _params(args)
    alphas = args.alpha_grid
    run = lambda a: lyapunov_sweep(  # noqa: E731
        args.nu, p, a, args.steps, args.runs, args.seed, args.direction, args.burn_in
    )
    with ThreadPoolExecutor(max_workers=args.jobs) as ex:
        parts = list(ex.map(run, _chunks(alphas, args.jobs)))
    est = [e for part in parts for e in part]
    spec = args.nu.spec_string()
    cols = ["alpha", "gamma_hat", "stderr", "gamma_per_site", "steps", "runs", "t", "nu_spec", "seed"]
    rows = [[e.alpha, e.gamma_hat, e.std_error, e.gamma_per_site, e.steps_per_run, e.runs, args.t, spec, args.seed]
            for e in est]
    if args.format == "json":
        text = to_json([dict(zip(cols, r)) for r in rows]) + "\n"
    else:
        text = to_csv(cols, rows)
    lo = min(e.gamma_hat for e in est)
    emit(args, text, f"lyapunov {len(est)} alphas min gamma_hat={lo:.6f} t={args.t} nu={spec}")


def _spectrum_one(args, p, sigma, i):
    size = args.window
    off = -2 * (size // 4)
    om = sample_phases(args.nu, args.seed, off, off + size, stream=i)
    dec = eig_unitary(build_U_window(p, om, size, off))
    if dec.residual > RESIDUAL_BOUND:
        raise NumericalCheckError(f"eigen-residual {dec.residual:.3e} in realization {i}")
    ins = edge_mass(dec.eigenvectors) < EDGE_MASS
    dist = sigma.distance(dec.eigenphases)
    return dec, ins, dist


def cmd_spectrum(args):
    p = _params(args)
    sigma = almost_sure_spectrum(args.nu, args.t)
    with ThreadPoolExecutor(max_workers=args.jobs) as ex:
        res = list(ex.map(lambda i: _spectrum_one(args, p, sigma, i), range(args.realizations)))
    rows = []
    for i, (dec, ins, dist) in enumerate(res):
        for j, lam in enumerate(dec.eigenphases):
            rows.append([i, j, lam, dist[j], bool(ins[j]), bool(dist[j] <= args.eps)])
    inside = [r[5] for r in rows if r[4]]
    frac = float(np.mean(inside)) if inside else float("nan")
    cols = ["realization", "index", "eigenphase", "distance_to_sigma", "insulated", "inside"]
    if args.format == "json":
        text = to_json({
            "t": args.t, "nu": args.nu.spec_string(), "window": args.window, "seed": args.seed,
            "eps": args.eps, "sigma": sigma.to_json(), "inside_fraction": frac,
            "max_residual": max(d.residual for d, _, _ in res),
            "eigenphases": [dict(zip(cols, r)) for r in rows],
        }) + "\n"
    else:
        text = to_csv(cols, rows)
    emit(args, text, f"spectrum {args.realizations}x{args.window} inside_fraction={frac:.4f} eps={args.eps}")


def cmd_localize(args):
    rep = localization_report(
        args.nu, args.t, args.window, args.realizations, args.seed, eps=args.eps,
        lyapunov_steps=args.steps, lyapunov_runs=args.runs, jobs=args.jobs,
    )
    worst = max(s["residual"] for s in rep["per_realization"])
    if worst > RESIDUAL_BOUND:
        raise NumericalCheckError(f"eigen-residual {worst:.3e}")
    hist = to_csv(["bin_center", "count"], zip(rep["histogram"]["bin_center"], rep["histogram"]["count"]))
    summary = (
        f"localize window={args.window} realizations={args.realizations} "
        f"decay/(gamma/2)={rep['decay_to_lyapunov_ratio']:.4f} inside={rep['inside_fraction']:.4f}"
    )
    if args.histogram:
        emit(args, hist, "", path=args.histogram)
    emit(args, hist if args.format == "csv" else to_json(rep) + "\n", summary)


def cmd_average(args):
    om = sample_phases(args.nu, args.seed, -args.window, args.window)
    m = spectral_averaging_experiment(om, args.grid, args.window, args.t, n_max=args.n_max)
    rows = [[n, z.real, z.imag, abs(z)] for n, z in enumerate(m)]
    cols = ["n", "re", "im", "abs"]
    if args.format == "json":
        text = to_json({"t": args.t, "window": args.window, "grid": args.grid, "seed": args.seed,
                        "moments": [dict(zip(cols, r)) for r in rows]}) + "\n"
    else:
        text = to_csv(cols, rows)
    emit(args, text, f"average grid={args.grid} max|m_n|(1..5)={np.abs(m[1:6]).max():.3e}")


def cmd_fuerstenberg(args):
    cert = group_elements(args.theta, args.eta, _params(args))
    doc = json.loads(cert.to_json())
    if args.powers:
        doc["growth_rate_K_powers"] = noncompactness_probe(args.theta, args.eta, cert.p, args.powers)
    emit(args, to_json(doc) + "\n",
         f"fuerstenberg trace_K={cert.trace_K:.6g} noncompact_witnessed={str(cert.noncompact_witnessed).lower()}")


def cmd_cmv_check(args):
    om = sample_phases(args.nu, args.seed, 0, args.size)
    v = correlated_verblunski(om, args.r)
    interior = cmv_conjugation_check(v, args.beta0, args.size)
    full = cmv_conjugation_check(v, args.beta0, args.size, edge_rows=0)
    doc = to_json({"r": args.r, "size": args.size, "seed": args.seed, "beta0": args.beta0,
                   "interior_defect": interior, "all_rows_defect": full, "bound": CMV_BOUND,
                   "pass": interior < CMV_BOUND}) + "\n"
    emit(args, doc, f"cmv-check r={args.r} size={args.size} interior_defect={interior:.3e}")
    if not interior < CMV_BOUND:
        raise NumericalCheckError(f"conjugation defect {interior:.3e} above {CMV_BOUND}")


def cmd_cyclicity(args):
    p = _params(args)
    size = args.window

    def trial(i):
        om = sample_phases(args.nu, args.seed, -2 * size, 2 * size, stream=i)
        if args.lattice == "full":
            U, sites = build_U_window(p, om, size, -2 * (size // 4)), [-1, 0]
        elif args.lattice == "half":
            U, sites = build_U_plus(p, om, size), [0]
        else:
            U, sites = build_diagonal(om, size, -2 * (size // 4)), [-1, 0]
        order = args.span_order or -(-size // len(sites))
        rank, _ = krylov_cyclicity(U, sites, order, args.threshold, method=args.method)
        return [i, args.lattice, args.method, rank, size]

    with ThreadPoolExecutor(max_workers=args.jobs) as ex:
        rows = list(ex.map(trial, range(args.realizations)))
    cols = ["realization", "lattice", "method", "rank", "window"]
    text = to_json([dict(zip(cols, r)) for r in rows]) + "\n" if args.format == "json" else to_csv(cols, rows)
    ranks = [r[3] for r in rows]
    emit(args, text, f"cyclicity {args.lattice}/{args.method} rank {min(ranks)}..{max(ranks)} of {size}")


def cmd_selftest(args):
    only = {int(x) for x in args.only.split(",")} if args.only else None
    results = acceptance.run_all(seed=args.seed, jobs=args.jobs, only=only)
    for r in results:
        print(r.line(), flush=True)
    if args.out:
        doc = {f"criterion_{r.number}": {"name": r.name, "passed": r.passed, "summary": r.summary,
                                         "details": r.details} for r in results}
        emit(args, to_json(doc) + "\n", "")
    failed = [r.number for r in results if not r.passed]
    print(f"selftest {len(results) - len(failed)}/{len(results)} passed" + (f"; failed {failed}" if failed else ""))
    if failed:
        raise NumericalCheckError(f"criteria {failed} failed")


# ------------------------------------------------------------------ parser

def _common(sp, t=True, nu=True, fmt_choices=("csv", "json"), fmt_default="csv"):
    sp.add_argument("--config", help="key=value file; flags given on the command line take precedence")
    sp.add_argument("--seed", type=seed_type, default=0, help="unsigned 64-bit seed (default 0)")
    sp.add_argument("--out", help="output file (default stdout)")
    sp.add_argument("--format", choices=fmt_choices, default=fmt_default, help=f"output format (default {fmt_default})")
    sp.add_argument("--jobs", type=positive_int, default=os.cpu_count() or 1,
                    help="concurrent tasks (default: available CPUs); output does not depend on it")
    if t:
        sp.add_argument("--t", type=unit_interval, default=0.5, help="hopping amplitude t in (0, 1) (default 0.5)")
    if nu:
        sp.add_argument("--nu", type=nu_type, default=parse_distribution("uniform"),
                        help="phase distribution: uniform | arc:C,H | atoms:P@W;... | mix:ACW,arc:C,H,atoms:P@W;...")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bandunitary", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")
    raw = argparse.RawDescriptionHelpFormatter

    sp = sub.add_parser("build", help="dump a finite window", formatter_class=raw, description=(
        "Dump a window as CSV rows row,col,re,im (nonzero entries, 17 significant digits)\n"
        "plus a JSON header {flavor, size, offset, t, seed}.  With --out the header goes\n"
        "to the same path with suffix .json; otherwise it is the first stdout line."))
    _common(sp, fmt_choices=("csv",))
    sp.add_argument("--flavor", choices=FLAVORS, default="U-full")
    sp.add_argument("--size", type=positive_int, default=40)
    sp.add_argument("--offset", type=int, help="first lattice site of full-lattice windows (even)")
    sp.add_argument("--r", type=unit_interval, default=0.6, help="Verblunski modulus for CMV windows")
    sp.set_defaults(func=cmd_build)

    sp = sub.add_parser("lyapunov", help="Lyapunov exponent sweep over spectral shifts", formatter_class=raw,
                        description=(
                            "Monte-Carlo Lyapunov exponents per transfer step.\n"
                            "Columns: alpha, gamma_hat, stderr, gamma_per_site, steps, runs, t, nu_spec, seed."))
    _common(sp)
    sp.add_argument("--alpha-grid", type=alpha_grid, default=alpha_grid("0,6.283185307179586,32"),
                    help="start,end,points (inclusive linspace; default 0,2pi,32)")
    sp.add_argument("--steps", type=positive_int, default=100_000)
    sp.add_argument("--runs", type=positive_int, default=16)
    sp.add_argument("--burn-in", type=int, default=100)
    sp.add_argument("--direction", choices=("forward", "backward"), default="forward")
    sp.set_defaults(func=cmd_lyapunov)

    sp = sub.add_parser("spectrum", help="eigenphases and containment in the almost-sure spectrum",
                        formatter_class=raw, description=(
                            "Eigenphases of independent windows.  CSV columns: realization, index,\n"
                            "eigenphase, distance_to_sigma, insulated, inside (distance <= eps)."))
    _common(sp)
    sp.add_argument("--window", "--size", dest="window", type=positive_int, default=500)
    sp.add_argument("--realizations", type=positive_int, default=10)
    sp.add_argument("--eps", type=float, default=0.05, help="fattening of the spectrum in radians")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("localize", help="full localization report", formatter_class=raw, description=(
        "JSON report with per-realization arrays and aggregates (decay rates, participation\n"
        "ratios, containment), or with --format csv the eigenphase histogram (bin_center, count)."))
    _common(sp, fmt_default="json")
    sp.add_argument("--window", "--size", dest="window", type=positive_int, default=1000)
    sp.add_argument("--realizations", type=positive_int, default=20)
    sp.add_argument("--eps", type=float, default=0.05)
    sp.add_argument("--steps", type=positive_int, default=20_000, help="Lyapunov steps per run")
    sp.add_argument("--runs", type=positive_int, default=16, help="Lyapunov runs")
    sp.add_argument("--histogram", help="also write the histogram CSV here")
    sp.set_defaults(func=cmd_localize)

    sp = sub.add_parser("average", help="site-0 spectral measure averaged over theta_0", formatter_class=raw,
                        description="Averaged moments m_n, n = 0..n-max.  Columns: n, re, im, abs.")
    _common(sp)
    sp.add_argument("--window", "--size", dest="window", type=positive_int, default=200)
    sp.add_argument("--grid", type=positive_int, default=256, help="theta_0 grid points (at least 64)")
    sp.add_argument("--n-max", type=positive_int, default=10)
    sp.set_defaults(func=cmd_average)

    sp = sub.add_parser("fuerstenberg", help="non-compactness certificate at (theta, eta)", formatter_class=raw,
                        description=(
                            "JSON with identity defects, trace and eigenvalues of K, and the boolean\n"
                            "noncompact_witnessed."))
    _common(sp, nu=False, fmt_choices=("json",), fmt_default="json")
    sp.add_argument("--theta", type=float, default=0.0)
    sp.add_argument("--eta", type=float, default=math.pi)
    sp.add_argument("--powers", type=positive_int, help="also report ||K^n||^(1/n) for this n")
    sp.set_defaults(func=cmd_fuerstenberg)

    sp = sub.add_parser("cmv-check", help="conjugation of the CMV matrix into -U+", formatter_class=raw,
                        description=(
                            "Builds the CMV matrix for alpha_k = r exp(i eta_k) with correlated eta and\n"
                            "reports max |B^-1 C B + U+| on interior rows.  Exit 3 above 1e-12."))
    _common(sp, t=False, fmt_choices=("json",), fmt_default="json")
    sp.add_argument("--r", type=unit_interval, default=0.6, help="Verblunski modulus in (0, 1)")
    sp.add_argument("--size", type=positive_int, default=200)
    sp.add_argument("--beta0", type=float, default=0.0)
    sp.set_defaults(func=cmd_cmv_check)

    sp = sub.add_parser("cyclicity", help="numerical Krylov rank", formatter_class=raw, description=(
        "Krylov rank of sites {-1, 0} (full lattice, diagonal control) or {0} (half lattice).\n"
        "Columns: realization, lattice, method, rank, window."))
    _common(sp)
    sp.add_argument("--window", "--size", dest="window", type=positive_int, default=40)
    sp.add_argument("--realizations", type=positive_int, default=20)
    sp.add_argument("--lattice", choices=("full", "half", "diagonal"), default="full")
    sp.add_argument("--method", choices=("svd", "arnoldi"), default="svd")
    sp.add_argument("--span-order", type=positive_int)
    sp.add_argument("--threshold", type=float, default=RANK_THRESHOLD)
    sp.set_defaults(func=cmd_cyclicity)

    sp = sub.add_parser("selftest", help="run the acceptance checks", formatter_class=raw, description=(
        "Prints one PASS/FAIL line per criterion; --out writes all measured details as JSON.\n"
        "Exit 3 when any criterion fails."))
    _common(sp, t=False, nu=False, fmt_choices=("json",), fmt_default="json")
    sp.set_defaults(seed=acceptance.DEFAULT_SEED)
    sp.add_argument("--only", help="comma separated criterion numbers")
    sp.set_defaults(func=cmd_selftest)
    return ap


def parse(argv=None) -> argparse.Namespace:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        sub = ap._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        bad = sorted(set(cfg) - known - {"command"})
        if bad:
            raise ValidationError(f"unknown config keys: {', '.join(bad)}")
        cfg.pop("command", None)
        cfg.pop("config", None)
        # string defaults are converted by the argument's type, so flags still win
        sub.set_defaults(**cfg)
        args = ap.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse(argv)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except (ValidationError, DomainError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalCheckError, NonUnitaryError, ConstructionError) as exc:
        print(f"numerical check failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
