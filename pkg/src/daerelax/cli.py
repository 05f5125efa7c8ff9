"""Command-line front end: ``daerelax analyze|modify|check|bench``.

Exit codes:

0  final status OK (``check``: residuals below threshold)
1  usage, input or parse error
2  structural failure F1 (no perfect matching)
3  MethodFailure (the chosen modification method could not proceed)
4  F3 reported by ``analyze`` (identically singular Jacobian, repairable)
5  F2-candidate (Jacobian nonsingular but singular at the base point)
6  ``check`` residuals above threshold
"""

from __future__ import annotations

import argparse
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import instances
from .assign import signature, solve_assignment
from .errors import DaeError, DaeSyntaxError
from .jacobian import F1, F2_CANDIDATE, F3, OK, classify_failure, structural_rank, system_jacobian, term_rank
from .model import residuals
from .numeric import NEG_INF, ZeroTestConfig, ZeroTester
from .printer import var_text
from .relax import METHOD_FAILURE, RelaxationOptions, fill_unknown_aux, relax, verify_equivalence
from .textio import dump_report, load_dae, load_fixture, report_to_dict, serialize_dae

EXIT_OK, EXIT_USAGE, EXIT_F1, EXIT_METHOD, EXIT_F3, EXIT_F2, EXIT_CHECK = 0, 1, 2, 3, 4, 5, 6
_STATUS_EXIT = {OK: EXIT_OK, F1: EXIT_F1, METHOD_FAILURE: EXIT_METHOD, F3: EXIT_F3,
                F2_CANDIDATE: EXIT_F2}


class UsageError(Exception):
    pass


# ----------------------------------------------------------------------
# argument helpers


def resolve_path(name: str) -> Path:
    """A path on disk, or the name of a shipped instance."""
    p = Path(name)
    if p.exists():
        return p
    try:
        return instances.path(name)
    except FileNotFoundError:
        raise UsageError(f"no such file or shipped instance: {name}") from None


def _index_list(text: str) -> list:
    text = text.strip().strip("{}[]()")
    if not text:
        return []
    return [int(x) for x in re.split(r"[\s,;]+", text) if x]


def parse_pivot(text: str) -> dict:
    """``r=11,I={3,4,5},J={3,5,6}`` (1-based) -> 0-based dict."""
    fields = dict(re.findall(r"([rIJ])\s*=\s*(\{[^}]*\}|\[[^\]]*\]|[^,]*)", text))
    if set(fields) != {"r", "I", "J"}:
        raise UsageError(f"--pivot needs r=, I= and J=, got {text!r}")
    try:
        r = int(fields["r"])
        I = _index_list(fields["I"])
        J = _index_list(fields["J"])
    except ValueError:
        raise UsageError(f"bad index in --pivot {text!r}") from None
    if min([r] + I + J) < 1:
        raise UsageError("--pivot indices are 1-based")
    return {"r": r - 1, "I": tuple(i - 1 for i in I), "J": tuple(j - 1 for j in J)}


def parse_vector(text: str) -> tuple:
    try:
        return tuple(_index_list(text))
    except ValueError:
        raise UsageError(f"bad integer vector {text!r}") from None


# commas inside der(...) do not separate entries
_XI_SPLIT = re.compile(r",(?![^()]*\))")
_XI_KEY = re.compile(r"^\s*(?:der\(\s*([A-Za-z_]\w*)\s*,\s*(\d+)\s*\)|([A-Za-z_]\w*)('*))\s*$")


def parse_xi(text: str) -> dict:
    """``x1'=0.5,der(x2,2)=1`` -> {(name, order): value}."""
    out = {}
    for item in filter(None, (s.strip() for s in _XI_SPLIT.split(text))):
        if "=" not in item:
            raise UsageError(f"--xi entry {item!r} is not key=value")
        key, val = item.rsplit("=", 1)
        m = _XI_KEY.match(key)
        if not m:
            raise UsageError(f"--xi key {key!r} is not a variable or der(name, k)")
        name, order = (m.group(1), int(m.group(2))) if m.group(1) else (m.group(3), len(m.group(4)))
        try:
            out[(name, order)] = float(val)
        except ValueError:
            raise UsageError(f"--xi value {val!r} is not a number") from None
    return out


def _zero_config(args) -> ZeroTestConfig:
    try:
        return ZeroTestConfig(samples=args.samples, radius=args.radius, tolerance=args.tol_zero, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _fmt(x) -> str:
    if x == NEG_INF:
        return "-inf"
    if isinstance(x, float) and x.is_integer():
        return str(int(x))
    return str(x)


def _matrix_text(rows, fmt) -> str:
    cells = [[fmt(v) for v in row] for row in rows]
    width = max((len(c) for row in cells for c in row), default=1)
    return "\n".join("  " + " ".join(c.rjust(width) for c in row) for row in cells)


# ----------------------------------------------------------------------
# subcommands


def cmd_analyze(args, out) -> int:
    sys_ = load_dae(resolve_path(args.file))
    sys_.require_square()
    cfg = _zero_config(args)
    zt = ZeroTester(cfg, sys_.params, sys_.base_point)
    sig = signature(sys_, zt)
    dual = solve_assignment(sig)
    print(f"variables: {', '.join(sys_.columns)}", file=out)
    print("signature matrix (- = no dependence):", file=out)
    print(_matrix_text(sig.entries, lambda v: "-" if v == NEG_INF else _fmt(v)), file=out)
    if dual.delta_hat == NEG_INF:
        print("no perfect matching: structural failure F1", file=out)
        print(f"failure class: {F1}", file=out)
        return EXIT_F1
    jac = system_jacobian(sys_, dual, zt)
    print(f"p = {list(dual.p)}", file=out)
    print(f"q = {list(dual.q)}", file=out)
    print(f"delta-hat = {_fmt(dual.delta_hat)}", file=out)
    print("system Jacobian pattern:", file=out)
    print(_matrix_text(jac.pattern, lambda v: "x" if v else "."), file=out)
    print(f"term rank = {term_rank(jac)}, structural rank = {structural_rank(jac, zt)}, n = {sys_.n}", file=out)
    if args.show_entries:
        for i, row in enumerate(jac.entries):
            for j, e in enumerate(row):
                if jac.pattern[i][j]:
                    print(f"  D[{i + 1},{j + 1}] = {e}", file=out)
    cls = classify_failure(sys_, dual, jac, zt)
    print(f"failure class: {cls}", file=out)
    return _STATUS_EXIT[cls]


def _options(args) -> RelaxationOptions:
    overrides = {}
    ov = {}
    if args.pivot:
        ov.update(parse_pivot(args.pivot))
    if args.p or args.q:
        if not (args.p and args.q):
            raise UsageError("--p and --q must be given together")
        ov["p"], ov["q"] = parse_vector(args.p), parse_vector(args.q)
    if ov:
        overrides[args.iteration] = ov
    xi = parse_xi(args.xi) if args.xi else None
    try:
        return RelaxationOptions(method=args.method, zero_test=_zero_config(args), overrides=overrides, xi=xi,
                                 dynamic_pivoting=args.dynamic_pivoting, max_iterations=args.max_iterations)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _summary(report, out):
    for it in report.iterations:
        line = f"iteration {it.index}: delta-hat = {_fmt(it.dual.delta_hat)}, verdict {it.verdict}"
        if it.pivot is not None:
            pv = it.pivot.one_based()
            line += f", pivot r={pv['r']} I={pv['I']} J={pv['J']}"
        if it.method:
            line += f", {it.method}"
        print(line, file=out)
    print(f"final status: {report.final_status}", file=out)
    if report.error:
        print(f"error: {report.error}", file=out)


def cmd_modify(args, out) -> int:
    src = resolve_path(args.file)
    sys_ = load_dae(src)
    opts = _options(args)
    report = relax(sys_, opts)
    check = None
    if args.trajectory:
        fix = load_fixture(resolve_path(args.trajectory), sys_.params)
        eq = verify_equivalence(sys_, report.final_system, fix, report.steps, args.threshold)
        check = {"before_max": eq.before_max, "after_max": eq.after_max, "threshold": eq.threshold,
                 "passed": eq.passed, "grid_points": len(fix.grid)}
    _summary(report, out)
    if check is not None:
        print(f"residual check: before {check['before_max']:.3e}, after {check['after_max']:.3e}, "
              f"{'passed' if check['passed'] else 'FAILED'}", file=out)
    options = {"method": opts.method, "seed": opts.zero_test.seed, "samples": opts.zero_test.samples,
               "tol_zero": opts.zero_test.tolerance, "radius": opts.zero_test.radius,
               "overrides": {str(k): {kk: list(vv) if isinstance(vv, tuple) else vv for kk, vv in v.items()}
                             for k, v in opts.overrides.items()},
               "xi": {var_text(n, k): v for (n, k), v in (opts.xi or {}).items()}}
    data = report_to_dict(report, str(src), options, check)
    if args.out:
        dump_report(data, args.out)
    if args.emit:
        Path(args.emit).write_text(serialize_dae(report.final_system), encoding="utf-8")
    if args.json:
        print(dump_report(data), file=out)
    return _STATUS_EXIT.get(report.final_status, EXIT_METHOD)


def cmd_check(args, out) -> int:
    before = load_dae(resolve_path(args.file))
    after = load_dae(resolve_path(args.against))
    fix = load_fixture(resolve_path(args.trajectory), {**before.params, **after.params})
    b = residuals(before, fix)
    full = fill_unknown_aux(after, fix)
    a = residuals(after, full)
    bm = float(abs(b).max()) if b.size else 0.0
    am = float(abs(a).max()) if a.size else 0.0
    ok = bm <= args.threshold and am <= args.threshold
    print(f"max |F| original: {bm:.3e}", file=out)
    print(f"max |F| modified: {am:.3e}", file=out)
    recovered = [n for n in after.aux_vars if n not in fix.closed_form and n not in fix.tabulated]
    if recovered:
        print(f"aux values fitted numerically: {', '.join(recovered)}", file=out)
    print("equivalent on the fixture" if ok else f"residuals exceed {args.threshold:g}", file=out)
    return EXIT_OK if ok else EXIT_CHECK


def _bench_one(job):
    name, method, cfg = job
    sys_ = load_dae(instances.path(name))
    t0 = time.perf_counter()
    report = relax(sys_, RelaxationOptions(method=method, zero_test=cfg))
    dt = time.perf_counter() - t0
    return (name, sys_.n, report.final_system.n, [_fmt(d) for d in report.delta_hats], len(report.steps),
            report.final_status, report.error, dt)


def cmd_bench(args, out) -> int:
    cfg = _zero_config(args)
    jobs = [(name, args.method, cfg) for name in (args.instances or instances.BENCHMARKS)]
    for name, _, _ in jobs:
        if name not in instances.NAMES:
            raise UsageError(f"unknown instance {name!r}")
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_bench_one, jobs))
    else:
        rows = [_bench_one(j) for j in jobs]
    print(f"{'instance':<16}{'n':>4}{'n_final':>9}  {'delta-hat':<18}{'steps':>6}  {'status':<14}{'time/s':>8}",
          file=out)
    for name, n, nf, dh, steps, status, err, dt in rows:
        print(f"{name:<16}{n:>4}{nf:>9}  {','.join(dh):<18}{steps:>6}  {status:<14}{dt:>8.2f}", file=out)
        if err:
            print(f"  {err}", file=out)
    return EXIT_OK if all(r[5] == OK for r in rows) else EXIT_METHOD


# ----------------------------------------------------------------------


def _add_zero_test_args(p):
    p.add_argument("--seed", type=int, default=0, help="seed of the random zero test")
    p.add_argument("--samples", type=int, default=8, help="sample points per zero test")
    p.add_argument("--tol-zero", type=float, default=1e-10, help="relative zero-test tolerance")
    p.add_argument("--radius", type=float, default=1.0, help="sampling radius around the base point")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="daerelax", description="Structural analysis and repair of DAEs.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="signature matrix, dual, Jacobian pattern and failure class")
    p.add_argument("file")
    p.add_argument("--show-entries", action="store_true", help="print the nonzero Jacobian entries")
    _add_zero_test_args(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("modify", help="run combinatorial relaxation")
    p.add_argument("file")
    p.add_argument("--method", default="auto", choices=["sub", "substitution", "aug", "augmentation", "lc", "auto"])
    p.add_argument("--pivot", help="manual pivot r=..,I={..},J={..} (1-based)")
    p.add_argument("--p", help="manual dual p (comma separated)")
    p.add_argument("--q", help="manual dual q (comma separated)")
    p.add_argument("--iteration", type=int, default=1, help="iteration the manual choices apply to")
    p.add_argument("--xi", help="frozen values for augmentation, e.g. x1'=0.5,der(x2,2)=0")
    p.add_argument("--dynamic-pivoting", action="store_true", help="re-choose J by |det| at the base point")
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--trajectory", help="fixture file for a residual-equivalence check")
    p.add_argument("--threshold", type=float, default=1e-8)
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--emit", help="write the modified system here")
    p.add_argument("--json", action="store_true", help="print the JSON report")
    _add_zero_test_args(p)
    p.set_defaults(func=cmd_modify)

    p = sub.add_parser("check", help="residual equivalence of two systems along a fixture")
    p.add_argument("file")
    p.add_argument("--against", required=True)
    p.add_argument("--trajectory", required=True)
    p.add_argument("--threshold", type=float, default=1e-8)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("bench", help="run the benchmark instances end to end")
    p.add_argument("instances", nargs="*")
    p.add_argument("--method", default="augmentation",
                   choices=["sub", "substitution", "aug", "augmentation", "lc", "auto"])
    p.add_argument("--jobs", type=int, default=1)
    _add_zero_test_args(p)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"daerelax: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DaeSyntaxError as exc:
        print(f"daerelax: {getattr(args, 'file', '')}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, DaeError) as exc:
        print(f"daerelax: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
