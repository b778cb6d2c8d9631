"""Command-line interface: ``gmleb {fit,estimate,simulate,check}``.

Exit codes: 0 success, 1 validation or invariant failure, 2 I/O or usage error.
"""
import argparse
import math
import os
import sys

import numpy as np

from gmleb import estimators, npmle, selfcheck, simlab


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def read_values(path):
    """Newline-delimited reals; blank lines and ``#`` comments are skipped."""
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", 2) from None
    vals = []
    for lineno, line in enumerate(lines, 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        try:
            v = float(s)
        except ValueError:
            raise CliError(f"{path}:{lineno}: not a number: {s!r}", 1) from None
        if not math.isfinite(v):
            raise CliError(f"{path}:{lineno}: value must be finite: {s!r}", 1)
        vals.append(v)
    if not vals:
        raise CliError(f"{path}: no values found", 1)
    return np.array(vals)


def _prefix(args):
    if args.out:
        return args.out
    root, _ = os.path.splitext(args.input)
    return root


def cmd_fit(args):
    X = read_values(args.input)
    grid = npmle.build_grid_paper(X) if args.grid == "paper" else npmle.build_grid_certified(X)
    stop = npmle.CertifiedStop() if args.stop == "certified" else npmle.FixedIterations(args.iters)
    fit = npmle.fit_npmle(X, grid, None, stop)
    prefix = _prefix(args)
    csv_path, json_path = prefix + ".mixture.csv", prefix + ".fit.json"
    try:
        npmle.write_fit(fit, csv_path, json_path)
    except OSError as exc:
        raise CliError(f"cannot write {prefix}: {exc.strerror}", 2) from None
    msg = f"n={X.size} grid={len(grid)} iterations={fit.iterations} loglik={fit.final_loglik:.6g}"
    if fit.certificate is not None:
        msg += f" certified={fit.certificate.satisfied}"
    print(msg)
    print(f"wrote {csv_path} and {json_path}")
    return 0


def _spec_from_args(args):
    kw = {}
    if args.estimator == "fdr":
        kw["q"] = args.q if args.q is not None else 0.1
    elif args.q is not None:
        raise CliError("--q only applies to --estimator fdr", 2)
    if args.estimator in ("gmleb", "s_gmleb"):
        kw.update(grid=args.grid, stop=args.stop, iterations=args.iters)
        if args.estimator == "s_gmleb":
            kw["kappa"] = args.kappa
    if args.estimator == "james_stein":
        kw["target"] = args.target
    try:
        return estimators.EstimatorSpec(args.estimator, **kw)
    except ValueError as exc:
        raise CliError(str(exc), 2) from None


def cmd_estimate(args):
    spec = _spec_from_args(args)
    if spec.kind == "oracle" and not args.truth:
        raise CliError("--estimator oracle requires --truth PATH", 2)
    X = read_values(args.input)
    theta = None
    if args.truth:
        theta = read_values(args.truth)
        if theta.size != X.size:
            raise CliError(f"{args.truth}: {theta.size} values but input has {X.size}", 1)
    try:
        res = estimators.run_estimator(spec, X, theta)
    except ValueError as exc:
        raise CliError(f"{spec.label}: {exc}", 1) from None
    lines = [repr(float(v)) for v in res.estimates]
    lines.append(f"# estimator: {spec.label}")
    for key, val in res.metadata().items():
        lines.append(f"# {key}: {val!r}" if isinstance(val, float) else f"# {key}: {val}")
    text = "\n".join(lines) + "\n"
    if args.out:
        try:
            with open(args.out, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise CliError(f"cannot write {args.out}: {exc.strerror}", 2) from None
    else:
        sys.stdout.write(text)
    return 0


def _scenario_path(arg):
    if os.path.exists(arg):
        return arg
    bundled = simlab.bundled_scenario_path(arg)
    if os.path.exists(bundled):
        return bundled
    raise CliError(f"scenario file not found: {arg}", 2)


def cmd_simulate(args):
    path = _scenario_path(args.scenario)
    try:
        scenarios = simlab.load_scenarios(path)
    except simlab.ScenarioError as exc:
        raise CliError(f"{path}: {exc}", 1) from None
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", 2) from None
    run = simlab.simulate(scenarios, seed=args.seed, workers=args.workers)
    try:
        os.makedirs(args.out, exist_ok=True)
        simlab.write_records(run.records, os.path.join(args.out, "records.csv"), timing=args.timing)
        simlab.write_aggregate(run.rows, os.path.join(args.out, "aggregate.csv"))
        table = simlab.markdown_table(run.rows, run.scenarios)
        with open(os.path.join(args.out, "table.md"), "w") as fh:
            fh.write(table)
    except OSError as exc:
        raise CliError(f"cannot write to {args.out}: {exc.strerror}", 2) from None
    sys.stdout.write(table)
    return 0


def cmd_check(args):
    results = selfcheck.run_all()
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"failed: {', '.join(failed)}")
        return 1
    print(f"all {len(results)} checks passed")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="gmleb", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit the NPMLE mixing distribution by EM")
    f.add_argument("input", help="file of newline-delimited observations")
    f.add_argument("--grid", choices=("paper", "certified"), default="paper")
    f.add_argument("--iters", type=int, default=npmle.DEFAULT_EM_ITERATIONS)
    f.add_argument("--stop", choices=("fixed", "certified"), default="fixed")
    f.add_argument("--out", help="output prefix (default: input path without extension)")
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("estimate", help="estimate the mean vector")
    e.add_argument("input")
    e.add_argument("--estimator", required=True, choices=estimators.KINDS)
    e.add_argument("--q", type=float, help="FDR level (fdr only, default 0.1)")
    e.add_argument("--truth", help="true means (oracle only)")
    e.add_argument("--grid", choices=("paper", "certified"), default="paper")
    e.add_argument("--stop", choices=("fixed", "certified"), default="fixed")
    e.add_argument("--iters", type=int, default=npmle.DEFAULT_EM_ITERATIONS)
    e.add_argument("--kappa", type=float, default=0.5)
    e.add_argument("--target", choices=("mean", "origin"), default="mean",
                   help="James-Stein shrinkage target")
    e.add_argument("--out", help="output file (default: stdout)")
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("simulate", help="run a Monte Carlo scenario file")
    s.add_argument("--scenario", required=True,
                   help="scenario JSON path or bundled name (table1..table4)")
    s.add_argument("--seed", type=int, help="base seed (overrides the file)")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--workers", type=int, help="worker processes (default: $GMLEB_THREADS or 1)")
    s.add_argument("--timing", action="store_true",
                   help="record wall times (output is then not byte-reproducible)")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("check", help="run the numerical invariant suite")
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"gmleb {args.command}: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
