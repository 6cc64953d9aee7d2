"""Command line front end.

    curvqhd run <scenario-file> [--seed N] [--out-dir DIR] [--workers N] [--tolerance-scale X]
    curvqhd validate <scenario-file>
    curvqhd suite <name> [--seed N] [--out-dir DIR] [--workers N] [--tolerance-scale X]

Exit status: 0 when every check passes, 1 when a check fails, 2 for an
invalid scenario or unknown suite.
"""
from __future__ import annotations

import argparse
import sys

from . import scenario as sc
from . import suites
from .errors import CurvQHDError


def _common(p):
    p.add_argument("--seed", type=int, default=None, help="override the random seed")
    p.add_argument("--out-dir", default=None, help="directory for CSV artifacts and the manifest")
    p.add_argument("--workers", type=int, default=None, help="threads for walker ensembles")
    p.add_argument("--tolerance-scale", type=float, default=None, help="multiply every check bound")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="curvqhd", description="Curved-space quantum hydrodynamics toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="execute a scenario file")
    r.add_argument("scenario")
    _common(r)
    v = sub.add_parser("validate", help="parse a scenario file and echo it with defaults")
    v.add_argument("scenario")
    s = sub.add_parser("suite", help="run a named validation suite")
    s.add_argument("name", choices=list(suites.SUITES) + ["quick", "acceptance"])
    _common(s)
    return p


def _overrides(args) -> dict:
    out = {}
    if args.seed is not None:
        out["run.seed"] = args.seed
    if args.out_dir is not None:
        out["run.out_dir"] = args.out_dir
    if args.workers is not None:
        out["run.workers"] = args.workers
    if args.tolerance_scale is not None:
        out["run.tolerance_scale"] = args.tolerance_scale
    return out


def _check_flags(args):
    if args.seed is not None and args.seed < 0:
        raise CurvQHDError("--seed must be >= 0")
    if args.workers is not None and args.workers < 1:
        raise CurvQHDError("--workers must be >= 1")
    if args.tolerance_scale is not None and not args.tolerance_scale > 0:
        raise CurvQHDError("--tolerance-scale must be > 0")


def _report(result, out=None):
    out = sys.stdout if out is None else out
    for c in result.checks:
        print(c.line(), file=out)
    print(f"{'OK' if result.status == 0 else 'FAILED'}: manifest at {result.manifest}", file=out)


def main(argv=None) -> int:
    from . import runner

    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            s = sc.load(args.scenario)
            sys.stdout.write(sc.echo(s))
            return 0
        _check_flags(args)
        if args.command == "run":
            s = sc.load(args.scenario)
            ov = _overrides(args)
            s = sc.Scenario({**s.values, **ov}, s.given | frozenset(ov))
            result = runner.run(s)
        else:
            result = runner.run_suite(args.name, args.out_dir or f"suite-{args.name}",
                                      seed=args.seed or 0, workers=args.workers or 1,
                                      tolerance_scale=args.tolerance_scale or 1.0)
    except sc.ScenarioError as exc:
        print(f"invalid scenario {args.scenario}:\n{exc}", file=sys.stderr)
        return 2
    except (CurvQHDError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _report(result)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
