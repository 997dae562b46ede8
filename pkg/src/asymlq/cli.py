"""Command line entry point (``asymlq`` / ``python -m asymlq``).

Exit codes: 0 success, 1 validation failure, 2 solver failure, 3 IO, parse
or usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .belief_analysis import analyze_stage, decay_rows
from .best_response import run_best_response, trace_to_dict
from .errors import AsymlqError, ParseError, SolverError, ValidationError
from .experiments import (DEFAULT_THRESHOLDS, fmt, run_paper_example, run_random_suite, write_csv,
                          write_suite)
from .game_model import MODEL_SCHEMA, load_spec, validate
from .simulate import final_pair, monte_carlo_cost

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        print("model file schema:", file=sys.stderr)
        print(json.dumps(MODEL_SCHEMA, indent=2), file=sys.stderr)
        sys.exit(EXIT_IO)


def _dims(text):
    parts = [int(p) for p in text.split(",")]
    if len(parts) == 1:
        parts = parts * 5
    if len(parts) != 5 or min(parts) < 1:
        raise argparse.ArgumentTypeError("dims must be n,m1,m2,p1,p2 (or one value for all)")
    return tuple(parts)


def _floats(text):
    return [float(t) for t in text.split(",")]


def build_parser():
    p = _Parser(prog="asymlq", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="check a model file")
    v.add_argument("model")

    br = sub.add_parser("br", help="best-response dynamics")
    br_sub = br.add_subparsers(dest="br_command", required=True, parser_class=_Parser)
    run = br_sub.add_parser("run", help="run the alternating best responses")
    run.add_argument("model")
    run.add_argument("--max-k", type=int, default=10)
    run.add_argument("--tol", type=float, default=1e-6)
    run.add_argument("--out", help="write the trace JSON here instead of stdout")
    run.add_argument("--verbose", action="store_true", help="include gains and Riccati solutions")

    an = sub.add_parser("analyze", help="Gramian / decay table for one stage")
    an.add_argument("model")
    an.add_argument("--k", type=int, default=5)
    an.add_argument("--player", type=int, choices=(1, 2), default=1)
    an.add_argument("--out", help="CSV path (default stdout)")

    ex = sub.add_parser("example", help="reproduce the two-state benchmark data")
    ex.add_argument("--out", default="example_out")
    ex.add_argument("--max-k", type=int, default=10)

    su = sub.add_parser("suite", help="random-instance decay statistics")
    su.add_argument("--count", type=int, default=100)
    su.add_argument("--seed", type=int, default=0)
    su.add_argument("--dims", type=_dims, default=(1, 1, 1, 1, 1))
    su.add_argument("--iters", type=int, default=5)
    su.add_argument("--thresholds", type=_floats, default=list(DEFAULT_THRESHOLDS))
    su.add_argument("--parallelism", type=int, default=1)
    su.add_argument("--out", default="suite_out")

    si = sub.add_parser("simulate", help="Monte Carlo check of the final strategy pair")
    si.add_argument("model")
    si.add_argument("--steps", type=int, default=1_000_000)
    si.add_argument("--seed", type=int, default=0)
    si.add_argument("--burn-in", type=int, default=1000)
    si.add_argument("--max-k", type=int, default=10)
    si.add_argument("--tol", type=float, default=1e-6)
    return p


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_validate(args):
    spec = load_spec(args.model, check=False)
    report = validate(spec)
    if report.ok:
        print(f"{args.model}: ok")
        return EXIT_OK
    for v in report.violations:
        print(f"{args.model}: {v.check}: {v.message}")
    return EXIT_INVALID


def _cmd_br(args):
    spec = load_spec(args.model)
    trace = run_best_response(spec, max_k=args.max_k, tol=args.tol)
    _emit(json.dumps(trace_to_dict(trace, verbose=args.verbose), indent=2) + "\n", args.out)
    return EXIT_OK


def _cmd_analyze(args):
    spec = load_spec(args.model)
    trace = run_best_response(spec, max_k=args.k, stop_on_convergence=False)
    stage = next(s for s in trace.stages if s.player == args.player and s.k == args.k)
    analysis = analyze_stage(stage, l_grid=[])
    rows = decay_rows(analysis)
    header = list(rows[0])
    if args.out:
        write_csv(args.out, header, [[r[h] for h in header] for r in rows])
    else:
        lines = [",".join(header)]
        lines += [",".join(str(r[h]) if h == "index" else fmt(r[h]) for h in header) for r in rows]
        sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def _cmd_example(args):
    trace, manifest = run_paper_example(args.out, max_k=args.max_k)
    print(f"wrote {', '.join(manifest['files'])} and manifest.json to {args.out}; "
          f"converged at k={manifest['converged_at_k']}")
    return EXIT_OK


def _cmd_suite(args):
    stats = run_random_suite(count=args.count, seed=args.seed, dims=args.dims, iterations=args.iters,
                             thresholds=args.thresholds, parallelism=args.parallelism)
    write_suite(stats, args.out, args.seed, args.dims)
    for q, fr in stats.proportions.items():
        print(q, " ".join(f"{f:.4f}" for f in fr))
    print(f"failures: {len(stats.failures)} of {stats.instance_count}")
    return EXIT_OK


def _cmd_simulate(args):
    spec = load_spec(args.model)
    trace = run_best_response(spec, max_k=args.max_k, tol=args.tol)
    est = monte_carlo_cost(spec, trace, steps=args.steps, seed=args.seed, burn_in=args.burn_in)
    analytic = final_pair(trace)[2]
    print(json.dumps({"mean_cost": est.mean_cost, "std_error": est.std_error, "steps": est.steps,
                      "seed": est.seed, "burn_in": est.burn_in, "analytic_cost": analytic,
                      "z_score": (est.mean_cost - analytic) / est.std_error if est.std_error else None},
                     indent=2))
    return EXIT_OK


_COMMANDS = {"validate": _cmd_validate, "br": _cmd_br, "analyze": _cmd_analyze,
             "example": _cmd_example, "suite": _cmd_suite, "simulate": _cmd_simulate}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except AsymlqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
