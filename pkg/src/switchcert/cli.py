"""Command-line interface: one subcommand per pipeline stage.

``validate``, ``measure``, ``cylinder``, ``lift``, ``bound``, ``simulate``
and ``certify`` each take a system-description JSON file.  ``certify``
exits 0 when stability is certified, 2 when the analysis is inconclusive,
and 1 on any error; the other subcommands use 0/1.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from .description import describe_system, parse_system
from .errors import SwitchcertError
from .graph import LabelWord, NodeDistribution, all_words, cylinder_measure, \
    invariant_measure, is_strongly_connected
from .lifts import PathLift, StepLift, path_lift, step_lift
from .montecarlo import empirical_cylinder_check, estimate_lyapunov_exponent
from .report import emit_report, exit_code, run_certify
from .util import canonical_json


def _add_input(p):
    p.add_argument("file", help="system description JSON file")


def _add_format(p, choices=("json", "csv", "text")):
    p.add_argument("--format", choices=list(choices), default="text",
                   help="output format (default: text)")


def _emit(args, data: bytes) -> None:
    out = getattr(args, "output", None)
    if out:
        with open(out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()


def _rows_to_csv(header, rows) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue().encode()


# -- subcommand handlers -----------------------------------------------------


def _cmd_validate(args) -> int:
    desc = parse_system(args.file)
    system = desc.system()
    g = system.graph
    info = {
        "digest": desc.digest,
        "nodes": len(g.nodes),
        "edges": len(g.edges),
        "alphabet": g.alphabet_size,
        "dimension": system.dimension,
        "strongly_connected": is_strongly_connected(g),
    }
    if args.format == "json":
        _emit(args, canonical_json(info))
    else:
        lines = [f"{key}: {value}" for key, value in info.items()]
        _emit(args, ("\n".join(lines) + "\n").encode())
    return 0


def _cmd_measure(args) -> int:
    desc = parse_system(args.file)
    g = desc.graph()
    xi = invariant_measure(g)
    pairs = [(node, xi.of(node)) for node in g.nodes]
    if args.format == "json":
        _emit(args, canonical_json({node: w for node, w in pairs}))
    elif args.format == "csv":
        _emit(args, _rows_to_csv(["node", "weight"],
                                 [(node, repr(w)) for node, w in pairs]))
    else:
        _emit(args, ("\n".join(f"{node}: {w:.12f}" for node, w in pairs)
                     + "\n").encode())
    return 0


def _cmd_cylinder(args) -> int:
    desc = parse_system(args.file)
    g = desc.graph()
    xi = invariant_measure(g)
    if args.word:
        word = LabelWord.parse(args.word)
        rows = [(str(word), cylinder_measure(g, xi, word), None, None)]
    elif args.trials:
        rows = [(str(r.word), r.analytic, r.empirical, r.z)
                for r in empirical_cylinder_check(g, xi, args.length,
                                                  args.trials, args.seed)]
    else:
        rows = [(str(w), cylinder_measure(g, xi, w), None, None)
                for w in all_words(g.alphabet_size, args.length)]
    if args.format == "json":
        payload = [{"word": w, "measure": m,
                    **({"empirical": e, "z": z} if e is not None else {})}
                   for w, m, e, z in rows]
        _emit(args, canonical_json(payload))
    elif args.format == "csv":
        header = ["word", "measure"] + (["empirical", "z"] if args.trials
                                        and not args.word else [])
        out = [[w, repr(m)] + ([repr(e), repr(z)] if e is not None else [])
               for w, m, e, z in rows]
        _emit(args, _rows_to_csv(header, out))
    else:
        lines = []
        for w, m, e, z in rows:
            extra = f"  empirical={e:.6f}  z={z:+.2f}" if e is not None else ""
            lines.append(f"{w}: {m:.10f}{extra}")
        _emit(args, ("\n".join(lines) + "\n").encode())
    return 0


def _cmd_lift(args) -> int:
    desc = parse_system(args.file)
    system = desc.system()
    if (args.step is None) == (args.path is None):
        raise SystemExit("lift: give exactly one of --step or --path")
    if args.step is not None:
        lift = step_lift(system, args.step)
    else:
        lift = path_lift(system, args.path)
    out = describe_system(lift.system).to_dict()
    if isinstance(lift, StepLift):
        out["lift_meta"] = {
            "kind": "step",
            "parameter": lift.K,
            "labels": {str(i + 1): str(w) for i, w in enumerate(lift.words)},
        }
    else:
        out["lift_meta"] = {
            "kind": "path",
            "parameter": lift.R,
            "nodes": {node: ({"start": p.start, "end": p.end} if p else
                             {"start": node, "end": node})
                      for node, p in lift.node_paths.items()},
        }
    _emit(args, canonical_json(out))
    return 0


def _steps_paths(args):
    steps = tuple(args.step) if args.step else ()
    paths = tuple(args.path) if args.path else ()
    if not steps and not paths:
        steps = (1,)
    return steps, paths


def _cmd_bound(args) -> int:
    desc = parse_system(args.file)
    steps, paths = _steps_paths(args)
    report = run_certify(desc, templates=(args.template,), steps=steps,
                         paths=paths, monte_carlo=False, tol=args.tol)
    _emit(args, emit_report(report, args.format, no_meta=args.no_meta))
    if args.plot:
        from .plots import render_report_figures
        render_report_figures(report, args.plot)
    return 0


def _cmd_simulate(args) -> int:
    desc = parse_system(args.file)
    system = desc.system()
    g = system.graph
    defaults = desc.defaults or {}
    horizon = args.horizon if args.horizon is not None else defaults.get("horizon", 10_000)
    trials = args.trials if args.trials is not None else defaults.get("trials", 100)
    seed = args.seed if args.seed is not None else defaults.get("seed", 0)
    if args.dist == "invariant":
        xi = invariant_measure(g)
    elif args.dist == "uniform":
        xi = NodeDistribution.uniform(g)
    else:
        xi = desc.distribution(g)
        if xi is None:
            raise SystemExit("simulate: --dist file needs an "
                             "initial_distribution block in the description")
    est = estimate_lyapunov_exponent(system, xi, T=int(horizon), N=int(trials),
                                     seed=int(seed),
                                     keep_trajectories=8 if args.plot else 0)
    if args.format == "json":
        _emit(args, canonical_json(est.to_dict()))
    elif args.format == "csv":
        _emit(args, _rows_to_csv(
            ["mean", "sd", "half_width", "trials", "horizon", "seed",
             "radius", "degenerate"],
            [[repr(est.mean), repr(est.sd), repr(est.half_width), est.trials,
              est.horizon, est.seed, repr(est.radius), est.degenerate]]))
    else:
        lo, hi = est.interval
        text = (f"lambda = {est.mean:.6f} +/- {est.half_width:.6f} "
                f"(95% CI [{lo:.6f}, {hi:.6f}], sd {est.sd:.6f})\n"
                f"growth factor per step: {est.radius:.6f}\n"
                f"trials {est.trials}, horizon {est.horizon}, seed {est.seed}"
                + (", degenerate products clamped\n" if est.degenerate else "\n"))
        _emit(args, text.encode())
    if args.plot:
        from .plots import trajectory_figure
        from pathlib import Path
        Path(args.plot).mkdir(parents=True, exist_ok=True)
        trajectory_figure(est, Path(args.plot) / "trajectories.png")
    return 0


def _cmd_certify(args) -> int:
    desc = parse_system(args.file)
    steps, paths = _steps_paths(args)
    report = run_certify(desc, templates=(args.template,), steps=steps,
                         paths=paths, horizon=args.horizon,
                         trials=args.trials, seed=args.seed, tol=args.tol)
    _emit(args, emit_report(report, args.format, no_meta=args.no_meta))
    if args.plot:
        from .plots import render_report_figures
        render_report_figures(report, args.plot)
    return exit_code(report)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="switchcert",
        description="almost-sure stability certification for "
                    "graph-constrained switched linear systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and validate a description")
    _add_input(p)
    _add_format(p, ("json", "text"))
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("measure", help="invariant node measure")
    _add_input(p)
    _add_format(p)
    p.set_defaults(func=_cmd_measure)

    p = sub.add_parser("cylinder",
                       help="analytic (and optionally empirical) word measures")
    _add_input(p)
    p.add_argument("--length", type=int, default=2,
                   help="word length to tabulate (default 2)")
    p.add_argument("--word", help="single word, e.g. '1 2' (oldest first)")
    p.add_argument("--trials", type=int, default=0,
                   help="sample this many paths for an empirical comparison")
    p.add_argument("--seed", type=int, default=0)
    _add_format(p)
    p.set_defaults(func=_cmd_cylinder)

    p = sub.add_parser("lift", help="emit a lifted system description")
    _add_input(p)
    p.add_argument("--step", type=int, help="step lift of this length")
    p.add_argument("--path", type=int, help="path lift of this degree")
    p.add_argument("--output", help="write to this file instead of stdout")
    p.set_defaults(func=_cmd_lift)

    p = sub.add_parser("bound", help="certified decay bounds over lifts")
    _add_input(p)
    p.add_argument("--template", choices=["copositive", "quadratic"],
                   default="copositive")
    p.add_argument("--step", type=int, nargs="+", metavar="K",
                   help="step lift lengths (default: 1)")
    p.add_argument("--path", type=int, nargs="+", metavar="R",
                   help="path lift degrees")
    p.add_argument("--tol", type=float, default=1e-9,
                   help="verification tolerance (default 1e-9)")
    p.add_argument("--no-meta", action="store_true",
                   help="omit timestamp/generator metadata")
    p.add_argument("--output", help="write to this file instead of stdout")
    p.add_argument("--plot", metavar="DIR", help="render figures into DIR")
    _add_format(p)
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("simulate", help="Monte Carlo Lyapunov-exponent estimate")
    _add_input(p)
    p.add_argument("--horizon", type=int, help="steps per trial")
    p.add_argument("--trials", type=int, help="number of independent trials")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--dist", choices=["invariant", "uniform", "file"],
                   default="invariant",
                   help="initial node distribution (default: invariant)")
    p.add_argument("--output", help="write to this file instead of stdout")
    p.add_argument("--plot", metavar="DIR", help="render figures into DIR")
    _add_format(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("certify", help="full certification pipeline")
    _add_input(p)
    p.add_argument("--template", choices=["copositive", "quadratic"],
                   default="copositive")
    p.add_argument("--step", type=int, nargs="+", metavar="K",
                   help="step lift lengths (default: 1)")
    p.add_argument("--path", type=int, nargs="+", metavar="R",
                   help="path lift degrees")
    p.add_argument("--horizon", type=int, help="Monte Carlo steps per trial")
    p.add_argument("--trials", type=int, help="Monte Carlo trials")
    p.add_argument("--seed", type=int, help="Monte Carlo master seed")
    p.add_argument("--tol", type=float, default=1e-9,
                   help="verification tolerance (default 1e-9)")
    p.add_argument("--no-meta", action="store_true",
                   help="omit timestamp/generator metadata")
    p.add_argument("--output", help="write to this file instead of stdout")
    p.add_argument("--plot", metavar="DIR", help="render figures into DIR")
    _add_format(p)
    p.set_defaults(func=_cmd_certify)

    return parser


def _provenance(exc) -> str:
    tb = exc.__traceback__
    module = "switchcert"
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", "")
        if name.startswith("switchcert"):
            module = name
        tb = tb.tb_next
    return module


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SwitchcertError as exc:
        print(f"{_provenance(exc)}: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"{_provenance(exc)}: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
