"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 validation or simulation failure.
"""

from __future__ import annotations

import argparse
import sys
import warnings

import numpy as np

from .errors import EnergyGraphError
from .graph import Graph, validate
from .io import (
    REPORT_KINDS,
    ProblemDefinition,
    export_dot,
    export_equations,
    load,
    load_model,
    read_signals,
    render_report,
    save,
    write_history,
    write_linear_model,
    write_trajectory,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from None


def _write(text, out):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _graph_of(model):
    """The graph behind a Graph or StitchedSystem."""
    return model if isinstance(model, Graph) else model.graph


def cmd_validate(args):
    model = load_model(args.model)
    g = _graph_of(model)
    report = validate(g, require_initial_conditions=args.strict)
    print(f"{g.name}: {report}")
    return 0 if report.ok else 2


def cmd_report(args):
    g = _graph_of(load_model(args.model))
    _write(render_report(g, args.kind), args.output)
    if args.figure:
        from .io.plotting import plot_graph

        plot_graph(g, args.figure)
    return 0


def cmd_draw(args):
    g = _graph_of(load_model(args.model))
    _write(export_dot(g), args.output)
    if args.figure:
        from .io.plotting import plot_graph

        plot_graph(g, args.figure)
    return 0


def cmd_simulate(args):
    from .simulate import assemble, simulate

    sys_ = assemble(load_model(args.model))
    schedule = read_signals(args.signals) if args.signals else None
    x0 = np.array(args.x0) if args.x0 is not None else None
    traj = simulate(sys_, x0=x0, schedule=schedule, t_span=(args.t_start, args.t_final), dt=args.dt)
    if args.output:
        write_trajectory(traj, args.output)
    else:
        from .io.csvio import fmt, trajectory_header

        print(",".join(trajectory_header(traj)))
        row = np.concatenate([[traj.times[-1]], traj.states[-1], traj.inputs[-1], traj.flows[-1]])
        print(",".join(fmt(v) for v in row))
    if args.figure:
        from .io.plotting import plot_trajectory

        plot_trajectory(traj, args.figure)
    return 0


def cmd_linearize(args):
    from .analysis import linearize
    from .simulate import assemble

    sys_ = assemble(load_model(args.model))
    x0 = np.array(args.x0) if args.x0 is not None else sys_.x0
    if np.any(np.isnan(x0)):
        raise EnergyGraphError("operating point has unassigned states; pass --x0")
    lm = linearize(sys_, x0, args.u0, args.d0)
    if args.output:
        write_linear_model(lm, args.output)
    else:
        np.set_printoptions(precision=17)
        print(f"states: {', '.join(lm.state_names)}")
        print(f"inputs: {', '.join(lm.input_names)}")
        print(f"A =\n{lm.A}\nB =\n{lm.B}\nZ =\n{lm.Z}")
    return 0


def cmd_export_eqs(args):
    g = _graph_of(load_model(args.model))
    _write(export_equations(g, args.substitute), args.output)
    return 0


def cmd_combine(args):
    model = load_model(args.system)
    if not isinstance(model, Graph):
        raise EnergyGraphError("stitched systems cannot be flattened into a single component file")
    save(model, args.output)
    print(f"wrote {args.output}: {len(model.vertices)} vertices, {len(model.edges)} edges, {len(model.inputs)} inputs")
    return 0


def cmd_optimize(args):
    from .analysis import optimize

    obj = load(args.problem)
    if not isinstance(obj, ProblemDefinition):
        raise EnergyGraphError(f"'{args.problem}' is not a problem file")
    problem = obj.build()
    result = optimize(problem, seed=args.seed, budget=args.budget)
    names = [v.name for v in problem.theta] + [f"phi{k + 1}" for k in range(len(problem.phi_bounds))]
    if args.output:
        write_history(result, args.output, names)
    genes = list(result.theta) + list(result.phi)
    print("best: J=" + format(result.J, ".17g") + "".join(f", {n}={v:.17g}" for n, v in zip(names, genes)))
    if args.figure:
        from .io.plotting import plot_history

        plot_history(result, args.figure)
    return 0


def build_parser():
    p = _Parser(prog="energygraph", description="Graph-based energy system modeling")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("validate", help="check a model file")
    s.add_argument("model")
    s.add_argument("--strict", action="store_true", help="require initial conditions")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("report", help="print tabular model reports")
    s.add_argument("model")
    s.add_argument("--kind", choices=REPORT_KINDS, default="full")
    s.add_argument("-o", "--output", help="write the report to a file")
    s.add_argument("--figure", help="render a graph figure (png/pdf/svg)")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("draw", help="export a DOT drawing")
    s.add_argument("model")
    s.add_argument("-o", "--output", help="DOT output file")
    s.add_argument("--figure", help="also render a matplotlib figure")
    s.set_defaults(func=cmd_draw)

    s = sub.add_parser("simulate", help="simulate a model and write its trajectory")
    s.add_argument("model")
    s.add_argument("--t-final", type=float, required=True)
    s.add_argument("--t-start", type=float, default=0.0)
    s.add_argument("--dt", type=float, required=True)
    s.add_argument("--signals", help="CSV with time column and input/disturbance columns")
    s.add_argument("--x0", type=_floats, help="initial state, comma-separated")
    s.add_argument("-o", "--output", help="trajectory CSV")
    s.add_argument("--figure", help="render state histories")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("linearize", help="linearize about an operating point")
    s.add_argument("model")
    s.add_argument("--x0", type=_floats)
    s.add_argument("--u0", type=_floats)
    s.add_argument("--d0", type=_floats)
    s.add_argument("-o", "--output", help="CSV (block,row,col,value)")
    s.set_defaults(func=cmd_linearize)

    s = sub.add_parser("export-eqs", help="print the conservation equations")
    s.add_argument("model")
    s.add_argument("--substitute", action="store_true", help="substitute non-design parameter values")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_export_eqs)

    s = sub.add_parser("combine", help="build a system file into one component model")
    s.add_argument("system")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_combine)

    s = sub.add_parser("optimize", help="run the genetic design search")
    s.add_argument("problem")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--budget", type=int, default=800)
    s.add_argument("-o", "--output", help="history CSV")
    s.add_argument("--figure", help="render the convergence history")
    s.set_defaults(func=cmd_optimize)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        with warnings.catch_warnings():
            if not sys.warnoptions:
                warnings.simplefilter("default")
            return args.func(args)
    except EnergyGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
