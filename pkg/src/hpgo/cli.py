"""Command line entry point: ``hpgo {simulate,optimize,analyze,evaluate,pipeline}``.

Exit codes: 0 success, 1 usage, 2 input format, 3 solver failure,
4 feasibility not globally consistent (``analyze --strict``).
"""

from __future__ import annotations

import argparse
import datetime as _dt
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import feasibility, io, sim
from .eval import AteStats, Trajectory, align_first_k, associate, ate
from .graph import PoseGraph
from .solver import (
    KernelKind,
    Mode,
    RobustKernel,
    SolveReport,
    SolverConfig,
    SolverError,
    optimize,
)

EXIT_OK, EXIT_USAGE, EXIT_FORMAT, EXIT_SOLVER, EXIT_UNDERCONSTRAINED = 0, 1, 2, 3, 4
OUT_ENV = "HPGO_OUT"
METHODS = ("HPGO", "NO-PGO", "SPGO")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class PipelineResult:
    name: str
    ate: dict[str, AteStats]
    verdict: feasibility.Verdict
    nullity: int
    reports: dict[str, SolveReport] = field(default_factory=dict)
    files: dict[str, Path] = field(default_factory=dict)


def _header(args, command: str) -> str | None:
    if getattr(args, "no_timestamp", False):
        return None
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return f"hpgo {command} {stamp}"


def _out_dir(args, default: str) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUT_ENV, "out")) / default


def _solver_config(args, mode: Mode) -> SolverConfig:
    kernel = RobustKernel(KernelKind(args.kernel), args.huber_delta)
    return SolverConfig(max_iterations=args.max_iters, kernel=kernel, mode=mode)


def _spec(args) -> sim.ScenarioSpec:
    if args.spec:
        return io.read_scenario(io.read_text(args.spec))
    return sim.preset(args.preset)


def run_method(graph: PoseGraph, method: str, config: SolverConfig | None = None):
    """Return ``(solved graph copy, report or None)`` for NO-PGO / SPGO / HPGO."""
    g = graph.copy()
    method = method.upper().replace("_", "-")
    if method in ("NO-PGO", "NOPGO"):
        g.initialize_by_concatenation()
        return g, None
    mode = Mode.SPGO if method == "SPGO" else Mode.HPGO
    return g, optimize(g, replace(config or SolverConfig(), mode=mode))


def run_pipeline(spec: sim.ScenarioSpec, out_dir=None, seed: int = 0,
                 config: SolverConfig | None = None, align_k: int = 20,
                 rank_threshold: float = feasibility.DEFAULT_THRESHOLD,
                 header: str | None = None, deterministic: bool = False) -> PipelineResult:
    """Simulate, run the three methods, check feasibility and score everything."""
    out = sim.generate(spec, seed)
    gt = out.ground_truth
    stats: dict[str, AteStats] = {}
    reports: dict[str, SolveReport] = {}
    trajs: dict[str, Trajectory] = {}
    solved: dict[str, PoseGraph] = {}
    for method in METHODS:
        g, rep = run_method(out.graph, method, config)
        solved[method] = g
        if rep is not None:
            reports[method] = rep
        traj = io.trajectory_from_graph(g, gt.timestamps)
        trajs[method] = traj
        stats[method] = ate(align_first_k(traj, gt, align_k), gt)
    report = feasibility.analyze_graph(solved["HPGO"], threshold=rank_threshold)
    result = PipelineResult(spec.name, stats, report.verdict, report.nullity, reports)
    if out_dir is None:
        return result

    d = Path(out_dir)
    files = result.files
    files["scenario"] = io.write_text(d / "scenario.cfg", io.write_scenario(spec))
    files["groundtruth"] = io.write_text(d / "groundtruth.txt", io.write_trajectory(gt, header))
    files["graph"] = io.write_text(d / "graph.txt", io.serialize_graph(out.graph, header))
    for method, traj in trajs.items():
        key = method.lower().replace("-", "")
        files[key] = io.write_text(d / f"{key}.txt", io.write_trajectory(traj, header))
    for method, rep in reports.items():
        body = rep.to_dict()
        if deterministic:
            body["wall_time"] = None
        key = method.lower()
        files[f"{key}_report"] = io.write_text(d / f"{key}_report.json", io.dump_json(body))
    files["feasibility"] = io.write_text(d / "feasibility.json", io.dump_json(report.to_dict()))
    files["ate"] = io.write_text(
        d / "ate.json", io.dump_json({m: s.to_dict() for m, s in stats.items()}))
    files["table"] = io.write_text(d / "table.txt", format_table({spec.name: stats}))
    files["csv"] = io.write_text(d / "trajectories.csv", _plot_csv(gt, trajs, align_k))
    return result


def _plot_csv(gt: Trajectory, trajs: dict[str, Trajectory], align_k: int = 20) -> str:
    rows = ["method,index,x,y,z"]
    aligned = {"GT": gt} | {m: align_first_k(t, gt, align_k) for m, t in trajs.items()}
    for method, traj in aligned.items():
        for k, p in enumerate(traj.positions):
            rows.append(f"{method},{k},{io.fmt(p[0])},{io.fmt(p[1])},{io.fmt(p[2])}")
    return "\n".join(rows) + "\n"


def format_table(results: dict[str, dict[str, AteStats]]) -> str:
    head = f"{'Dataset':<10} {'Method':<7} " + " ".join(f"{c:>11}" for c in AteStats.COLUMNS)
    lines = [head, "-" * len(head)]
    for name, stats in results.items():
        for method in METHODS:
            if method not in stats:
                continue
            vals = " ".join(f"{v:>11.3e}" if v < 1e-3 else f"{v:>11.3f}"
                            for v in stats[method].row())
            lines.append(f"{name:<10} {method:<7} {vals}")
    return "\n".join(lines) + "\n"


def cmd_simulate(args) -> int:
    spec = _spec(args)
    out = sim.generate(spec, args.seed)
    d = _out_dir(args, spec.name)
    header = _header(args, "simulate")
    io.write_text(d / "scenario.cfg", io.write_scenario(spec))
    io.write_text(d / "groundtruth.txt", io.write_trajectory(out.ground_truth, header))
    io.write_text(d / "graph.txt", io.serialize_graph(out.graph, header))
    print(f"wrote {len(out.graph)} nodes, {len(out.graph.edges)} edges to {d}")
    return EXIT_OK


def cmd_optimize(args) -> int:
    graph = io.parse_graph(io.read_text(args.graph))
    method = {"nopgo": "NO-PGO", "spgo": "SPGO", "hpgo": "HPGO"}[args.mode]
    mode = Mode.SPGO if args.mode == "spgo" else Mode.HPGO
    try:
        solved, report = run_method(graph, method, _solver_config(args, mode))
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    out = Path(args.out) if args.out else _out_dir(args, "optimize") / f"{args.mode}.txt"
    header = _header(args, f"optimize --mode {args.mode}")
    io.write_text(out, io.write_trajectory(io.trajectory_from_graph(solved), header))
    if args.out_graph:
        io.write_text(args.out_graph, io.serialize_graph(solved, header))
    body = {"mode": args.mode, "iterations": 0, "reason": "concatenation", "converged": True}
    if report is not None:
        body = {"mode": args.mode} | report.to_dict()
        if args.no_timestamp:
            body["wall_time"] = None
    report_path = Path(args.report) if args.report else out.with_suffix(".report.json")
    io.write_text(report_path, io.dump_json(body))
    print(f"{args.mode}: {body['reason']} after {body['iterations']} iterations"
          + (f", final cost {report.final_cost:.3e}" if report else ""))
    if report is not None and not report.converged:
        return EXIT_SOLVER
    return EXIT_OK


def cmd_analyze(args) -> int:
    graph = io.parse_graph(io.read_text(args.graph))
    positions = None
    if args.positions == "groundtruth":
        if not args.reference:
            print("--positions groundtruth needs --reference", file=sys.stderr)
            return EXIT_USAGE
        ref = io.read_trajectory(io.read_text(args.reference))
        if len(ref) != len(graph):
            print("reference length does not match the graph", file=sys.stderr)
            return EXIT_FORMAT
        positions = ref.positions
    elif args.positions == "optimized":
        try:
            graph, _ = run_method(graph, "HPGO", _solver_config(args, Mode.HPGO))
        except SolverError as exc:
            print(f"solver failure: {exc}", file=sys.stderr)
            return EXIT_SOLVER
    report = feasibility.analyze_graph(graph, positions, args.rank_threshold, args.merge_radius)
    text = io.dump_json(report.to_dict())
    if args.out:
        io.write_text(args.out, text)
    if report.verdict is feasibility.Verdict.NO_LOOP:
        print("NoLoop: no bar construct (no critical node lies on a loop)")
    else:
        sv = " ".join(f"{s:.3e}" for s in report.singular_values)
        print(f"{report.verdict.value}: nullity {report.nullity}, "
              f"{len(report.critical_nodes)} critical nodes, {len(report.bars)} bars")
        print(f"singular values: {sv}")
    if args.strict and not report.consistent:
        return EXIT_UNDERCONSTRAINED
    return EXIT_OK


def cmd_evaluate(args) -> int:
    est = io.read_trajectory(io.read_text(args.estimate))
    ref = io.read_trajectory(io.read_text(args.reference))
    if args.associate == "timestamp":
        est, ref = associate(est, ref, args.max_dt)
    elif len(est) != len(ref):
        print(f"association error: {len(est)} estimate poses vs {len(ref)} reference poses",
              file=sys.stderr)
        return EXIT_FORMAT
    stats = ate(align_first_k(est, ref, args.align_k), ref)
    print(" ".join(f"{c:>11}" for c in AteStats.COLUMNS))
    print(" ".join(f"{v:>11.6g}" for v in stats.row()))
    if args.out:
        io.write_text(args.out, io.dump_json(stats.to_dict()))
    return EXIT_OK


def cmd_pipeline(args) -> int:
    spec = _spec(args)
    d = _out_dir(args, spec.name)
    try:
        result = run_pipeline(spec, d, args.seed, _solver_config(args, Mode.HPGO), args.align_k,
                              args.rank_threshold, _header(args, "pipeline"), args.no_timestamp)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    sys.stdout.write(format_table({spec.name: result.ate}))
    print(f"feasibility: {result.verdict.value} (nullity {result.nullity})")
    print(f"artifacts in {d}")
    return EXIT_OK


def _scenario_flags(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=sim.PRESETS, default="triangle")
    src.add_argument("--spec", help="scenario config file (key = value lines)")
    p.add_argument("--seed", type=int, default=0)


def _solver_flags(p):
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--kernel", choices=[k.value for k in KernelKind], default="none")
    p.add_argument("--huber-delta", type=float, default=1.0)


def _common(p):
    p.add_argument("--out", help=f"output path (default under ${OUT_ENV} or ./out)")
    p.add_argument("--no-timestamp", action="store_true",
                   help="omit the timestamp header and wall times for byte-identical output")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hpgo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a scenario graph and ground truth")
    _scenario_flags(p)
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", help="optimize a graph file")
    p.add_argument("graph")
    p.add_argument("--mode", choices=("nopgo", "spgo", "hpgo"), default="hpgo")
    _solver_flags(p)
    _common(p)
    p.add_argument("--report", help="convergence report path (JSON)")
    p.add_argument("--out-graph", help="also write the optimized graph")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("analyze", help="global scale feasibility of a graph")
    p.add_argument("graph")
    p.add_argument("--positions", choices=("optimized", "groundtruth", "vertices"),
                   default="optimized")
    p.add_argument("--reference", help="ground-truth trajectory for --positions groundtruth")
    p.add_argument("--rank-threshold", type=float, default=feasibility.DEFAULT_THRESHOLD)
    p.add_argument("--merge-radius", type=float, default=feasibility.DEFAULT_MERGE_RADIUS)
    p.add_argument("--strict", action="store_true",
                   help=f"exit {EXIT_UNDERCONSTRAINED} unless globally consistent")
    _solver_flags(p)
    _common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("evaluate", help="ATE of an estimate against a reference")
    p.add_argument("estimate")
    p.add_argument("reference")
    p.add_argument("--align-k", type=int, default=20)
    p.add_argument("--associate", choices=("index", "timestamp"), default="index")
    p.add_argument("--max-dt", type=float, default=0.02)
    _common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="simulate, optimize, analyze and evaluate")
    _scenario_flags(p)
    _solver_flags(p)
    p.add_argument("--align-k", type=int, default=20)
    p.add_argument("--rank-threshold", type=float, default=feasibility.DEFAULT_THRESHOLD)
    _common(p)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "align_k", 20) < 3:
        parser.error("--align-k must be >= 3")
    try:
        return args.func(args)
    except io.FormatError as exc:
        print(f"input format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as exc:
        print(f"cannot read input: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
