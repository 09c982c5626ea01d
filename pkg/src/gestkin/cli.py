"""Command-line front end.

Subcommands: simulate (scenario from a config file), parse (landmark one
movement in a trajectory CSV), analyze (statistics from a token CSV), plan
(coupling-graph phases to onsets), demo (default scenario end to end), and
exp54 (the three-explanation experiment). Exit codes: 0 success, 2 config
problem, 3 data problem.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness, landmarks, planner, plots, stats
from .dynamics import read_trajectory_csv

EXIT_CONFIG = 2
EXIT_DATA = 3

_DIRECTIONS = {
    "inc": "increasing",
    "increasing": "increasing",
    "dec": "decreasing",
    "decreasing": "decreasing",
}


def _window(text: str) -> tuple[float, float]:
    try:
        a, b = text.split(":")
        return float(a), float(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected start:end in ms, got {text!r}")


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _print_analysis(analysis: dict) -> None:
    for cond, cls in analysis["classification"].items():
        if cls["label"] == "DEGENERATE":
            print(f"{cond}: DEGENERATE ({cls['note']})")
        else:
            print(
                f"{cond}: {cls['label']} (slope {cls['slope']:.3f}, "
                f"r2 {cls['r2']:.3f}, p {cls['p_perm']:.4f}, n {cls['n']})"
            )
    contrasts = analysis["contrasts"]
    if "lag_ms" in contrasts:
        c = contrasts["lag_ms"]
        print(f"lag contrast (ASSIMILATORY - UNDERLYING): {c['difference']:.2f} ms, p {c['p_perm']:.4f}")
    if "tb_pos_mm" in contrasts:
        mm = contrasts["tb_pos_mm"]["difference"]
        z = contrasts.get("tb_pos_z", {}).get("difference")
        z_text = f" ({z:.3f} z)" if z is not None else ""
        print(f"TB contrast at palatal onset: {mm:.3f} mm{z_text}")
    ex = analysis["exclusions"]
    for measure in ("g1_duration", "lag"):
        e = ex[measure]
        print(
            f"outliers removed, {measure}: {e['count']} ({100 * e['fraction']:.2f}%; "
            f"reference {100 * e['reference_fraction']:.1f}%)"
        )
    pf = ex["parse_failure"]
    print(f"parse failures: {pf['count']} ({100 * pf['fraction']:.2f}%)")
    if analysis["degenerate"]:
        for note in analysis["degenerate"]:
            print(f"degenerate: {note}")


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        config = harness.load_config(args.config)
    except (OSError, ValueError) as exc:
        return _fail(EXIT_CONFIG, str(exc))
    try:
        report = harness.run_scenario(config, args.out, n_perm=args.n_perm)
    except (RuntimeError, ValueError) as exc:
        return _fail(EXIT_DATA, str(exc))
    _print_analysis(report["analysis"])
    for name, path in report["files"].items():
        print(f"{name}: {path}")
    return 0


def cmd_parse(args: argparse.Namespace) -> int:
    try:
        trajectories = read_trajectory_csv(args.trajectory)
    except (OSError, ValueError) as exc:
        return _fail(EXIT_DATA, str(exc))
    if args.channel not in trajectories:
        return _fail(
            EXIT_DATA,
            f"channel {args.channel!r} not in {sorted(trajectories)} of {args.trajectory}",
        )
    try:
        marks = landmarks.find_gesture(
            trajectories[args.channel],
            args.window_ms,
            _DIRECTIONS[args.direction],
            threshold=args.threshold,
        )
    except (landmarks.ParseError, ValueError) as exc:
        return _fail(EXIT_DATA, str(exc))
    print("channel,onset_ms,target_ms,release_ms,offset_ms,pv_to,pv_away")
    print(
        f"{marks.channel},{marks.onset_ms:.3f},{marks.target_ms:.3f},"
        f"{marks.release_ms:.3f},{marks.offset_ms:.3f},"
        f"{marks.peak_vel_to_mms:.3f},{marks.peak_vel_away_mms:.3f}"
    )
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    try:
        records = stats.read_token_csv(args.tokens)
        final, summary_rows, analysis = harness.analyze_tokens(
            records, n_perm=args.n_perm, seed=args.seed
        )
    except (OSError, ValueError) as exc:
        return _fail(EXIT_DATA, str(exc))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tokens_path = out / "tokens.csv"
    stats.write_token_csv(final, tokens_path)
    stats.write_summary_csv(summary_rows, out / "summary.csv")
    files = {
        "tokens": str(tokens_path),
        "summary": str(out / "summary.csv"),
        "report": str(out / "report.json"),
    }
    try:
        files.update(plots.emit_plots(tokens_path, out / "figures"))
    except ValueError as exc:
        return _fail(EXIT_DATA, str(exc))
    report = {"analysis": analysis, "files": files}
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    _print_analysis(analysis)
    for name, path in files.items():
        print(f"{name}: {path}")
    return 0


def cmd_plan(args: argparse.Namespace) -> int:
    try:
        graph = planner.load_graph(args.graph)
    except (OSError, ValueError) as exc:
        return _fail(EXIT_DATA, str(exc))
    if args.method == "ls":
        solution = planner.solve_phases_ls(graph)
    else:
        # deterministic asymmetric start so frustrated graphs leave saddles
        init = {node: 0.1 * k for k, node in enumerate(graph.nodes)}
        solution = planner.simulate_phases(graph, init)
        if not solution.converged:
            return _fail(EXIT_DATA, "oscillator simulation did not converge")
    onsets = planner.phases_to_onsets(solution, t_ref_ms=args.t_ref_ms)
    print("node,psi_rad,onset_ms")
    for node in graph.nodes:
        print(f"{node},{solution.phases[node]:.6f},{onsets[node]:.6f}")
    return 0


def cmd_demo(args: argparse.Namespace) -> int:
    config = harness.ScenarioConfig(seed=args.seed)
    try:
        report = harness.run_scenario(config, args.out)
        figures = plots.emit_plots(Path(args.out) / "tokens.csv", Path(args.out) / "figures")
    except (RuntimeError, ValueError) as exc:
        return _fail(EXIT_DATA, str(exc))
    _print_analysis(report["analysis"])
    for name, path in {**report["files"], **figures}.items():
        print(f"{name}: {path}")
    return 0


def cmd_exp54(args: argparse.Namespace) -> int:
    if args.config is not None:
        try:
            config = harness.load_config(args.config)
        except (OSError, ValueError) as exc:
            return _fail(EXIT_CONFIG, str(exc))
    else:
        config = harness.ScenarioConfig()
    parts = tuple(args.parts)
    if not set(parts) <= {"A", "B", "C"}:
        return _fail(EXIT_CONFIG, f"parts must be drawn from ABC, got {args.parts!r}")
    try:
        report = harness.experiment_54(config, args.out, parts=parts)
    except (RuntimeError, ValueError) as exc:
        return _fail(EXIT_DATA, str(exc))
    if "A" in report:
        a = report["A"]
        print("blend sweep (weight, lag contrast ms, tb contrast mm):")
        for w, lagc, tbc in zip(a["weights"], a["lag_contrast_ms"], a["tb_contrast_mm"]):
            print(f"  {w:g}: {lagc:+.3f} ms, {tbc:+.4f} mm")
    if "B" in report:
        cls = report["B"]["classification"]
        print(f"offset-coupled condition: {cls['label']} (slope {cls.get('slope', float('nan')):.3f})")
    if "C" in report:
        for cond, cls in report["C"]["classification"].items():
            print(f"default {cond}: {cls['label']}")
        if "lag_ms" in report["C"]["contrasts"]:
            c = report["C"]["contrasts"]["lag_ms"]
            print(f"default lag contrast: {c['difference']:.2f} ms, p {c['p_perm']:.4f}")
    print(f"report: {report['files']['report']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gestkin",
        description="Synthetic articulatory timing: simulate, parse, and analyze gesture kinematics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario from a JSON config")
    p.add_argument("--config", required=True, help="scenario config (JSON)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-perm", type=int, default=harness.N_PERM_DEFAULT)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("parse", help="landmark one movement in a trajectory CSV")
    p.add_argument("trajectory", help="trajectory CSV (t_ms plus channel columns)")
    p.add_argument("--channel", required=True)
    p.add_argument("--window-ms", required=True, type=_window, help="analysis window start:end")
    p.add_argument("--direction", required=True, choices=sorted(_DIRECTIONS))
    p.add_argument("--threshold", type=float, default=0.2)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("analyze", help="statistics and figures from a token CSV")
    p.add_argument("--tokens", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0, help="permutation seed (match the simulate seed to reproduce its report)")
    p.add_argument("--n-perm", type=int, default=harness.N_PERM_DEFAULT)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("plan", help="solve a coupling graph and print onsets")
    p.add_argument("--graph", required=True, help="coupling graph (JSON)")
    p.add_argument("--method", choices=("ls", "osc"), default="ls")
    p.add_argument("--t-ref-ms", type=float, default=0.0)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("demo", help="default scenario end to end with figures")
    p.add_argument("--out", default="demo_out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("exp54", help="blending/offset/eccentric three-part experiment")
    p.add_argument("--config", default=None, help="scenario config (JSON); defaults apply if omitted")
    p.add_argument("--out", default="exp54_out")
    p.add_argument("--parts", default="ABC", help="subset of parts to run, e.g. AB")
    p.set_defaults(func=cmd_exp54)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
