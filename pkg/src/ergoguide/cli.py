"""Command-line interface: run trials, campaigns, reports, the live server."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .harness import (
    ProtocolSpec,
    SessionConfig,
    report_from_logs,
    run_campaign,
    run_ergonomic_trial,
    run_modality_trial,
)
from .loading import LoadSpec
from .metrics import trial_metrics
from .model import HumanModel, default_model, forward_kinematics
from .optimize import OptimizationSpec, SolverOptions, optimize_posture, reaching_posture


def _session_config(args) -> SessionConfig:
    if args.config:
        config = SessionConfig.from_file(args.config)
    else:
        config = SessionConfig()
    overrides = {}
    for name in ("modality", "agent", "seed", "out"):
        value = getattr(args, name, None)
        if value is not None:
            overrides["out_dir" if name == "out" else name] = value
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def _print(data) -> None:
    json.dump(data, sys.stdout, indent=2, default=str)
    sys.stdout.write("\n")


def cmd_run(args) -> int:
    config = _session_config(args)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.protocol == "modality":
        log = run_modality_trial(config, args.target_set)
        name = f"run_{config.modality}_{args.target_set}_seed{config.seed}.jsonl"
    else:
        log = run_ergonomic_trial(config, args.condition)
        name = f"run_{config.modality}_cond{args.condition}_seed{config.seed}.jsonl"
    path = out_dir / name
    log.save(path)
    rows = [
        dict(trial_metrics(log.segment(s)), segment=s) for s in log.segment_ids()
    ]
    _print({"log": str(path), "status": log.status, "metrics": rows})
    return 0


def cmd_campaign(args) -> int:
    config = _session_config(args)
    protocol = ProtocolSpec(
        kind="modality_test" if args.protocol == "modality" else "ergonomic_test"
    )
    result = run_campaign(
        config,
        protocol,
        n_virtual_subjects=args.subjects,
        jitter=not args.no_jitter,
    )
    _print(
        {
            "logs": len(result["logs"]),
            "trials_csv": result["trials_csv"],
            "summary_csv": result["summary_csv"],
        }
    )
    return 0


def cmd_report(args) -> int:
    paths = sorted(Path(args.logs).glob("*.jsonl")) if Path(args.logs).is_dir() else [Path(args.logs)]
    if not paths:
        print("no logs found", file=sys.stderr)
        return 1
    rows = report_from_logs(paths, args.out)
    _print({"trials": len(rows), "csv": args.out})
    return 0


def cmd_serve(args) -> int:
    from .server import serve_session

    config = _session_config(args)
    serve_session(config, port=args.port, host=args.host)
    return 0


def cmd_solve(args) -> int:
    model = default_model() if args.model is None else HumanModel.load(args.model)
    load = LoadSpec(args.mass)
    q_init = reaching_posture(model, (args.distance, args.height), load)
    spec = OptimizationSpec(solver=SolverOptions(seed=args.seed))
    q_d, report = optimize_posture(model, q_init, load, spec)
    _print(
        {
            "q_init": [round(float(v), 4) for v in q_init.angles],
            "q_desired": [round(float(v), 4) for v in q_d.angles],
            "hand_init": [round(float(v), 4) for v in forward_kinematics(model, q_init).hand],
            "hand_final": [round(float(v), 4) for v in forward_kinematics(model, q_d).hand],
            "objective_init": report.objective_init,
            "objective_final": report.objective_final,
            "feasible": report.constraints.feasible,
            "evaluations": report.evaluations,
        }
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ergoguide",
        description="Vibrotactile posture-guidance experiments without hardware.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="session config JSON file")
        p.add_argument("--modality", choices=["spot", "ramp", "pattern"])
        p.add_argument("--agent", help="agent preset: ideal | noisy | sluggish | inverting")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")

    run_p = sub.add_parser("run", help="run one trial")
    common(run_p)
    run_p.add_argument("--protocol", choices=["modality", "ergonomic"], default="modality")
    run_p.add_argument("--target-set", choices=["torso", "arm"], default="torso")
    run_p.add_argument("--condition", type=int, choices=[1, 2, 3], default=2)
    run_p.set_defaults(func=cmd_run)

    camp_p = sub.add_parser("campaign", help="run a multi-subject campaign")
    common(camp_p)
    camp_p.add_argument("--protocol", choices=["modality", "ergonomic"], default="modality")
    camp_p.add_argument("--subjects", type=int, default=5)
    camp_p.add_argument("--no-jitter", action="store_true")
    camp_p.set_defaults(func=cmd_campaign)

    rep_p = sub.add_parser("report", help="trial logs to CSV tables")
    rep_p.add_argument("--logs", required=True, help="log file or directory")
    rep_p.add_argument("--out", required=True, help="output CSV path")
    rep_p.set_defaults(func=cmd_report)

    serve_p = sub.add_parser("serve", help="live session websocket endpoint")
    common(serve_p)
    serve_p.add_argument("--port", type=int, default=8700)
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.set_defaults(func=cmd_serve)

    solve_p = sub.add_parser("solve", help="one-shot posture optimization")
    solve_p.add_argument("--distance", type=float, default=0.5)
    solve_p.add_argument("--height", type=float, default=0.5)
    solve_p.add_argument("--mass", type=float, default=4.0)
    solve_p.add_argument("--seed", type=int, default=0)
    solve_p.add_argument("--model", help="model definition JSON")
    solve_p.set_defaults(func=cmd_solve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
