"""Command-line entry point: manetsim <verb> [options]"""

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from .core.config import logger
from .core.errors import ConfigError, ManetError
from .core.export import export, export_comparison, export_replay, export_speed_study, render_json
from .core.file_utils import read_fixes, read_trajectory
from .core.harness import compare_trackers, replay_track, run_batch, run_elections, speed_study
from .core.localization import multilaterate, multilaterate_leave_one_out, triangulate
from .core.models import EstimateMethod, ExportFormat
from .core.scenario import load_config
from .core.schemas import EstimateModel
from .core.settings import get_settings


def _print(document) -> None:
    sys.stdout.write(render_json(document))


def _out(args) -> Path:
    return Path(args.out or get_settings().output_dir)


def cmd_run(args) -> None:
    config = load_config(args.config, small=args.small, seed=args.seed)
    seeds = [config.seed] if args.seed is not None or not args.batch else config.seeds
    results = run_batch(config, seeds, workers=args.workers or get_settings().max_workers)
    out = _out(args)
    for result in results:
        target = out / f"seed{result.config.seed}" if len(results) > 1 else out
        export(result, target, args.format)
    reports = [r.report.model_dump(mode="json") for r in results]
    _print(reports if len(reports) > 1 else reports[0])


def cmd_elect(args) -> None:
    config = load_config(args.config, small=args.small, seed=args.seed)
    result = run_elections(config)
    export(result, _out(args), args.format)
    _print([c.model_dump(mode="json") for c in result.report.election_counts])


def cmd_localize(args) -> None:
    fixes = read_fixes(args.fixes)
    method = EstimateMethod(args.method)
    if method == EstimateMethod.TRIANGULATION:
        estimate = triangulate(fixes[:3], extra_fix=fixes[3] if len(fixes) > 3 else None)
    elif args.leave_one_out and len(fixes) >= 5:
        estimate = multilaterate_leave_one_out(fixes)
    else:
        estimate = multilaterate(fixes)
    _print(EstimateModel.of(estimate).model_dump(mode="json"))


def cmd_track(args) -> None:
    config = load_config(args.config, small=args.small, seed=args.seed)
    trajectory = read_trajectory(args.trajectory)
    rows = replay_track(config, trajectory, args.method)
    export_replay(rows, _out(args), args.method)
    errors = [r["error_m"] for r in rows if r["error_m"] is not None]
    _print({
        "method": args.method,
        "steps": len(rows),
        "mean_error": sum(errors) / len(errors) if errors else None,
    })


def cmd_compare(args) -> None:
    config = load_config(args.config, small=args.small, seed=args.seed)
    out = _out(args)
    if args.speeds:
        report = speed_study(config, args.speeds)
        export_speed_study(report, out)
        _print(report.model_dump(mode="json"))
    else:
        report = compare_trackers(config)
        export_comparison(report, out)
        _print(report.model_dump(mode="json", exclude={"trajectories"}))


def cmd_serve(args) -> None:
    from .main import serve

    serve(args.host, args.port)


def _scenario_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Scenario JSON document overlaid on the preset")
    parser.add_argument("--seed", type=int, help="Override the scenario seed")
    parser.add_argument("--small", action="store_true", help="Use the small preset as the base")
    parser.add_argument("--out", help="Output directory (default: settings output_dir)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="manetsim", description="Deterministic MANET simulator")
    verbs = parser.add_subparsers(dest="verb", required=True)

    run = verbs.add_parser("run", help="Run a full scenario and export its traces")
    _scenario_flags(run)
    run.add_argument("--format", choices=[f.value for f in ExportFormat], default=ExportFormat.CSV.value)
    run.add_argument("--batch", action="store_true", help="Run every seed in the config's seeds list")
    run.add_argument("--workers", type=int, help="Process pool size for --batch")
    run.set_defaults(func=cmd_run)

    elect = verbs.add_parser("elect", help="Form clusters and run one election epoch")
    _scenario_flags(elect)
    elect.add_argument("--format", choices=[f.value for f in ExportFormat], default=ExportFormat.CSV.value)
    elect.set_defaults(func=cmd_elect)

    localize = verbs.add_parser("localize", help="One-shot fix from a fixes CSV")
    localize.add_argument("fixes", help="CSV with x, y, distance and optional z, aoa, node_id")
    localize.add_argument("--method", choices=[m.value for m in EstimateMethod], default=EstimateMethod.MULTILATERATION.value)
    localize.add_argument("--leave-one-out", action="store_true")
    localize.set_defaults(func=cmd_localize)

    track = verbs.add_parser("track", help="Replay a trajectory CSV through the tracker")
    track.add_argument("trajectory", help="CSV with t, x, y")
    _scenario_flags(track)
    track.add_argument("--method", choices=[m.value for m in EstimateMethod], default=EstimateMethod.MULTILATERATION.value)
    track.set_defaults(func=cmd_track)

    compare = verbs.add_parser("compare", help="Paired tracker comparison or, with --speeds, the speed study")
    _scenario_flags(compare)
    compare.add_argument("--speeds", type=float, nargs="+", help="Target speeds in m/s")
    compare.set_defaults(func=cmd_compare)

    serve = verbs.add_parser("serve", help="Start the HTTP service")
    serve.add_argument("--host")
    serve.add_argument("--port", type=int)
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
        return 0
    except ManetError as e:
        logger.error(f"{args.verb} failed: {e}")
        sys.stderr.write(json.dumps({"error": type(e).__name__, "detail": str(e)}) + "\n")
        return 2 if isinstance(e, ConfigError) else 1


if __name__ == "__main__":
    sys.exit(main())
