"""Trace and plot-data writers; output is byte-stable for a fixed result"""

import csv
import io
import json
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

from .config import FLOAT_FORMAT, logger
from .errors import ExportError
from .harness import ScenarioResult, attack_timeline
from .models import ExportFormat
from .schemas import ComparisonReport, SpeedStudyReport

MEASUREMENT_COLUMNS = [
    "t", "reference_id", "target_id", "reading1", "reading2", "reading3",
    "status", "final_distance", "aoa", "attempts", "clamped",
]
ESTIMATE_COLUMNS = [
    "t", "target_id", "method", "x", "y", "z", "residual", "n_fixes",
    "true_x", "true_y", "error_m", "inter_cluster", "purpose",
]
DETECTION_COLUMNS = [
    "t", "cluster", "requester", "target", "aggregate_trust", "votes_for", "votes_total", "verdict", "reason",
]
ELECTION_COLUMNS = [
    "epoch", "cluster", "kind", "candidates", "dropped", "elected", "score", "sector", "geometry_warning",
]
TRACK_COLUMNS = [
    "t", "observer_id", "target_id", "est_x", "est_y", "true_x", "true_y", "error_m", "status",
]
PLOT_COLUMNS = ["series", "x", "y"]

Series = List[Tuple[str, object, object]]


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return FLOAT_FORMAT.format(value)
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def render_csv(columns: Sequence[str], rows: Iterable[dict]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(c)) for c in columns])
    return buffer.getvalue()


def render_json(document) -> str:
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        raise ExportError(f"Cannot write {path}: {e}") from e
    return path


def _plot(path: Path, series: Series) -> Path:
    return _write(path, render_csv(PLOT_COLUMNS, ({"series": s, "x": x, "y": y} for s, x, y in series)))


def plot_series(result: ScenarioResult) -> Dict[str, Series]:
    """(series, x, y) rows per figure"""
    logs = result.logs
    figures: Dict[str, Series] = {}

    figures["elections_per_epoch"] = [
        (kind, row["t"], row[kind]) for kind in ("ca", "ra", "ref", "headless") for row in logs.epochs
    ]
    figures["ra_ocf"] = [
        (f"cluster{r['cluster']}_sector{r['sector']}", r["epoch"], r["score"])
        for r in logs.elections
        if r["kind"] == "RA" and r["elected"] is not None
    ]
    figures["ref_bcf"] = [
        (f"cluster{r['cluster']}", r["epoch"], r["score"])
        for r in logs.elections
        if r["kind"] == "REF" and r["elected"] is not None
    ]
    figures["reference_geometry"] = [
        (f"cluster{r['cluster']}_{edge}", r["t"], r[f"{edge}_pairwise"])
        for edge in ("min", "max")
        for r in logs.references
    ]

    timeline = attack_timeline(result.config, result)
    figures["behaviour"] = [
        (name, t, score) for name in sorted(timeline["behaviour"]) for t, score in timeline["behaviour"][name]
    ] + [
        (f"script_{name}", t, count) for name in sorted(timeline["script"]) for t, count in timeline["script"][name]
    ]
    figures["detections_per_cluster"] = [
        ("detected", cluster, count)
        for cluster, count in sorted(result.report.detected_per_cluster.items(), key=lambda kv: int(kv[0]))
    ]
    figures["tracking_error"] = [
        (row["method"], row["t"], row["error_m"]) for row in logs.estimates
    ] + [
        ("track", row["t"], row["error_m"]) for row in logs.tracks if row["error_m"] is not None
    ]
    return figures


def export(result: ScenarioResult, out_dir: str | Path, fmt: ExportFormat | str = ExportFormat.CSV) -> List[Path]:
    """Write one scenario result; returns the files written"""
    fmt = ExportFormat(fmt)
    out = Path(out_dir)
    logs = result.logs
    written = [_write(out / "metrics.json", render_json(result.report.model_dump(mode="json")))]

    if fmt == ExportFormat.CSV:
        tables = {
            "measurements.csv": (MEASUREMENT_COLUMNS, logs.measurements),
            "estimates.csv": (ESTIMATE_COLUMNS, logs.estimates),
            "detections.csv": (DETECTION_COLUMNS, logs.detections),
            "elections.csv": (ELECTION_COLUMNS, logs.elections),
            "tracks.csv": (TRACK_COLUMNS, logs.tracks),
        }
        for name, (columns, rows) in tables.items():
            written.append(_write(out / name, render_csv(columns, rows)))
        per_cluster = [
            {"cluster": c, "count": n}
            for c, n in sorted(result.report.detected_per_cluster.items(), key=lambda kv: int(kv[0]))
        ]
        written.append(_write(out / "detections_per_cluster.csv", render_csv(["cluster", "count"], per_cluster)))
    elif fmt == ExportFormat.NDJSON:
        written.append(_write(out / "events.ndjson", result.events))
    else:
        for name, series in plot_series(result).items():
            written.append(_plot(out / "plotdata" / f"{name}.csv", series))

    logger.info(f"Exported {len(written)} {fmt.value} files to {out}")
    return written


def export_comparison(report: ComparisonReport, out_dir: str | Path) -> List[Path]:
    out = Path(out_dir)
    series: Series = []
    for row in report.trajectories:
        series += [(f"triangulation_{row.index}", k, e) for k, e in enumerate(row.triangulation_errors)]
        series += [(f"multilateration_{row.index}", k, e) for k, e in enumerate(row.multilateration_errors)]
    return [
        _write(out / "compare.json", render_json(report.model_dump(mode="json"))),
        _plot(out / "plotdata" / "compare_errors.csv", series),
    ]


def export_speed_study(report: SpeedStudyReport, out_dir: str | Path) -> List[Path]:
    out = Path(out_dir)
    series: Series = [("mean", s, e) for s, e in zip(report.speeds, report.mean_error)]
    for seed in sorted(report.per_seed, key=int):
        series += [(f"seed{seed}", s, e) for s, e in zip(report.speeds, report.per_seed[seed])]
    return [
        _write(out / "speed.json", render_json(report.model_dump(mode="json"))),
        _plot(out / "plotdata" / "speed_error.csv", series),
    ]


REPLAY_COLUMNS = ["t", "true_x", "true_y", "est_x", "est_y", "error_m", "status"]


def export_replay(rows: List[dict], out_dir: str | Path, method: str) -> List[Path]:
    """Per-step rows of one replayed trajectory"""
    return [_write(Path(out_dir) / f"track_{method}.csv", render_csv(REPLAY_COLUMNS, rows))]
