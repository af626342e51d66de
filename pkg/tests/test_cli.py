import json
import math

import pytest

from manetsim.cli import build_parser, main

TARGET = (30.0, 40.0)


def _fixes_csv(path, anchors):
    lines = ["x,y,distance"]
    for x, y in anchors:
        lines.append(f"{x},{y},{math.dist((x, y), TARGET):.12f}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _error(capsys) -> dict:
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_parser_requires_a_verb():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_localize_triangulation(tmp_path, capsys):
    path = _fixes_csv(tmp_path / "fixes.csv", [(0, 0), (100, 0), (0, 100)])
    assert main(["localize", str(path), "--method", "triangulation"]) == 0
    estimate = json.loads(capsys.readouterr().out)
    assert estimate["method"] == "triangulation"
    assert estimate["x"] == pytest.approx(TARGET[0], abs=1e-6)
    assert estimate["y"] == pytest.approx(TARGET[1], abs=1e-6)


def test_localize_multilateration(tmp_path, capsys):
    path = _fixes_csv(tmp_path / "fixes.csv", [(0, 0), (100, 0), (0, 100), (100, 100), (50, -20)])
    assert main(["localize", str(path), "--leave-one-out"]) == 0
    estimate = json.loads(capsys.readouterr().out)
    assert estimate["method"] == "multilateration"
    assert estimate["x"] == pytest.approx(TARGET[0], abs=1e-6)
    assert estimate["y"] == pytest.approx(TARGET[1], abs=1e-6)


def test_localize_missing_file(tmp_path, capsys):
    assert main(["localize", str(tmp_path / "missing.csv")]) == 2
    assert _error(capsys)["error"] == "ConfigError"


def test_localize_degenerate_geometry(tmp_path, capsys):
    path = _fixes_csv(tmp_path / "fixes.csv", [(0, 0), (10, 0), (20, 0), (30, 0)])
    assert main(["localize", str(path)]) == 1
    assert _error(capsys)["error"] == "GeometryError"


def test_invalid_config_exits_2(tmp_path, capsys):
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"clusters": 2, "warp_drive": True}), encoding="utf-8")
    assert main(["run", "--config", str(config), "--out", str(tmp_path / "out")]) == 2
    error = _error(capsys)
    assert error["error"] == "ConfigError"
    assert "warp_drive" in error["detail"]
    assert not (tmp_path / "out").exists()


def test_small_run_is_byte_identical(tmp_path, capsys):
    for name in ("a", "b"):
        assert main(["run", "--small", "--seed", "7", "--out", str(tmp_path / name)]) == 0
        assert main(["run", "--small", "--seed", "7", "--format", "ndjson", "--out", str(tmp_path / name)]) == 0
    capsys.readouterr()
    for filename in ("metrics.json", "estimates.csv", "elections.csv", "events.ndjson"):
        assert (tmp_path / "a" / filename).read_bytes() == (tmp_path / "b" / filename).read_bytes()


def test_run_prints_metrics(tmp_path, capsys):
    config = tmp_path / "short.json"
    config.write_text(json.dumps({"duration": 10.0}), encoding="utf-8")
    assert main(["run", "--small", "--config", str(config), "--seed", "3", "--out", str(tmp_path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["seed"] == 3
    assert report["nodes"] == 40
    assert (tmp_path / "metrics.json").exists()


def test_batch_run_exports_per_seed(tmp_path, capsys):
    config = tmp_path / "batch.json"
    config.write_text(json.dumps({"duration": 5.0, "seeds": [2, 1]}), encoding="utf-8")
    assert main(["run", "--small", "--batch", "--config", str(config), "--out", str(tmp_path)]) == 0
    reports = json.loads(capsys.readouterr().out)
    assert [r["seed"] for r in reports] == [1, 2]
    assert (tmp_path / "seed1" / "metrics.json").exists()
    assert (tmp_path / "seed2" / "metrics.json").exists()


def test_elect(tmp_path, capsys):
    assert main(["elect", "--small", "--seed", "7", "--out", str(tmp_path)]) == 0
    counts = json.loads(capsys.readouterr().out)
    assert len(counts) == 1
    assert counts[0]["ca"] + counts[0]["headless"] == 2
    assert (tmp_path / "elections.csv").exists()


def test_track(tmp_path, capsys):
    trajectory = tmp_path / "path.csv"
    rows = ["t,x,y"] + [f"{k},{60 + 10 * k},125" for k in range(8)]
    trajectory.write_text("\n".join(rows) + "\n", encoding="utf-8")
    assert main(["track", str(trajectory), "--small", "--seed", "1", "--out", str(tmp_path)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["method"] == "multilateration"
    assert summary["steps"] == 8
    assert (tmp_path / "track_multilateration.csv").exists()


def test_track_too_short(tmp_path, capsys):
    trajectory = tmp_path / "path.csv"
    trajectory.write_text("t,x,y\n0,0,0\n1,1,0\n", encoding="utf-8")
    assert main(["track", str(trajectory), "--out", str(tmp_path)]) == 1
    assert _error(capsys)["error"] == "InsufficientDataError"


def test_compare(tmp_path, capsys):
    config = tmp_path / "compare.json"
    config.write_text(json.dumps({"compare": {"trajectories": 2, "steps": 20, "turn_every": 5}}), encoding="utf-8")
    assert main(["compare", "--config", str(config), "--seed", "5", "--out", str(tmp_path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["seed"] == 5
    assert "trajectories" not in report
    assert (tmp_path / "compare.json").exists()
    assert (tmp_path / "plotdata" / "compare_errors.csv").exists()


def test_compare_speeds(tmp_path, capsys):
    config = tmp_path / "speed.json"
    config.write_text(json.dumps({"seeds": [1], "compare": {"speed_steps": 5}}), encoding="utf-8")
    assert main(["compare", "--config", str(config), "--speeds", "10", "50", "--out", str(tmp_path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["speeds"] == [10.0, 50.0]
    assert (tmp_path / "speed.json").exists()
