import json
import os

import numpy as np
import pytest

from manetsim.core.harness import (
    compare_trackers,
    replay_track,
    run_batch,
    run_elections,
    run_scenario,
    speed_study,
    straight_trajectory,
    turn_ratio,
    turn_spikes,
)
from manetsim.core.models import EventKind, Role, TrackStatus
from manetsim.core.pki import Ed25519Signer, KeyedHashSigner
from manetsim.core.scenario import build_config
from manetsim.core.world import World


@pytest.fixture(scope="module")
def small_run():
    return run_scenario(build_config(preset="small", seed=7))


def test_small_run_is_deterministic(small_run):
    again = run_scenario(build_config(preset="small", seed=7))
    assert again.events == small_run.events
    assert again.report.model_dump_json() == small_run.report.model_dump_json()


def test_different_seeds_differ(small_run):
    other = run_scenario(build_config(preset="small", seed=8))
    assert other.events != small_run.events


def test_trace_is_ordered(small_run):
    lines = small_run.events.splitlines()
    assert lines
    events = [json.loads(line) for line in lines]
    assert [e["tick"] for e in events] == list(range(1, len(events) + 1))
    times = [e["t"] for e in events]
    assert times == sorted(times)
    assert all(set(e) == {"t", "tick", "kind", "payload"} for e in events)
    assert small_run.report.events == len(events)


def test_estimates_follow_their_measurements(small_run):
    seen = set()
    for line in small_run.events.splitlines():
        event = json.loads(line)
        if event["kind"] == EventKind.MEASUREMENT.value:
            seen.add(event["payload"]["target"])
        elif event["kind"] == EventKind.ESTIMATE.value:
            assert event["payload"]["target"] in seen


def test_election_epochs(small_run):
    epochs = small_run.logs.epochs
    assert [row["t"] for row in epochs] == [0.0, 30.0, 60.0]
    for row in epochs:
        assert row["ca"] + row["headless"] == 2
        assert 0 <= row["ra"] <= 6 * row["ca"]


def test_report_ranges(small_run):
    report = small_run.report
    assert report.nodes == 40
    assert report.attackers == 4
    assert 0 <= report.detected <= report.attackers
    assert report.detection_rate is None or 0.0 <= report.detection_rate <= 1.0
    for stats in report.tracking_error.values():
        assert stats.mean is None or stats.mean >= 0.0
    assert sum(report.detected_per_cluster.values()) == report.detected + report.false_positives


def test_zero_attackers():
    config = build_config({"duration": 20.0, "attackers": {"fraction": 0.0}}, preset="small", seed=7)
    report = run_scenario(config).report
    assert report.attackers == 0
    assert report.detected == 0
    assert report.detection_rate is None
    assert report.detection_rate_label() == "N/A"


def test_zero_duration():
    result = run_scenario(build_config({"duration": 0.0}, preset="small", seed=7))
    assert len(result.logs.epochs) == 1
    assert result.logs.epochs[0]["t"] == 0.0
    assert result.logs.estimates == []
    assert result.logs.measurements == []
    assert result.logs.tracks == []
    assert result.logs.detections == []


def test_elections_only():
    result = run_elections(build_config(preset="small", seed=7))
    assert len(result.logs.epochs) == 1
    kinds = {row["kind"] for row in result.logs.elections}
    assert "CA" in kinds


def test_roles_are_exclusive():
    world = World(build_config(preset="small", seed=7)).elect()
    held = []
    for cluster in world.clusters.values():
        if cluster.ca_id is not None:
            held.append(cluster.ca_id)
            assert world.nodes[cluster.ca_id].role == Role.CLUSTER_HEAD
        held.extend(cluster.ra_ids.values())
        held.extend(cluster.reference_ids)
        assert set(cluster.ra_ids) <= set(range(1, 7))
    assert len(held) == len(set(held))


def test_flagged_nodes_localized_once():
    world = World(build_config(preset="small", seed=7)).run()
    for node_id in world.flagged_at:
        assert world.localize_attempts[node_id] == 1
        assert world.nodes[node_id].role == Role.MALICIOUS


def test_batch_sorted_by_seed():
    config = build_config({"duration": 10.0}, preset="small")
    results = run_batch(config, [3, 1, 2, 1])
    assert [r.config.seed for r in results] == [1, 2, 3]
    assert results[0].events == run_scenario(config.with_seed(1)).events


@pytest.mark.parametrize("seed", range(1, 9))
def test_gate_rejected_nodes_are_never_elected(seed):
    result = run_scenario(build_config(preset="small", seed=seed))
    rejected = set()
    for line in result.events.splitlines():
        event = json.loads(line)
        payload = event["payload"]
        if event["kind"] == EventKind.RA_GATE.value:
            rejected.add(payload["node"])
        elif event["kind"] == EventKind.CA_ELECTED.value:
            assert payload["ca"] not in rejected
        elif event["kind"] == EventKind.RA_ELECTED.value:
            assert payload["ra"] not in rejected


def test_signers_agree_on_a_run():
    config = build_config(preset="small", seed=7)
    keyed = World(config, signer=KeyedHashSigner(seed=7)).run()
    ed25519 = World(config, signer=Ed25519Signer(seed=7)).run()
    assert sorted(ed25519.flagged_at) == sorted(keyed.flagged_at)
    assert ed25519.log.to_ndjson() == keyed.log.to_ndjson()


def test_turn_ratio():
    errors = [1.0] * 20
    errors[6], errors[7] = 4.0, 2.0
    assert turn_ratio(errors, [5]) == pytest.approx(4.0)
    assert turn_ratio(errors, []) is None
    assert turn_ratio([None] * 5, [1]) is None


def test_turn_spikes_score_each_turn():
    errors = [1.0] * 30
    errors[6], errors[17] = 4.0, 1.5
    errors[16] = None
    assert turn_spikes(errors, [5, 15]) == pytest.approx([4.0, 1.5])
    assert turn_spikes(errors, [5, 15, 40]) == pytest.approx([4.0, 1.5])
    assert turn_spikes([None] * 5, [1]) == []


def test_replay_multilateration_tracks_a_line():
    config = build_config(preset="small", seed=3)
    trajectory = straight_trajectory(np.random.default_rng(0), 20, 10.0, 10.0)
    rows = replay_track(config, trajectory, "multilateration")
    assert len(rows) == 20
    assert rows[0]["t"] == 0.0
    assert {row["status"] for row in rows} <= {s.value for s in TrackStatus}
    errors = [row["error_m"] for row in rows if row["error_m"] is not None]
    assert errors
    assert float(np.median(errors)) < 15.0


def test_replay_is_deterministic():
    config = build_config(preset="small", seed=3)
    trajectory = straight_trajectory(np.random.default_rng(1), 10, 10.0, 10.0)
    assert replay_track(config, trajectory, "triangulation") == replay_track(config, trajectory, "triangulation")


def test_compare_trackers_shape():
    config = build_config(
        {"compare": {"trajectories": 2, "steps": 30, "turn_every": 10}}, seed=4
    )
    report = compare_trackers(config)
    assert report.seed == 4
    assert len(report.trajectories) == 2
    for row in report.trajectories:
        assert len(row.triangulation_errors) == 30
        assert len(row.multilateration_errors) == 30
        assert row.turn_steps == [10, 20]
    assert 0 <= report.multilateration_wins <= 2
    assert 0.0 <= report.sign_test_p <= 1.0
    assert compare_trackers(config).model_dump_json() == report.model_dump_json()


def test_speed_study_shape():
    config = build_config({"compare": {"speed_steps": 6}}, seed=2)
    report = speed_study(config, speeds=[10.0, 50.0], seeds=[2, 1])
    assert report.speeds == [10.0, 50.0]
    assert report.seeds == [1, 2]
    assert set(report.per_seed) == {"1", "2"}
    assert all(len(v) == 2 for v in report.per_seed.values())
    assert len(report.mean_error) == 2
    assert -1.0 <= report.spearman_rho <= 1.0


@pytest.mark.slow
def test_multilateration_beats_triangulation():
    report = compare_trackers(build_config(seed=1))
    assert len(report.trajectories) == 20
    assert report.multilateration_mean < report.triangulation_mean
    assert report.ratio <= 0.7
    assert report.sign_test_p < 0.05


@pytest.mark.slow
def test_errors_spike_at_turns():
    report = compare_trackers(build_config(seed=1))
    for row in report.trajectories:
        for errors in (row.triangulation_errors, row.multilateration_errors):
            spikes = turn_spikes(errors, row.turn_steps)
            assert spikes
            assert all(spike > 2.0 for spike in spikes), spikes


@pytest.mark.slow
def test_error_grows_with_speed():
    report = speed_study(build_config(seed=1), seeds=list(range(1, 11)))
    assert report.speeds == [10.0, 30.0, 50.0, 100.0]
    assert report.spearman_rho > 0.9


@pytest.mark.slow
def test_detection_rate_over_seeds():
    config = build_config({"duration": 120.0}, seed=1)
    results = run_batch(config, range(1, 11), workers=min(10, os.cpu_count() or 1))
    attackers = sum(r.report.attackers for r in results)
    detected = sum(r.report.detected for r in results)
    for result in results:
        assert len(result.report.false_positive_trust) == result.report.false_positives
        for trust in result.report.false_positive_trust.values():
            assert trust < 0.8
    assert detected / attackers >= 0.9
