"""Scenario runs, batches and the paired tracker studies"""

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from statistics import median
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .config import debug_logger, logger
from .elections import ElectionCandidate, elect_references
from .errors import (
    ConvergenceError,
    GeometryError,
    InsufficientDataError,
    OutOfRangeError,
    TrackingError,
)
from .geometry import Position, bearing_deg
from .localization import ReferenceFix, localize_malicious, triangulate
from .models import EstimateMethod, TrackStatus
from .nodes import NodeState, Trajectory
from .radio import RadioModel
from .ranging import measure_range
from .scenario import ScenarioConfig
from .schemas import (
    ComparisonReport,
    EpochElectionCount,
    ErrorStats,
    MetricsReport,
    SpeedStudyReport,
    TrajectoryComparison,
)
from .tracking import TrackerState, observe, track_epoch
from .world import ScenarioLogs, World

_FIX_ERRORS = (InsufficientDataError, GeometryError, ConvergenceError, OutOfRangeError)
TARGET_ID = -2  # tracked target in the standalone studies; never a field node id
ARENA_MARGIN = 10.0  # meters


@dataclass
class ScenarioResult:
    """Everything one run produces; picklable so batches can fan out over processes"""

    config: ScenarioConfig
    report: MetricsReport
    logs: ScenarioLogs
    events: str  # NDJSON trace
    timeline: Dict[str, List[int]] = field(default_factory=dict)
    timeline_t: List[float] = field(default_factory=list)


def metrics(world: World) -> MetricsReport:
    attackers = world.attackers()
    detected = [i for i in world.flagged_at if i in world.script]
    per_cluster: Dict[str, int] = {}
    for node_id in sorted(world.flagged_at):
        key = str(world.flagged_cluster[node_id])
        per_cluster[key] = per_cluster.get(key, 0) + 1
    return MetricsReport(
        seed=world.config.seed,
        duration=world.config.duration,
        nodes=len(world.nodes),
        attackers=len(attackers),
        detected=len(detected),
        false_positives=len(world.false_positives()),
        detection_rate=len(detected) / len(attackers) if attackers else None,
        detected_per_cluster=per_cluster,
        tracking_error={k: ErrorStats.of(v) for k, v in world.tracking_errors().items()},
        election_counts=[EpochElectionCount(**row) for row in world.logs.epochs],
        ra_rejects={str(s): n for s, n in sorted(world.ra_rejects.items())},
        localization_attempts={str(i): n for i, n in sorted(world.localize_attempts.items())},
        false_positive_trust={str(i): world.flagged_trust[i] for i in world.false_positives()},
        events=len(world.log),
    )


def run_scenario(config: ScenarioConfig) -> ScenarioResult:
    """Run the full event loop for one seed"""
    world = World(config).run()
    step = config.schedule.detection_interval
    timeline_t = [k * step for k in range(int(config.duration // step) + 1)]
    return ScenarioResult(
        config=config,
        report=metrics(world),
        logs=world.logs,
        events=world.log.to_ndjson(),
        timeline=world.script.timeline(timeline_t),
        timeline_t=timeline_t,
    )


def run_elections(config: ScenarioConfig) -> ScenarioResult:
    """Cluster formation and one election epoch at t = 0"""
    world = World(config).elect()
    return ScenarioResult(
        config=config, report=metrics(world), logs=world.logs, events=world.log.to_ndjson()
    )


def run_batch(config: ScenarioConfig, seeds: Sequence[int], workers: int = 1) -> List[ScenarioResult]:
    """One run per seed; results come back sorted by seed whatever the completion order"""
    configs = [config.with_seed(s) for s in sorted(set(seeds))]
    if workers > 1 and len(configs) > 1:
        logger.info(f"Batch: {len(configs)} seeds on {workers} workers")
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_scenario, configs))
    else:
        results = [run_scenario(c) for c in configs]
    return sorted(results, key=lambda r: r.config.seed)


def attack_timeline(config: ScenarioConfig, result: Optional[ScenarioResult] = None) -> Dict[str, list]:
    """Per-(cluster, sector) misbehaviour series and the scripted attacker counts"""
    result = result or run_scenario(config)
    series: Dict[str, List[Tuple[float, float]]] = {}
    for row in result.logs.behaviour:
        key = f"cluster{row['cluster']}_sector{row['sector']}"
        series.setdefault(key, []).append((row["t"], row["max_score"]))
    return {
        "behaviour": series,
        "script": {b: list(zip(result.timeline_t, n)) for b, n in result.timeline.items()},
    }


# ---------------------------------------------------------------------- studies


def _field(rng: np.random.Generator, count: int, arena: float) -> List[NodeState]:
    """Static anchors scattered over a square arena"""
    nodes = []
    for i in range(count):
        p = Position(float(rng.uniform(0.0, arena)), float(rng.uniform(0.0, arena)))
        nodes.append(NodeState(id=i, position=p, waypoint=p, speed=0.0))
    return nodes


def _field_references(anchors: List[NodeState], config: ScenarioConfig) -> List[NodeState]:
    """The cluster head nearest the arena centre and its elected reference triple"""
    arena = config.compare.arena
    centre = Position(arena / 2.0, arena / 2.0)
    head = min(anchors, key=lambda n: (n.position.distance_to(centre), n.id))
    transmission_range = config.radio.transmission_range
    degrees = {
        n.id: sum(1 for m in anchors if m.id != n.id and m.position.distance_to(n.position) <= transmission_range)
        for n in anchors
    }
    candidates = [
        ElectionCandidate(
            node_id=n.id,
            position=n.position,
            hop_count=0,
            mobility=0.0,
            degree=degrees[n.id],
            trust=n.trust,
            residual_energy=n.residual_energy,
            distance_to_head=n.position.distance_to(head.position),
        )
        for n in anchors
        if n.id != head.id
    ]
    election = elect_references(
        head.position,
        candidates,
        bcf_threshold=config.elections.bcf_threshold,
        max_degree=max(degrees.values()) or 1,
        mobility_scale=config.stability_scale,
        transmission_range=transmission_range,
        top_k=config.elections.top_k,
        spread_penalty=config.elections.spread_penalty,
    )
    by_id = {n.id: n for n in anchors}
    return [by_id[i] for i in election.node_ids]


def _ranging(config: ScenarioConfig) -> dict:
    return {
        "n_packets": config.ranging.packets,
        "threshold": config.ranging.threshold,
        "max_retries": config.ranging.max_retries,
        "packet_interval": config.radio.packet_interval,
    }


def scripted_trajectory(
    rng: np.random.Generator,
    steps: int,
    speed: float,
    dt: float,
    arena: float,
    turn_every: int,
) -> Tuple[Trajectory, List[int]]:
    """Straight legs joined by +/-90 degree turns every `turn_every` steps.

    The turn direction keeps the next leg inside the arena when possible.
    Returns the trajectory and the steps at which the heading changes.
    """
    low, high = arena * 0.25, arena * 0.75
    position = Position(float(rng.uniform(low, high)), float(rng.uniform(low, high)))
    centre = Position(arena / 2.0, arena / 2.0)
    heading = bearing_deg(position, centre) + float(rng.uniform(-45.0, 45.0)) if position != centre else 0.0
    leg = speed * dt * turn_every
    trajectory = Trajectory([(0.0, position)])
    turns = []
    for k in range(1, steps):
        if k > 1 and (k - 1) % turn_every == 0:
            heading = _next_heading(position, heading, leg, arena, rng)
            turns.append(k - 1)
        position = position.offset(speed * dt, heading)
        trajectory.append(k * dt, position)
    return trajectory, turns


def _next_heading(position: Position, heading: float, leg: float, arena: float, rng) -> float:
    options = [heading + 90.0, heading - 90.0]
    if rng.random() < 0.5:
        options.reverse()
    centre = Position(arena / 2.0, arena / 2.0)

    def inside(h: float) -> bool:
        end = position.offset(leg, h)
        return ARENA_MARGIN <= end.x <= arena - ARENA_MARGIN and ARENA_MARGIN <= end.y <= arena - ARENA_MARGIN

    for h in options:
        if inside(h):
            return h % 360.0
    return min(options, key=lambda h: position.offset(leg, h).distance_to(centre)) % 360.0


FixFn = Callable[[Callable[[float], Position], float, Position], Optional[Position]]


def _triangulation_fixes(
    references: List[NodeState], hull: List[Position], radio: RadioModel, rng, config: ScenarioConfig
) -> FixFn:
    ranging = _ranging(config)

    def fix(target: Callable[[float], Position], t: float, last_known: Position) -> Optional[Position]:
        fixes = []
        for ref in references:
            try:
                m = measure_range(
                    ref.position,
                    target,
                    radio,
                    rng,
                    reference_id=ref.id,
                    target_id=TARGET_ID,
                    exchange_start=t,
                    aoa_noise_deg=config.radio.aoa_noise_deg,
                    **ranging,
                )
            except OutOfRangeError:
                return None
            if not m.usable:
                return None
            fixes.append(ReferenceFix(ref.position, m.distance, m.aoa, ref.id))
        try:
            return triangulate(fixes, hull=hull, epoch=t).position
        except _FIX_ERRORS:
            return None

    return fix


def _multilateration_fixes(anchors: List[NodeState], radio: RadioModel, rng, config: ScenarioConfig) -> FixFn:
    ranging = _ranging(config)

    def fix(target: Callable[[float], Position], t: float, last_known: Position) -> Optional[Position]:
        try:
            return localize_malicious(
                anchors, TARGET_ID, target, last_known, radio, rng, ranging=ranging, epoch=t
            ).position
        except _FIX_ERRORS:
            return None

    return fix


def _track_row(t: float, truth: Position, reported: Optional[Position], status: TrackStatus) -> dict:
    return {
        "t": t,
        "true_x": truth.x,
        "true_y": truth.y,
        "est_x": None if reported is None else reported.x,
        "est_y": None if reported is None else reported.y,
        "error_m": None if reported is None else reported.distance_to(truth),
        "status": status.value,
    }


def _track_rows(
    trajectory: Trajectory,
    fix_fn: FixFn,
    radio: RadioModel,
    rng: np.random.Generator,
    config: ScenarioConfig,
    method: EstimateMethod,
) -> List[dict]:
    """Per-step output of a PL&T tracker fed by `fix_fn`; seeded from the first two fixes"""
    tracker_cfg = config.tracker
    samples = list(trajectory)
    if len(samples) < 3:
        raise InsufficientDataError("Tracking needs at least 3 trajectory samples")
    located = trajectory.position_at
    seeds = []
    for t, truth in samples[:2]:
        seeds.append((t, fix_fn(located, t, truth) or truth))
    rows = [_track_row(t, truth, p, TrackStatus.LOCKED) for (_, p), (t, truth) in zip(seeds, samples)]
    try:
        state = TrackerState.start(
            TARGET_ID,
            0,
            seeds[0],
            seeds[1],
            r1=tracker_cfg.r1,
            n_contours=tracker_cfg.n_contours,
            half_angle=tracker_cfg.half_angle,
            max_coast=tracker_cfg.max_coast,
            method=method,
        )
    except TrackingError:
        # coincident seed fixes: fall back to the true heading
        state = TrackerState.start(
            TARGET_ID,
            0,
            samples[0],
            seeds[1],
            r1=tracker_cfg.r1,
            n_contours=tracker_cfg.n_contours,
            half_angle=tracker_cfg.half_angle,
            max_coast=tracker_cfg.max_coast,
            method=method,
        )
    for t, truth in samples[2:]:
        fix = fix_fn(located, t, state.last_two[1][1])
        bearing, contour = observe(state.zone, truth, radio, rng, tracker_cfg.bearing_noise_deg)
        reported, state = track_epoch(state, bearing, contour, t, fix, tracker_cfg.fusion_tolerance)
        rows.append(_track_row(t, truth, reported, state.status))
    return rows


def _track(*args) -> List[Optional[float]]:
    return [row["error_m"] for row in _track_rows(*args)]


def replay_track(
    config: ScenarioConfig,
    trajectory: Trajectory,
    method: EstimateMethod | str = EstimateMethod.MULTILATERATION,
) -> List[dict]:
    """Track a given trajectory through the anchor field of `config.seed`"""
    method = EstimateMethod(method)
    field_rng, noise_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence([config.seed]).spawn(2)
    )
    anchors = _field(field_rng, config.compare.field_nodes, config.compare.arena)
    radio = RadioModel.from_config(config.radio)
    if method == EstimateMethod.TRIANGULATION:
        references = _field_references(anchors, config)
        fix_fn = _triangulation_fixes(references, [n.position for n in anchors], radio, noise_rng, config)
    else:
        fix_fn = _multilateration_fixes(anchors, radio, noise_rng, config)
    return _track_rows(trajectory, fix_fn, radio, noise_rng, config, method)


def _mean(values: Sequence[Optional[float]]) -> float:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else math.nan


def turn_spikes(errors: Sequence[Optional[float]], turns: Sequence[int]) -> List[float]:
    """Per turn, the worst error in the two steps after it over the straight-segment median.

    Steps 0 and 1 and the three steps after every turn are not straight. Turns
    with no estimate in their window are skipped.
    """
    skipped = {0, 1}
    for k in turns:
        skipped.update({k + 1, k + 2, k + 3})
    straight = [e for i, e in enumerate(errors) if i not in skipped and e is not None]
    if not straight or not turns:
        return []
    baseline = median(straight)
    if baseline <= 0:
        return []
    spikes = []
    for k in turns:
        window = [errors[i] for i in (k + 1, k + 2) if i < len(errors) and errors[i] is not None]
        if window:
            spikes.append(max(window) / baseline)
    return spikes


def turn_ratio(errors: Sequence[Optional[float]], turns: Sequence[int]) -> Optional[float]:
    """Mean of the per-turn spikes; None when no turn could be scored"""
    spikes = turn_spikes(errors, turns)
    return float(np.mean(spikes)) if spikes else None


def compare_trackers(config: ScenarioConfig, trajectory_seed: Optional[int] = None) -> ComparisonReport:
    """Track the same scripted trajectories by triangulation and by multilateration fixes.

    Both trackers see the same trajectory, anchor field and reference triple;
    each has its own noise stream. The sign test asks whether multilateration
    wins more trajectories than chance.
    """
    cmp_cfg = config.compare
    seed = config.seed if trajectory_seed is None else trajectory_seed
    radio = RadioModel.from_config(config.radio)
    dt = 1.0
    rows = []
    for index in range(cmp_cfg.trajectories):
        field_rng, path_rng, tri_rng, mult_rng = (
            np.random.default_rng(s) for s in np.random.SeedSequence([seed, index]).spawn(4)
        )
        anchors = _field(field_rng, cmp_cfg.field_nodes, cmp_cfg.arena)
        references = _field_references(anchors, config)
        trajectory, turns = scripted_trajectory(
            path_rng, cmp_cfg.steps, cmp_cfg.target_speed, dt, cmp_cfg.arena, cmp_cfg.turn_every
        )
        hull = [n.position for n in anchors]
        tri = _track(
            trajectory,
            _triangulation_fixes(references, hull, radio, tri_rng, config),
            radio,
            tri_rng,
            config,
            EstimateMethod.TRIANGULATION,
        )
        mult = _track(
            trajectory,
            _multilateration_fixes(anchors, radio, mult_rng, config),
            radio,
            mult_rng,
            config,
            EstimateMethod.MULTILATERATION,
        )
        rows.append(
            TrajectoryComparison(
                index=index,
                triangulation_errors=tri,
                multilateration_errors=mult,
                turn_steps=turns,
                triangulation_mean=_mean(tri),
                multilateration_mean=_mean(mult),
                triangulation_turn_ratio=turn_ratio(tri, turns),
                multilateration_turn_ratio=turn_ratio(mult, turns),
            )
        )
        debug_logger.info(
            f"Compare: trajectory {index} triangulation {rows[-1].triangulation_mean:.3f} m, "
            f"multilateration {rows[-1].multilateration_mean:.3f} m"
        )

    tri_mean = float(np.mean([r.triangulation_mean for r in rows]))
    mult_mean = float(np.mean([r.multilateration_mean for r in rows]))
    wins = sum(1 for r in rows if r.multilateration_mean < r.triangulation_mean)
    p_value = float(stats.binomtest(wins, len(rows), 0.5, alternative="greater").pvalue)
    logger.info(
        f"Compare seed={seed}: triangulation {tri_mean:.3f} m vs multilateration {mult_mean:.3f} m, "
        f"{wins}/{len(rows)} wins, p={p_value:.4g}"
    )
    return ComparisonReport(
        seed=seed,
        sigma=config.radio.timestamp_noise_sigma,
        trajectories=rows,
        triangulation_mean=tri_mean,
        multilateration_mean=mult_mean,
        ratio=mult_mean / tri_mean if tri_mean > 0 else math.nan,
        multilateration_wins=wins,
        sign_test_p=p_value,
    )


def straight_trajectory(
    rng: np.random.Generator, steps: int, spacing: float, speed: float
) -> Trajectory:
    """Near-eastward line from the west edge of the arena, `spacing` meters per step"""
    start = Position(float(rng.uniform(20.0, 40.0)), float(rng.uniform(60.0, 190.0)))
    heading = float(rng.uniform(-10.0, 10.0))
    dt = spacing / speed
    return Trajectory([(k * dt, start.offset(k * spacing, heading)) for k in range(steps)])


def speed_study(
    config: ScenarioConfig,
    speeds: Optional[Sequence[float]] = None,
    seeds: Optional[Sequence[int]] = None,
) -> SpeedStudyReport:
    """Multilateration tracking error over straight lines at increasing target speed.

    Tracking epochs are a fixed interval apart, chosen so that the fastest
    target covers `speed_spacing` meters per epoch. The tracking zone (r1 and
    fusion tolerance) is sized to each speed's per-epoch displacement. Every
    speed replays the same line direction and noise stream for a given seed,
    so only the speed differs between the paired runs.
    """
    cmp_cfg = config.compare
    speeds = list(speeds or cmp_cfg.speeds)
    seeds = sorted(seeds or config.seeds)
    radio = RadioModel.from_config(config.radio)
    fastest = max(speeds)
    dt = cmp_cfg.speed_spacing / fastest
    per_seed: Dict[str, List[float]] = {}
    for seed in seeds:
        field_seq, path_seq, noise_seq = np.random.SeedSequence([seed]).spawn(3)
        anchors = _field(np.random.default_rng(field_seq), cmp_cfg.field_nodes, cmp_cfg.arena)
        row = []
        for speed in speeds:
            trajectory = straight_trajectory(
                np.random.default_rng(path_seq), cmp_cfg.speed_steps, speed * dt, speed
            )
            rng = np.random.default_rng(noise_seq)
            sized = _zone_for_speed(config, speed / fastest)
            errors = _track(
                trajectory,
                _multilateration_fixes(anchors, radio, rng, sized),
                radio,
                rng,
                sized,
                EstimateMethod.MULTILATERATION,
            )
            row.append(_mean(errors[2:]))
        per_seed[str(seed)] = row

    # a seed whose every epoch went unestimated carries no error for that speed
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean_error = [
            float(np.nanmean([per_seed[str(s)][k] for s in seeds])) for k in range(len(speeds))
        ]
    rho = float(stats.spearmanr(speeds, mean_error)[0]) if len(speeds) > 1 else math.nan
    if math.isnan(rho):
        rho = 0.0
    monotone = all(b >= a for a, b in zip(mean_error, mean_error[1:]))
    logger.info(f"Speed study: speeds={speeds} mean_error={[round(e, 3) for e in mean_error]} rho={rho:.3f}")
    return SpeedStudyReport(
        speeds=speeds, seeds=seeds, mean_error=mean_error, per_seed=per_seed, spearman_rho=rho, monotone=monotone
    )


def _zone_for_speed(config: ScenarioConfig, scale: float) -> ScenarioConfig:
    """Scale the contour radius and fusion tolerance with the per-epoch displacement"""
    tracker = config.tracker.model_copy(
        update={"r1": config.tracker.r1 * scale, "fusion_tolerance": config.tracker.fusion_tolerance * scale}
    )
    return config.model_copy(update={"tracker": tracker})
