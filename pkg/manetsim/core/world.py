"""Scenario world: nodes, clusters and the phase-ordered event loop"""

from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Set, Tuple

import numpy as np

from .attacks import AttackScript, victim_of
from .clustering import form_clusters, hop_count
from .config import debug_logger, logger
from .elections import (
    ClusterState,
    CriteriaWeights,
    ElectionCandidate,
    elect_cluster_head,
    elect_ras,
    elect_references,
    eligible_heads,
)
from .errors import (
    ConvergenceError,
    ElectionError,
    GeometryError,
    InsufficientDataError,
    OutOfRangeError,
    TrackingError,
    TrustError,
)
from .events import EventLog, EventQueue, SimClock
from .geometry import SECTOR_COUNT, Position, sector_of
from .localization import (
    PositionEstimate,
    ReferenceFix,
    localize_malicious,
    localize_mutual_references,
    select_neighbors,
    triangulate,
)
from .mobility import advance_waypoint, draw_leg, mobility_matrix
from .models import AttackBehavior, EventKind, Role, TrackStatus, Verdict
from .nodes import NodeState
from .pki import Certificate, KeyDirectory, KeyPair, Signer, issue_certificate, make_signer
from .radio import RadioModel
from .ranging import measure_range
from .scenario import ScenarioConfig
from .settings import get_settings
from .tracking import TrackerState, observe, track_epoch
from .trust import (
    TrustLedger,
    certificate_valid,
    detect_malicious,
    introduce,
    introduce_all,
    ra_gate,
    update_behaviour,
    update_trust,
)

# Phase order for events sharing a timestamp
MOBILITY, ELECTION, BEHAVIOUR, DETECTION, LOCALIZATION, TRACKING = range(6)

BOOTSTRAP_ID = -1  # offline dealer that signs the initial certificates
MULTILATERATION_POOL = 24  # nearest authenticated neighbours offered to one multilateration

_LOCALIZATION_ERRORS = (InsufficientDataError, GeometryError, ConvergenceError, OutOfRangeError)


def _r(value: Optional[float]) -> Optional[float]:
    return None if value is None else round(float(value), 6)


@dataclass
class ScenarioLogs:
    measurements: List[dict] = field(default_factory=list)
    estimates: List[dict] = field(default_factory=list)
    detections: List[dict] = field(default_factory=list)
    elections: List[dict] = field(default_factory=list)
    tracks: List[dict] = field(default_factory=list)
    behaviour: List[dict] = field(default_factory=list)
    references: List[dict] = field(default_factory=list)
    epochs: List[dict] = field(default_factory=list)


class World:
    """One scenario run. Single-threaded; all randomness comes from the scenario seed."""

    def __init__(self, config: ScenarioConfig, signer: Optional[Signer] = None):
        self.config = config
        streams = np.random.SeedSequence(config.seed).spawn(6)
        (
            self.rng_init,
            self.rng_mobility,
            self.rng_radio,
            self.rng_trust,
            self.rng_attack,
            self.rng_cluster,
        ) = (np.random.default_rng(s) for s in streams)

        self.radio = RadioModel.from_config(config.radio)
        self.clock = SimClock()
        self.queue = EventQueue(self.clock)
        self.log = EventLog(self.clock)
        self.signer = signer or make_signer(get_settings().signer, config.seed)
        self.directory = KeyDirectory(self.signer)
        self.bounds = (config.bounds.width, config.bounds.height)
        self.speed_range = (config.mobility.v_min, config.mobility.v_max)
        self.ocf_weights = CriteriaWeights(*config.elections.ocf_weights)
        self.bcf_weights = CriteriaWeights(*config.elections.bcf_weights)

        n = config.total_nodes
        self.script = AttackScript.assign(
            list(range(n)), config.attackers.fraction, config.attackers.script, self.rng_attack
        )
        self.dealer = self.signer.generate_keypair(BOOTSTRAP_ID)
        self.directory.register(self.dealer)
        self.certificates: Dict[int, Certificate] = {}
        self._forged: Dict[int, KeyPair] = {}
        self._forged_certificates: Dict[int, Tuple[float, Certificate]] = {}
        self.nodes: List[NodeState] = [self._spawn(i) for i in range(n)]
        self._xy = self._positions()
        self.ledger = TrustLedger(baseline=lambda subject: self.nodes[subject].trust)

        self.clusters: Dict[int, ClusterState] = {}
        self._centroids: Optional[np.ndarray] = None
        self._authentic: Set[int] = set()
        self.logs = ScenarioLogs()

        self.flagged_at: Dict[int, float] = {}
        self.flagged_trust: Dict[int, float] = {}
        self.flagged_cluster: Dict[int, int] = {}
        self.gatekeeper: Dict[int, int] = {}
        self.localize_attempts: Counter = Counter()
        self.trackers: Dict[int, TrackerState] = {}
        self._seed_fix: Dict[int, Tuple[float, Position]] = {}
        self._last_estimate: Dict[int, Position] = {}
        self._localization_round = 0
        self.ra_rejects: Counter = Counter()
        self.gate_rejected: Set[int] = set()  # never again eligible to lead

    # ------------------------------------------------------------------ setup

    def _spawn(self, node_id: int) -> NodeState:
        rng = self.rng_init
        width, height = self.bounds
        position = Position(float(rng.uniform(0.0, width)), float(rng.uniform(0.0, height)))
        waypoint, speed = draw_leg(rng, self.bounds, self.speed_range)
        energy = float(rng.uniform(*self.config.energy.initial))
        trust_range = (
            self.config.trust.attacker_trust if node_id in self.script else self.config.trust.honest_trust
        )
        keys = self.signer.generate_keypair(node_id)
        self.directory.register(keys)
        self.certificates[node_id] = issue_certificate(
            self.dealer, node_id, keys.public_key, 0.0, self.signer
        )
        node = NodeState(
            id=node_id,
            position=position,
            waypoint=waypoint,
            speed=speed,
            residual_energy=energy,
            trust=float(rng.uniform(*trust_range)),
            key_pair=keys,
            is_attacker=node_id in self.script,
        )
        node.record(0.0)
        return node

    def presented_certificate(self, node_id: int, t: float) -> Certificate:
        """The certificate a node shows; key forgers present one for a forged key"""
        if self.script.behaves(node_id, t, AttackBehavior.FORGE_KEY):
            cached = self._forged_certificates.get(node_id)
            if cached is None or cached[0] != t:
                forged = self._forged_keypair(node_id)
                cached = (t, issue_certificate(forged, node_id, forged.public_key, t, self.signer))
                self._forged_certificates[node_id] = cached
            return cached[1]
        return self.certificates[node_id]

    def announced_key(self, node_id: int, t: float) -> bytes:
        if self.script.behaves(node_id, t, AttackBehavior.FORGE_KEY):
            return self._forged_keypair(node_id).public_key
        return self.directory.public_key(node_id)

    def _forged_keypair(self, node_id: int) -> KeyPair:
        if node_id not in self._forged:
            self._forged[node_id] = self.signer.forged_keypair(node_id)
        return self._forged[node_id]

    def _positions(self) -> np.ndarray:
        return np.array([[n.position.x, n.position.y] for n in self.nodes])

    def _within(self, center: Position, radius: float) -> np.ndarray:
        """Ids of nodes within `radius` of center, nearest first (ties by id)"""
        distances = np.hypot(self._xy[:, 0] - center.x, self._xy[:, 1] - center.y)
        inside = np.flatnonzero(distances <= radius)
        return inside[np.lexsort((inside, distances[inside]))]

    def _refresh_authentication(self, t: float) -> None:
        self._authentic = {
            n.id
            for n in self.nodes
            if not n.flagged
            and certificate_valid(self.presented_certificate(n.id, t), n.id, self.directory, t)
        }

    def _located(self, node: NodeState, t: float) -> Callable[[float], Position]:
        """Node position during a packet exchange starting at t"""
        p = node.position
        vx, vy = node.velocity()
        return lambda tau: Position(p.x + vx * (tau - t), p.y + vy * (tau - t), p.z)

    def _ranging(self, drop_ratio: float = 0.0) -> dict:
        return {
            "n_packets": self.config.ranging.packets,
            "threshold": self.config.ranging.threshold,
            "max_retries": self.config.ranging.max_retries,
            "packet_interval": self.config.radio.packet_interval,
            "aoa_noise_deg": self.config.radio.aoa_noise_deg,
            "drop_ratio": drop_ratio,
        }

    # ------------------------------------------------------------------ loop

    def _recurring(self, interval: float, priority: int, action: Callable[[], None], first: int) -> None:
        duration = self.config.duration

        def fire(k: int) -> None:
            action()
            t_next = (k + 1) * interval
            if t_next <= duration:
                self.queue.schedule(t_next, priority, lambda: fire(k + 1))

        if first * interval <= duration:
            self.queue.schedule(first * interval, priority, lambda: fire(first))

    def run(self) -> "World":
        schedule = self.config.schedule
        logger.info(
            f"Scenario seed={self.config.seed}: {len(self.nodes)} nodes, "
            f"{len(self.script)} attackers, {self.config.duration} s"
        )
        self._refresh_authentication(0.0)
        self._recurring(self.config.mobility.tick, MOBILITY, self._mobility_tick, first=1)
        self._recurring(self.config.elections.interval, ELECTION, self._election_epoch, first=0)
        self._recurring(schedule.detection_interval, BEHAVIOUR, self._behaviour_epoch, first=1)
        self._recurring(schedule.detection_interval, DETECTION, self._detection_epoch, first=1)
        self._recurring(schedule.localization_interval, LOCALIZATION, self._localization_epoch, first=1)
        self._recurring(schedule.tracking_interval, TRACKING, self._tracking_epoch, first=1)
        executed = self.queue.run_until(self.config.duration)
        logger.info(f"Scenario seed={self.config.seed} finished: {executed} events, {len(self.log)} trace entries")
        return self

    def elect(self) -> "World":
        """A single election epoch at the current time, without running the loop"""
        self._refresh_authentication(self.clock.now)
        self._election_epoch()
        return self

    # ------------------------------------------------------------------ mobility

    def _mobility_tick(self) -> None:
        t = self.clock.now
        drain = self.config.energy.drain_per_meter
        for k, node in enumerate(self.nodes):
            moved = advance_waypoint(node, self.config.mobility.tick, self.rng_mobility, self.bounds, self.speed_range)
            travelled = node.position.distance_to(moved.position)
            moved.residual_energy = max(0.0, moved.residual_energy - drain * travelled)
            moved.record(t)
            self.nodes[k] = moved
        self._xy = self._positions()
        self.log.emit(EventKind.MOBILITY, nodes=len(self.nodes))
        self._check_departures(t)

    def _check_departures(self, t: float) -> None:
        for cluster in self.clusters.values():
            if cluster.ca_id is None:
                continue
            x, y = self._xy[cluster.member_ids].mean(axis=0)
            cluster.centroid = Position(float(x), float(y))
            ca = self.nodes[cluster.ca_id]
            hops = hop_count(ca.position, cluster.centroid, self.radio.transmission_range)
            if ca.flagged or hops >= cluster.cluster_size:
                self.log.emit(
                    EventKind.START_ELECTION, cluster=cluster.cluster_id, reason="ca_departure", ca=ca.id
                )
                self._elect_cluster(cluster, t)

    def _drain_packets(self, node_ids, packets: int) -> None:
        cost = self.config.energy.drain_per_packet * packets
        if cost <= 0:
            return
        for i in node_ids:
            node = self.nodes[i]
            node.residual_energy = max(0.0, node.residual_energy - cost)

    # ------------------------------------------------------------------ elections

    def _election_epoch(self) -> None:
        t = self.clock.now
        self._refresh_authentication(t)
        positions = np.array([[n.position.x, n.position.y] for n in self.nodes])
        distances = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=2)
        degrees = (distances <= self.radio.transmission_range).sum(axis=1) - 1
        for node, degree in zip(self.nodes, degrees):
            node.connectivity_degree = int(degree)

        attributes = np.column_stack(
            [
                [n.speed / self.speed_range[1] for n in self.nodes],
                [n.residual_energy for n in self.nodes],
                degrees / max(int(degrees.max()), 1),
            ]
        )
        labels, centroids = form_clusters(
            positions, self.config.clusters, self.rng_cluster, self._centroids, attributes
        )
        self._centroids = centroids
        self.clusters = {}
        for k in range(self.config.clusters):
            members = [int(i) for i in np.flatnonzero(labels == k)]
            self.clusters[k] = ClusterState(
                cluster_id=k,
                member_ids=members,
                centroid=Position(float(centroids[k][0]), float(centroids[k][1])),
                cluster_size=self.config.elections.cluster_size,
            )
            for i in members:
                self.nodes[i].cluster_id = k
        self.log.emit(
            EventKind.CLUSTERS_FORMED, sizes=[len(c.member_ids) for c in self.clusters.values()]
        )
        for cluster in self.clusters.values():
            self._elect_cluster(cluster, t)

        clusters = list(self.clusters.values())
        self.logs.epochs.append(
            {
                "t": t,
                "ca": sum(1 for c in clusters if c.ca_id is not None),
                "ra": sum(len(c.ra_ids) for c in clusters),
                "ref": sum(1 for c in clusters if c.reference_ids),
                "headless": sum(1 for c in clusters if c.ca_id is None),
                "vacant_sectors": sum(SECTOR_COUNT - len(c.ra_ids) for c in clusters if c.ca_id is not None),
            }
        )

    def _candidates(self, members: List[NodeState], cluster: ClusterState, t: float) -> List[ElectionCandidate]:
        window = self.config.elections.mobility_window
        matrix = mobility_matrix(members, window, t)
        pos = np.array([[m.position.x, m.position.y] for m in members])
        dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=2)
        neighbours = (dist <= self.radio.transmission_range) & ~np.eye(len(members), dtype=bool)
        counts = neighbours.sum(axis=1)
        mobility = np.where(counts > 0, (matrix * neighbours).sum(axis=1) / np.maximum(counts, 1), 0.0)
        threshold = self.config.trust.threshold
        return [
            ElectionCandidate(
                node_id=m.id,
                position=m.position,
                hop_count=hop_count(m.position, cluster.centroid, self.radio.transmission_range),
                mobility=float(mobility[k]),
                degree=m.connectivity_degree,
                trust=m.trust,
                residual_energy=m.residual_energy,
                verified=(
                    m.id in self._authentic
                    and m.trust >= threshold
                    and not m.flagged
                    and m.id not in self.gate_rejected
                ),
            )
            for k, m in enumerate(members)
        ]

    def _election_row(self, t: float, cluster: int, kind: str, **fields) -> None:
        row = {
            "epoch": t,
            "cluster": cluster,
            "kind": kind,
            "candidates": 0,
            "dropped": 0,
            "elected": None,
            "score": None,
            "sector": None,
            "geometry_warning": None,
        }
        row.update(fields)
        self.logs.elections.append(row)

    def _elect_cluster(self, cluster: ClusterState, t: float) -> None:
        cfg = self.config.elections
        members = [self.nodes[i] for i in cluster.member_ids if not self.nodes[i].flagged]
        for m in members:
            m.assign_role(Role.MEMBER)
        cluster.ca_id, cluster.ra_ids, cluster.reference_ids = None, {}, ()
        if not members:
            self.log.emit(EventKind.CA_HEADLESS, cluster=cluster.cluster_id, candidates=0)
            self._election_row(t, cluster.cluster_id, "CA")
            return

        candidates = self._candidates(members, cluster, t)
        eligible = eligible_heads(candidates, cluster.cluster_size)
        try:
            ca_id = elect_cluster_head(candidates, cluster.cluster_size)
        except ElectionError as e:
            debug_logger.info(f"Elections: cluster {cluster.cluster_id} headless at t={t}: {e}")
            self.log.emit(EventKind.CA_HEADLESS, cluster=cluster.cluster_id, candidates=len(candidates))
            self._election_row(t, cluster.cluster_id, "CA", candidates=len(candidates), dropped=len(candidates))
            return
        ca = self.nodes[ca_id]
        ca.assign_role(Role.CLUSTER_HEAD)
        cluster.ca_id = ca_id
        winner = next(c for c in candidates if c.node_id == ca_id)
        self.log.emit(
            EventKind.CA_ELECTED,
            cluster=cluster.cluster_id,
            ca=ca_id,
            candidates=len(candidates),
            dropped=len(candidates) - len(eligible),
        )
        self._election_row(
            t,
            cluster.cluster_id,
            "CA",
            candidates=len(candidates),
            dropped=len(candidates) - len(eligible),
            elected=str(ca_id),
            score=winner.mobility,
        )

        self.log.emit(EventKind.START_ELECTION, cluster=cluster.cluster_id, ca=ca_id, reason="epoch")
        others = [
            replace(c, distance_to_head=c.position.distance_to(ca.position))
            for c in candidates
            if c.node_id != ca_id
        ]
        max_degree = max((c.degree for c in candidates), default=1) or 1
        scoring = {
            "max_degree": max_degree,
            "mobility_scale": self.config.stability_scale,
            "transmission_range": self.radio.transmission_range,
        }
        ras = elect_ras(ca.position, others, self.ocf_weights, reply_window=cfg.reply_window, start=t, **scoring)
        self._drain_packets([ca_id], SECTOR_COUNT)
        for sector in range(1, SECTOR_COUNT + 1):
            elected = ras.get(sector)
            if elected is None:
                debug_logger.info(f"Elections: cluster {cluster.cluster_id} sector {sector} has no RA")
                self.log.emit(EventKind.RA_VACANT, cluster=cluster.cluster_id, sector=sector)
                self._election_row(t, cluster.cluster_id, "RA", sector=sector)
                continue
            self.nodes[elected.node_id].assign_role(Role.RA)
            cluster.ra_ids[sector] = elected.node_id
            self.log.emit(
                EventKind.RA_ELECTED,
                cluster=cluster.cluster_id,
                sector=sector,
                ra=elected.node_id,
                ocf=_r(elected.score),
                candidates=elected.candidates,
            )
            self._election_row(
                t,
                cluster.cluster_id,
                "RA",
                candidates=elected.candidates,
                elected=str(elected.node_id),
                score=elected.score,
                sector=sector,
            )

        ra_set = set(cluster.ra_ids.values())
        pool = [c for c in others if c.node_id not in ra_set]
        try:
            refs = elect_references(
                ca.position,
                pool,
                self.bcf_weights,
                cfg.bcf_threshold,
                top_k=cfg.top_k,
                spread_penalty=cfg.spread_penalty,
                **scoring,
            )
        except ElectionError as e:
            self.log.emit(EventKind.LOCALIZATION_DISABLED, cluster=cluster.cluster_id, reason=str(e))
            self._election_row(t, cluster.cluster_id, "REF", candidates=len(pool), dropped=len(pool))
            return
        for node_id in refs.node_ids:
            self.nodes[node_id].assign_role(Role.REFERENCE)
        cluster.reference_ids = refs.node_ids
        self.log.emit(
            EventKind.REFERENCES_ELECTED,
            cluster=cluster.cluster_id,
            references=list(refs.node_ids),
            bcf=[_r(s) for s in refs.scores],
            pairwise=[_r(d) for d in refs.pairwise],
            geometry_warning=refs.geometry_warning,
        )
        if refs.geometry_warning:
            self.log.emit(EventKind.GEOMETRY_WARNING, cluster=cluster.cluster_id, references=list(refs.node_ids))
        self._election_row(
            t,
            cluster.cluster_id,
            "REF",
            candidates=refs.candidates,
            dropped=refs.dropped,
            elected=";".join(str(i) for i in refs.node_ids),
            score=min(refs.scores),
            geometry_warning=refs.geometry_warning,
        )
        self.logs.references.append(
            {
                "t": t,
                "cluster": cluster.cluster_id,
                "references": ";".join(str(i) for i in refs.node_ids),
                "min_pairwise": min(refs.pairwise),
                "max_pairwise": max(refs.pairwise),
                "spread_score": refs.spread_score,
            }
        )

    # ------------------------------------------------------------------ trust

    def _sector(self, cluster: ClusterState, node: NodeState) -> Optional[int]:
        if cluster.ca_id is None or node.id == cluster.ca_id:
            return None
        try:
            return sector_of(self.nodes[cluster.ca_id].position, node.position)
        except GeometryError:
            return 1

    def _observer_of(self, node: NodeState) -> int:
        cluster = self.clusters.get(node.cluster_id)
        if cluster is None or cluster.ca_id is None or cluster.ca_id == node.id:
            return BOOTSTRAP_ID
        ra_id = cluster.ra_ids.get(self._sector(cluster, node))
        if ra_id is not None and ra_id != node.id:
            return ra_id
        return cluster.ca_id

    def _behaviour_epoch(self) -> None:
        t = self.clock.now
        trust_cfg = self.config.trust
        misbehaving = []
        for node in self.nodes:
            if node.flagged:
                continue
            evidence = self.script.evidence(node.id, t, self.rng_trust, trust_cfg.honest_noise)
            node.behaviour = update_behaviour(self.ledger, node.id, evidence, trust_cfg.behaviour_alpha)
            node.trust = update_trust(self.ledger, self._observer_of(node), node.id, evidence, trust_cfg.trust_rate)
            if node.behaviour > trust_cfg.misbehaviour_limit:
                misbehaving.append(node.id)

        for cluster in self.clusters.values():
            if cluster.ca_id is None:
                continue
            scores: Dict[int, List[float]] = {}
            for i in cluster.member_ids:
                sector = self._sector(cluster, self.nodes[i])
                if sector is not None:
                    scores.setdefault(sector, []).append(self.ledger.behaviour(i))
            for sector in sorted(scores):
                self.logs.behaviour.append(
                    {
                        "t": t,
                        "cluster": cluster.cluster_id,
                        "sector": sector,
                        "max_score": max(scores[sector]),
                        "mean_score": float(np.mean(scores[sector])),
                    }
                )
        self.log.emit(EventKind.BEHAVIOUR, misbehaving=misbehaving)

    def _votes(self, target: NodeState, t: float) -> List[Tuple[int, bytes]]:
        voters = [
            int(i)
            for i in self._within(target.position, self.radio.transmission_range)
            if i != target.id and i in self._authentic
        ]
        shown = self.announced_key(target.id, t)
        return [(i, shown) for i in voters[: self.config.trust.max_voters]]

    def _detection_epoch(self) -> None:
        t = self.clock.now
        self._refresh_authentication(t)
        cfg = self.config.trust
        for cluster in self.clusters.values():
            if cluster.ca_id is None:
                continue
            ca = self.nodes[cluster.ca_id]
            ras = {s: self.nodes[i] for s, i in cluster.ra_ids.items()}
            sectors = {i: self._sector(cluster, self.nodes[i]) for i in cluster.member_ids}
            by_sector: Dict[Optional[int], List[int]] = {}
            for i, s in sectors.items():
                by_sector.setdefault(s, []).append(i)
            for node_id in list(cluster.member_ids):
                node = self.nodes[node_id]
                if node.flagged or node_id == cluster.ca_id or cluster.ca_id is None:
                    continue
                sector = sectors[node_id]
                gate = ras.get(sector)
                if gate is None or gate.id == node_id or gate.flagged:
                    gate = ca
                neighbours = [
                    i
                    for i in by_sector.get(sector, [])
                    if self.radio.in_range(self.nodes[i].position, gate.position)
                ]
                decision = ra_gate(
                    gate,
                    node,
                    self.presented_certificate(node_id, t),
                    self.directory,
                    self.ledger,
                    t,
                    cfg.threshold,
                    cfg.misbehaviour_limit,
                    neighbours,
                )
                if decision.forwarded:
                    self._recertify(gate, node, t)
                    continue
                self.ra_rejects[sector or 0] += 1
                self.gate_rejected.add(node_id)
                self.log.emit(
                    EventKind.RA_GATE,
                    cluster=cluster.cluster_id,
                    ra=gate.id,
                    node=node_id,
                    action=decision.action.value,
                    reasons=decision.reasons,
                )
                self.log.emit(
                    EventKind.MALICIOUS_ALERT,
                    ra=gate.id,
                    subject=node_id,
                    recipients=list(decision.alert_recipients),
                )
                self._judge(cluster, ca, ras, node, sector, gate, t)

    def _recertify(self, gate: NodeState, node: NodeState, t: float) -> None:
        if gate.role != Role.RA or self.certificates[node.id].issuer_id == gate.id:
            return
        self.certificates[node.id] = issue_certificate(
            self.directory.keypair(gate.id), node.id, self.directory.public_key(node.id), t, self.signer
        )

    def _judge(
        self,
        cluster: ClusterState,
        ca: NodeState,
        ras: Dict[int, NodeState],
        node: NodeState,
        sector: Optional[int],
        gate: NodeState,
        t: float,
    ) -> None:
        cfg = self.config.trust
        gate_sector = cluster.sector_of_ra(gate.id) or sector or 1
        live = {s: ra for s, ra in ras.items() if not ra.flagged and ra.role == Role.RA}
        try:
            replies = introduce_all(
                live, gate_sector, sector or gate_sector, ca.id, node.id, self.ledger, self.directory
            )
            if not replies:
                # both sectors vacant: ask the RA nearest the suspect
                fallback = sorted(
                    (ra for ra in live.values() if ra.id != node.id),
                    key=lambda ra: (ra.position.distance_to(node.position), ra.id),
                )
                replies = [introduce(ra, ca.id, node.id, self.ledger, self.directory) for ra in fallback[:1]]
            detection = detect_malicious(
                ca,
                node.id,
                replies,
                self._votes(node, t),
                cfg.threshold,
                self.ledger,
                self.directory,
                cfg.aggregation,
                now=t,
            )
        except TrustError as e:
            debug_logger.info(f"Trust: no verdict on node {node.id} at t={t}: {e}")
            return
        row = detection.as_row()
        row["cluster"] = cluster.cluster_id
        self.logs.detections.append(row)
        self.log.emit(
            EventKind.DETECTION,
            cluster=cluster.cluster_id,
            requester=ca.id,
            target=node.id,
            aggregate_trust=_r(detection.aggregate_trust),
            votes_for=detection.votes_for,
            votes_total=detection.votes_total,
            verdict=detection.verdict.value,
            reason=detection.reason.value,
        )
        if detection.verdict == Verdict.MALICIOUS:
            self._flag(node, cluster, gate.id, t)

    def _flag(self, node: NodeState, cluster: ClusterState, gatekeeper: int, t: float) -> None:
        node.assign_role(Role.MALICIOUS)
        for c in self.clusters.values():
            c.vacate(node.id)
        self._authentic.discard(node.id)
        self.flagged_at[node.id] = t
        self.flagged_trust[node.id] = node.trust
        self.flagged_cluster[node.id] = cluster.cluster_id
        self.gatekeeper[node.id] = gatekeeper
        logger.info(f"Node {node.id} flagged malicious in cluster {cluster.cluster_id} at t={t}")
        self.queue.schedule(t, LOCALIZATION, lambda: self._localize_flagged(node.id), name="localize_flagged")

    # ------------------------------------------------------------------ localization

    def _record_estimate(self, node: NodeState, estimate: PositionEstimate, purpose: str) -> None:
        for m in estimate.measurements:
            self.logs.measurements.append(m.as_row())
            self.log.emit(
                EventKind.MEASUREMENT,
                reference=m.reference_id,
                target=m.target_id,
                status=m.status.value,
                distance=_r(m.distance),
                attempts=m.attempts,
            )
        error = estimate.position.distance_to(node.position)
        row = estimate.as_row(node.id)
        row.update(
            {
                "true_x": node.position.x,
                "true_y": node.position.y,
                "error_m": error,
                "inter_cluster": estimate.inter_cluster,
                "purpose": purpose,
            }
        )
        self.logs.estimates.append(row)
        self.log.emit(
            EventKind.ESTIMATE,
            target=node.id,
            method=estimate.method.value,
            x=_r(estimate.position.x),
            y=_r(estimate.position.y),
            residual=_r(estimate.residual),
            n_fixes=estimate.n_fixes,
            inter_cluster=estimate.inter_cluster,
            purpose=purpose,
        )
        self._last_estimate[node.id] = estimate.position

    def _fail(self, node: NodeState, reason: str, purpose: str, measurements=()) -> None:
        for m in measurements:
            self.logs.measurements.append(m.as_row())
            self.log.emit(
                EventKind.MEASUREMENT,
                reference=m.reference_id,
                target=m.target_id,
                status=m.status.value,
                distance=_r(m.distance),
                attempts=m.attempts,
            )
        self.log.emit(EventKind.LOCALIZATION_FAILED, target=node.id, reason=reason, purpose=purpose)

    def _multilaterate(self, node: NodeState, t: float, last_known: Position) -> PositionEstimate:
        hiding = self.script.behaves(node.id, t, AttackBehavior.HIDE)
        candidates = []
        for i in self._within(last_known, self.radio.transmission_range):
            other = self.nodes[i]
            if other.id == node.id or other.id not in self._authentic:
                continue
            if hiding and self.script.hidden_from(node.id, t, node.position, other.position):
                continue
            candidates.append(other)
            if len(candidates) == MULTILATERATION_POOL:
                break
        forged = {}
        offset = self.script.forged_offset(node.id, t)
        if offset:
            nearest = select_neighbors(candidates, node.id, last_known, self.radio.transmission_range)[:4]
            victim = victim_of(node.position, nearest)
            if victim is not None:
                forged[victim] = offset
        estimate = localize_malicious(
            candidates,
            node.id,
            self._located(node, t),
            last_known,
            self.radio,
            self.rng_radio,
            ranging=self._ranging(self.script.drop_ratio(node.id, t)),
            forged_offsets=forged,
            epoch=t,
        )
        estimate.inter_cluster = any(self.nodes[i].cluster_id != node.cluster_id for i in estimate.fix_ids)
        return estimate

    def _localize_flagged(self, node_id: int) -> None:
        t = self.clock.now
        node = self.nodes[node_id]
        self.localize_attempts[node_id] += 1
        last_known = self._last_estimate.get(node_id, node.position)
        try:
            estimate = self._multilaterate(node, t, last_known)
        except _LOCALIZATION_ERRORS as e:
            self._fail(node, str(e), "flagged")
            return
        self._record_estimate(node, estimate, "flagged")
        self._seed_fix[node_id] = (t, estimate.position)

    def _localization_epoch(self) -> None:
        t = self.clock.now
        sample = self.config.schedule.localization_sample
        round_index = self._localization_round
        self._localization_round += 1
        for cluster in self.clusters.values():
            refs = [self.nodes[i] for i in cluster.reference_ids]
            if len(refs) != 3 or any(r.flagged for r in refs):
                continue
            try:
                mutual = localize_mutual_references(
                    refs,
                    self.radio,
                    self.rng_radio,
                    aoa_noise_deg=self.config.radio.aoa_noise_deg,
                    ranging={k: v for k, v in self._ranging().items() if k != "aoa_noise_deg"},
                    epoch=t,
                )
                ref_positions = {i: e.position for i, e in mutual.items()}
            except (InsufficientDataError, OutOfRangeError) as e:
                debug_logger.info(f"Localization: cluster {cluster.cluster_id} references unplaced: {e}")
                ref_positions = {r.id: r.position for r in refs}
            members = sorted(i for i in cluster.member_ids if self.nodes[i].role == Role.MEMBER)
            if not members:
                continue
            start = (round_index * sample) % len(members)
            chosen = [members[(start + j) % len(members)] for j in range(min(sample, len(members)))]
            hull = [self.nodes[i].position for i in cluster.member_ids]
            for node_id in chosen:
                self._triangulate_member(self.nodes[node_id], refs, ref_positions, hull, t)

    def _triangulate_member(
        self,
        node: NodeState,
        refs: List[NodeState],
        ref_positions: Dict[int, Position],
        hull: List[Position],
        t: float,
    ) -> None:
        reachable = all(
            self.radio.in_range(r.position, node.position)
            and not self.script.hidden_from(node.id, t, node.position, r.position)
            for r in refs
        )
        if not reachable:
            last_known = self._last_estimate.get(node.id, node.position)
            try:
                estimate = self._multilaterate(node, t, last_known)
            except _LOCALIZATION_ERRORS as e:
                self._fail(node, str(e), "member")
                return
            estimate.inter_cluster = True
            self._record_estimate(node, estimate, "member")
            return

        offset = self.script.forged_offset(node.id, t)
        victim = victim_of(node.position, refs) if offset else None
        ranging = self._ranging(self.script.drop_ratio(node.id, t))
        fixes, measurements = [], []
        for ref in refs:
            m = measure_range(
                self._located(ref, t),
                self._located(node, t),
                self.radio,
                self.rng_radio,
                reference_id=ref.id,
                target_id=node.id,
                forged_offset=offset if ref.id == victim else 0.0,
                exchange_start=t,
                **ranging,
            )
            measurements.append(m)
            if m.usable:
                fixes.append(ReferenceFix(ref_positions[ref.id], m.distance, m.aoa, ref.id))
        self._drain_packets([node.id], len(measurements) * 3 * self.config.ranging.packets)
        if len(fixes) < 3:
            self._fail(node, "reference abstained", "member", measurements)
            return
        try:
            estimate = triangulate(fixes, hull=hull, epoch=t)
        except (GeometryError, ConvergenceError) as e:
            self._fail(node, str(e), "member", measurements)
            return
        estimate.measurements = measurements
        self._record_estimate(node, estimate, "member")

    # ------------------------------------------------------------------ tracking

    def _tracker_fix(self, node: NodeState, t: float, last_known: Position) -> Optional[Position]:
        try:
            return self._multilaterate(node, t, last_known).position
        except _LOCALIZATION_ERRORS:
            return None

    def _track_row(self, state: TrackerState, node: NodeState, t: float, reported: Optional[Position]) -> None:
        self.logs.tracks.append(
            {
                "t": t,
                "observer_id": state.observer_id,
                "target_id": node.id,
                "est_x": None if reported is None else reported.x,
                "est_y": None if reported is None else reported.y,
                "true_x": node.position.x,
                "true_y": node.position.y,
                "error_m": None if reported is None else reported.distance_to(node.position),
                "status": state.status.value,
            }
        )
        self.log.emit(
            EventKind.TRACK,
            target=node.id,
            observer=state.observer_id,
            status=state.status.value,
            x=None if reported is None else _r(reported.x),
            y=None if reported is None else _r(reported.y),
        )

    def _tracking_epoch(self) -> None:
        t = self.clock.now
        tracker_cfg = self.config.tracker
        for node_id in sorted(self.flagged_at):
            node = self.nodes[node_id]
            state = self.trackers.get(node_id)
            seed = self._seed_fix.get(node_id)
            if state is None and (seed is None or seed[0] >= t):
                continue
            last_known = seed[1] if state is None else state.last_two[1][1]
            fix = self._tracker_fix(node, t, last_known)
            if state is None:
                if fix is None:
                    continue
                try:
                    state = TrackerState.start(
                        node_id,
                        self.gatekeeper[node_id],
                        seed,
                        (t, fix),
                        r1=tracker_cfg.r1,
                        n_contours=tracker_cfg.n_contours,
                        half_angle=tracker_cfg.half_angle,
                        max_coast=tracker_cfg.max_coast,
                    )
                except TrackingError:
                    self._seed_fix[node_id] = (t, fix)
                    continue
                self.trackers[node_id] = state
                self._track_row(state, node, t, fix)
                continue
            bearing, contour = observe(
                state.zone, node.position, self.radio, self.rng_radio, tracker_cfg.bearing_noise_deg
            )
            reported, state = track_epoch(state, bearing, contour, t, fix, tracker_cfg.fusion_tolerance)
            self._track_row(state, node, t, reported)

    # ------------------------------------------------------------------ views

    def attackers(self) -> List[int]:
        return self.script.attackers

    def false_positives(self) -> List[int]:
        return sorted(i for i in self.flagged_at if i not in self.script)

    def tracking_errors(self) -> Dict[str, List[float]]:
        errors: Dict[str, List[float]] = {"triangulation": [], "multilateration": []}
        for row in self.logs.estimates:
            errors[row["method"]].append(row["error_m"])
        for row in self.logs.tracks:
            if row["error_m"] is not None and row["status"] != TrackStatus.LOST.value:
                errors["multilateration"].append(row["error_m"])
        return errors
