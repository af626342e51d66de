"""Cluster head, per-sector RA (OCF) and reference-triple (BCF) elections"""

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import config as defaults
from .config import debug_logger
from .errors import ConfigError, ElectionError
from .geometry import Position, pairwise_distances, sector_of, triangle_area

Metrics = Tuple[float, float, float, float]

_WEIGHT_SUM_TOL = 1e-9
_WEIGHT_EQ_TOL = 1e-12


@dataclass(frozen=True)
class CriteriaWeights:
    """Four weights summing to 1 with w1 > w2 = w3 > w4"""

    w1: float
    w2: float
    w3: float
    w4: float

    def __post_init__(self):
        values = self.as_tuple()
        if any(w < 0 for w in values):
            raise ConfigError(f"Criteria weights must be non-negative: {values}")
        if abs(math.fsum(values) - 1.0) > _WEIGHT_SUM_TOL:
            raise ConfigError(f"Criteria weights must sum to 1: {values}")
        if not (self.w1 > self.w2 and abs(self.w2 - self.w3) <= _WEIGHT_EQ_TOL and self.w3 > self.w4):
            raise ConfigError(f"Criteria weights must satisfy w1 > w2 = w3 > w4: {values}")

    def as_tuple(self) -> Metrics:
        return (self.w1, self.w2, self.w3, self.w4)


@dataclass
class ClusterState:
    cluster_id: int
    member_ids: List[int] = field(default_factory=list)
    centroid: Optional[Position] = None
    ca_id: Optional[int] = None
    ra_ids: Dict[int, int] = field(default_factory=dict)  # sector -> RA id (the DDMZ)
    reference_ids: Tuple[int, ...] = ()
    cluster_size: int = 2

    @property
    def role_holders(self) -> List[int]:
        held = [] if self.ca_id is None else [self.ca_id]
        return held + sorted(self.ra_ids.values()) + list(self.reference_ids)

    def sector_of_ra(self, node_id: int) -> Optional[int]:
        for sector, ra_id in self.ra_ids.items():
            if ra_id == node_id:
                return sector
        return None

    def vacate(self, node_id: int) -> None:
        """Drop a node from every role it holds in this cluster"""
        if self.ca_id == node_id:
            self.ca_id = None
        sector = self.sector_of_ra(node_id)
        if sector is not None:
            del self.ra_ids[sector]
        if node_id in self.reference_ids:
            self.reference_ids = ()


OCF_DEFAULT = CriteriaWeights(*defaults.OCF_WEIGHTS)
BCF_DEFAULT = CriteriaWeights(*defaults.BCF_WEIGHTS)


def _weighted(metrics: Sequence[float], weights: CriteriaWeights) -> float:
    if len(metrics) != 4:
        raise ElectionError(f"Expected 4 metrics, got {len(metrics)}")
    for value in metrics:
        if not 0.0 <= value <= 1.0:
            raise ElectionError(f"Metric {value} outside [0, 1]")
    return sum(w * x for w, x in zip(weights.as_tuple(), metrics))


def ocf(x: Sequence[float], w: CriteriaWeights = OCF_DEFAULT) -> float:
    """Optimum criteria: trust, stability, residual energy, connectivity"""
    return _weighted(x, w)


def bcf(y: Sequence[float], v: CriteriaWeights = BCF_DEFAULT) -> float:
    """Best criteria: closeness to the head, stability, residual energy, connectivity"""
    return _weighted(y, v)


@dataclass(frozen=True)
class ElectionCandidate:
    node_id: int
    position: Position
    hop_count: int
    mobility: float
    degree: int
    trust: float
    residual_energy: float
    distance_to_head: float = 0.0
    verified: bool = True


def stability(mobility: float, mobility_scale: float = 1.0) -> float:
    """1 / (1 + m) with m in units of `mobility_scale`"""
    return 1.0 / (1.0 + mobility / mobility_scale)


def normalize_metrics(
    candidate: ElectionCandidate,
    max_degree: int,
    mobility_scale: float,
    transmission_range: float,
) -> Tuple[Metrics, Metrics]:
    """(OCF metrics, BCF metrics) mapped into [0, 1]"""
    steady = stability(candidate.mobility, mobility_scale)
    connectivity = candidate.degree / max_degree if max_degree > 0 else 0.0
    closeness = min(max(1.0 - candidate.distance_to_head / transmission_range, 0.0), 1.0)
    x = (candidate.trust, steady, candidate.residual_energy, connectivity)
    y = (closeness, steady, candidate.residual_energy, connectivity)
    return x, y


def eligible_heads(candidates: Sequence[ElectionCandidate], cluster_size: int) -> List[ElectionCandidate]:
    return [c for c in candidates if c.verified and c.hop_count < cluster_size]


def elect_cluster_head(candidates: Sequence[ElectionCandidate], cluster_size: int) -> int:
    """Tournament winner: lowest mobility, then highest degree, then lowest id"""
    eligible = eligible_heads(candidates, cluster_size)
    if not eligible:
        raise ElectionError(f"No eligible cluster head among {len(candidates)} candidates")
    return min(eligible, key=lambda c: (c.mobility, -c.degree, c.node_id)).node_id


@dataclass(frozen=True)
class SectorElection:
    sector: int
    node_id: int
    score: float
    candidates: int
    reply_deadline: float


def elect_ras(
    head: Position,
    candidates: Sequence[ElectionCandidate],
    w: CriteriaWeights = OCF_DEFAULT,
    *,
    max_degree: int,
    mobility_scale: float,
    transmission_range: float,
    reply_window: float = defaults.SECTOR_REPLY_WINDOW,
    start: float = 0.0,
) -> Dict[int, SectorElection]:
    """Per sector around the head, argmax OCF among one-hop repliers (ties to lowest id).

    Sectors with no replier are absent from the result (vacant RA slot).
    """
    by_sector: Dict[int, List[Tuple[float, int]]] = {}
    for c in candidates:
        distance = head.distance_to(c.position)
        if not c.verified or distance == 0.0 or distance > transmission_range:
            continue
        x, _ = normalize_metrics(c, max_degree, mobility_scale, transmission_range)
        by_sector.setdefault(sector_of(head, c.position), []).append((ocf(x, w), c.node_id))

    elected = {}
    for sector in sorted(by_sector):
        score, node_id = min(by_sector[sector], key=lambda item: (-item[0], item[1]))
        elected[sector] = SectorElection(
            sector, node_id, score, len(by_sector[sector]), start + sector * reply_window
        )
    return elected


@dataclass(frozen=True)
class ReferenceElection:
    node_ids: Tuple[int, int, int]
    scores: Tuple[float, float, float]
    spread_score: float
    pairwise: Tuple[float, float, float]
    candidates: int
    dropped: int
    geometry_warning: bool


def equidistance_score(points: Sequence[Position], spread_penalty: float = defaults.SPREAD_PENALTY) -> float:
    """min pairwise distance - lambda * stddev(pairwise distances)"""
    distances = pairwise_distances(points)
    return min(distances) - spread_penalty * float(np.std(distances))


def elect_references(
    head: Position,
    candidates: Sequence[ElectionCandidate],
    v: CriteriaWeights = BCF_DEFAULT,
    bcf_threshold: float = defaults.BCF_THRESHOLD,
    *,
    max_degree: int,
    mobility_scale: float,
    transmission_range: float,
    top_k: int = defaults.REFERENCE_TOP_K,
    spread_penalty: float = defaults.SPREAD_PENALTY,
) -> ReferenceElection:
    """Most nearly equidistant triple among the top-K BCF candidates"""
    scored = []
    for c in candidates:
        if not c.verified:
            continue
        _, y = normalize_metrics(c, max_degree, mobility_scale, transmission_range)
        score = bcf(y, v)
        if score >= bcf_threshold:
            scored.append((score, c))
    if len(scored) < 3:
        raise ElectionError(f"Only {len(scored)} reference candidates reach BCF {bcf_threshold}")

    scored.sort(key=lambda item: (-item[0], item[1].node_id))
    pool = scored[: min(top_k, len(scored))]

    best: Optional[Tuple] = None
    for triple in combinations(pool, 3):
        ordered = sorted(triple, key=lambda item: item[1].node_id)
        spread = equidistance_score([c.position for _, c in ordered], spread_penalty)
        key = (-spread, -sum(s for s, _ in ordered), tuple(c.node_id for _, c in ordered))
        if best is None or key < best[0]:
            best = (key, ordered, spread)

    _, ordered, spread = best
    positions = [c.position for _, c in ordered]
    warning = triangle_area(*positions) <= defaults.COLLINEAR_EPS
    if warning:
        debug_logger.info(f"Elections: reference triple {[c.node_id for _, c in ordered]} is collinear")
    return ReferenceElection(
        node_ids=tuple(c.node_id for _, c in ordered),
        scores=tuple(s for s, _ in ordered),
        spread_score=spread,
        pairwise=tuple(pairwise_distances(positions)),
        candidates=len(scored),
        dropped=len(candidates) - len(scored),
        geometry_warning=warning,
    )
