"""Trust chaining, introducer protocol, neighbour voting and RA gating"""

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from . import config as defaults
from .config import debug_logger
from .errors import TrustError
from .models import AggregationRule, GateAction, Role, Verdict, VerdictReason
from .nodes import NodeState
from .pki import Certificate, KeyDirectory, verify_certificate

Vote = Tuple[int, bytes]  # (voter id, public key the voter was shown for the target)


def _check_unit(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise TrustError(f"{name}={value} outside [0, 1]")


def chain_trust(v_observer_introducer: float, v_introducer_target: float) -> float:
    """1 - (1 - V_ik,t) ** V_s,ik"""
    _check_unit("v_observer_introducer", v_observer_introducer)
    _check_unit("v_introducer_target", v_introducer_target)
    return 1.0 - (1.0 - v_introducer_target) ** v_observer_introducer


def aggregate_paths(values: Sequence[float], rule: AggregationRule = AggregationRule.MEAN) -> float:
    if not values:
        raise TrustError("Cannot aggregate an empty set of trust paths")
    for value in values:
        _check_unit("path trust", value)
    if rule == AggregationRule.MIN:
        return min(values)
    if rule == AggregationRule.MAX:
        return max(values)
    return math.fsum(sorted(values)) / len(values)


class TrustLedger:
    """Directed trust (observer, subject) and per-subject behaviour scores.

    Unknown directed entries fall back to the subject's baseline trust.
    """

    def __init__(self, baseline: Optional[Callable[[int], float]] = None):
        self._trust: Dict[Tuple[int, int], float] = {}
        self._behaviour: Dict[int, float] = {}
        self._baseline = baseline or (lambda subject: 1.0)

    def trust(self, observer: int, subject: int) -> float:
        return self._trust.get((observer, subject), self._baseline(subject))

    def set_trust(self, observer: int, subject: int, value: float) -> None:
        _check_unit("trust", value)
        self._trust[(observer, subject)] = value

    def behaviour(self, subject: int) -> float:
        return self._behaviour.get(subject, 0.0)

    def set_behaviour(self, subject: int, value: float) -> None:
        _check_unit("behaviour", value)
        self._behaviour[subject] = value

    def behaviour_scores(self) -> Dict[int, float]:
        return dict(self._behaviour)


def update_trust(
    ledger: TrustLedger, observer: int, subject: int, observation: float, rate: float = 0.3
) -> float:
    """Move directed trust toward (1 - misbehaviour evidence)"""
    _check_unit("observation", observation)
    value = (1.0 - rate) * ledger.trust(observer, subject) + rate * (1.0 - observation)
    value = min(max(value, 0.0), 1.0)
    ledger.set_trust(observer, subject, value)
    return value


def update_behaviour(
    ledger: TrustLedger, subject: int, observation: float, alpha: float = defaults.BEHAVIOUR_ALPHA
) -> float:
    """EWMA of per-epoch misbehaviour evidence"""
    _check_unit("observation", observation)
    score = (1.0 - alpha) * ledger.behaviour(subject) + alpha * observation
    score = min(max(score, 0.0), 1.0)
    ledger.set_behaviour(subject, score)
    return score


def is_misbehaving(score: float, limit: float = defaults.MISBEHAVIOUR_LIMIT) -> bool:
    return score > limit


@dataclass(frozen=True)
class IntroducerReply:
    introducer_id: int
    target_id: int
    target_public_key: bytes
    trust_value: float
    signature: bytes = b""

    def payload(self) -> bytes:
        return (
            f"{self.introducer_id}|{self.target_id}|{self.target_public_key.hex()}|"
            f"{self.trust_value!r}"
        ).encode()


def introduce(
    ra: NodeState, requester_id: int, target_id: int, ledger: TrustLedger, directory: KeyDirectory
) -> IntroducerReply:
    """Signed {Pk_t, V_ra,t} from a sector RA"""
    if ra.role != Role.RA:
        raise TrustError(f"Node {ra.id} is not an RA and cannot introduce")
    if not directory.is_registered(target_id):
        raise TrustError(f"Target {target_id} has no registered key")
    introducer_keys = directory.keypair(ra.id)
    unsigned = IntroducerReply(
        introducer_id=ra.id,
        target_id=target_id,
        target_public_key=directory.public_key(target_id),
        trust_value=ledger.trust(ra.id, target_id),
    )
    signature = directory.signer.sign(introducer_keys.private_key, unsigned.payload())
    debug_logger.info(f"Trust: RA {ra.id} introduces {target_id} to {requester_id}")
    return replace(unsigned, signature=signature)


def introduce_all(
    ras_by_sector: Dict[int, NodeState],
    requester_sector: int,
    target_sector: int,
    requester_id: int,
    target_id: int,
    ledger: TrustLedger,
    directory: KeyDirectory,
) -> List[IntroducerReply]:
    """Reply bundle: the requester's sector RA, plus the target's sector RA when different"""
    replies = []
    for sector in dict.fromkeys((requester_sector, target_sector)):
        ra = ras_by_sector.get(sector)
        if ra is not None and ra.id != target_id:
            replies.append(introduce(ra, requester_id, target_id, ledger, directory))
    return replies


def verify_reply(reply: IntroducerReply, directory: KeyDirectory) -> bool:
    if not directory.is_registered(reply.introducer_id):
        return False
    if not 0.0 <= reply.trust_value <= 1.0:
        return False
    return directory.signer.verify(
        directory.public_key(reply.introducer_id), reply.payload(), reply.signature
    )


@dataclass(frozen=True)
class Detection:
    requester: int
    target: int
    aggregate_trust: float
    votes_for: int
    votes_total: int
    verdict: Verdict
    reason: VerdictReason = VerdictReason.NONE
    t: float = 0.0

    def as_row(self) -> dict:
        return {
            "t": self.t,
            "requester": self.requester,
            "target": self.target,
            "aggregate_trust": self.aggregate_trust,
            "votes_for": self.votes_for,
            "votes_total": self.votes_total,
            "verdict": self.verdict.value,
            "reason": self.reason.value,
        }


def detect_malicious(
    requester: NodeState,
    target_id: int,
    replies: Iterable[IntroducerReply],
    neighbor_votes: Iterable[Vote],
    trust_threshold: float,
    ledger: TrustLedger,
    directory: KeyDirectory,
    rule: AggregationRule = AggregationRule.MEAN,
    now: float = 0.0,
) -> Detection:
    """Verdict from signed introducer replies, then strict-majority key agreement"""
    valid = [
        r for r in replies if r.target_id == target_id and verify_reply(r, directory)
    ]
    if not valid:
        raise TrustError(f"No verifiable introducer reply for target {target_id}")

    chained = [chain_trust(ledger.trust(requester.id, r.introducer_id), r.trust_value) for r in valid]
    aggregate = aggregate_paths(chained, rule)
    votes = list(neighbor_votes)

    key_counts = Counter(r.target_public_key for r in valid)
    announced = min(key_counts, key=lambda key: (-key_counts[key], key))
    votes_for = sum(1 for _, key in votes if key == announced)

    def verdict(value: Verdict, reason: VerdictReason = VerdictReason.NONE) -> Detection:
        return Detection(requester.id, target_id, aggregate, votes_for, len(votes), value, reason, now)

    if aggregate < trust_threshold:
        return verdict(Verdict.MALICIOUS, VerdictReason.LOW_TRUST)
    if not votes:
        raise TrustError(f"No neighbour votes on the key of target {target_id}")
    if 2 * votes_for > len(votes):
        return verdict(Verdict.HONEST)
    return verdict(Verdict.MALICIOUS, VerdictReason.KEY_DISPUTE)


@dataclass
class GateDecision:
    action: GateAction
    ra_id: int
    node_id: int
    reasons: List[str] = field(default_factory=list)
    alert_recipients: Tuple[int, ...] = ()

    @property
    def forwarded(self) -> bool:
        return self.action == GateAction.FORWARD


def certificate_valid(
    certificate: Optional[Certificate], node_id: int, directory: KeyDirectory, now: float
) -> bool:
    if certificate is None or certificate.subject_id != node_id:
        return False
    if not directory.is_registered(certificate.issuer_id):
        return False
    if certificate.subject_public_key != directory.public_key(node_id):
        return False
    return verify_certificate(
        certificate, directory.public_key(certificate.issuer_id), now, directory.signer
    )


def ra_gate(
    ra: NodeState,
    node: NodeState,
    certificate: Optional[Certificate],
    directory: KeyDirectory,
    ledger: TrustLedger,
    now: float,
    trust_threshold: float = defaults.TRUST_THRESHOLD,
    misbehaviour_limit: float = defaults.MISBEHAVIOUR_LIMIT,
    sector_neighbors: Sequence[int] = (),
) -> GateDecision:
    """Forward a request to the CA only for an authenticated, trusted, well-behaved node"""
    reasons = []
    if not certificate_valid(certificate, node.id, directory, now):
        reasons.append("certificate")
    if ledger.trust(ra.id, node.id) < trust_threshold:
        reasons.append("trust")
    if is_misbehaving(ledger.behaviour(node.id), misbehaviour_limit):
        reasons.append("behaviour")
    if not reasons:
        return GateDecision(GateAction.FORWARD, ra.id, node.id)
    recipients = tuple(sorted(n for n in sector_neighbors if n != node.id))
    debug_logger.info(f"Trust: RA {ra.id} rejects node {node.id} ({', '.join(reasons)})")
    return GateDecision(GateAction.REJECT, ra.id, node.id, reasons, recipients)
