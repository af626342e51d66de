"""Scripted attacker behaviour"""

import math
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .geometry import Position, sector_of
from .models import AttackBehavior


class AttackScript:
    """Maps attacker node ids to the scripted step each one follows.

    Script entries are dealt round-robin over the attackers, so a two-entry
    script splits the attackers evenly between the two behaviours.
    """

    def __init__(self, assignments: Dict[int, object]):
        self.assignments = dict(assignments)

    @classmethod
    def assign(
        cls,
        node_ids: Sequence[int],
        fraction: float,
        script: Sequence,
        rng: np.random.Generator,
    ) -> "AttackScript":
        count = int(math.floor(fraction * len(node_ids) + 0.5))
        if count == 0 or not script:
            return cls({})
        chosen = sorted(int(i) for i in rng.choice(np.asarray(node_ids), size=count, replace=False))
        return cls({node_id: script[k % len(script)] for k, node_id in enumerate(chosen)})

    def __contains__(self, node_id: int) -> bool:
        return node_id in self.assignments

    def __len__(self) -> int:
        return len(self.assignments)

    @property
    def attackers(self) -> List[int]:
        return sorted(self.assignments)

    def active(self, node_id: int, t: float):
        step = self.assignments.get(node_id)
        if step is None or t < step.start_t:
            return None
        return step

    def behaves(self, node_id: int, t: float, behavior: AttackBehavior) -> bool:
        step = self.active(node_id, t)
        return step is not None and step.behavior == behavior

    def evidence(self, node_id: int, t: float, rng: np.random.Generator, honest_noise: float) -> float:
        """Per-epoch misbehaviour evidence an observer collects about a node"""
        step = self.active(node_id, t)
        if step is None:
            return float(rng.uniform(0.0, honest_noise)) if honest_noise > 0 else 0.0
        if step.behavior == AttackBehavior.DROP_PACKETS:
            return float(step.ratio)
        if step.behavior in (AttackBehavior.REPLAY_TOD, AttackBehavior.HIDE):
            return 1.0
        # key forgers keep forwarding; they are caught by votes and certificates
        return 0.0

    def forged_offset(self, node_id: int, t: float) -> float:
        """Seconds added to the ToA stamps of a replaying node"""
        step = self.active(node_id, t)
        if step is None or step.behavior != AttackBehavior.REPLAY_TOD:
            return 0.0
        return step.offset_ns * 1e-9

    def drop_ratio(self, node_id: int, t: float) -> float:
        step = self.active(node_id, t)
        if step is None or step.behavior != AttackBehavior.DROP_PACKETS:
            return 0.0
        return float(step.ratio)

    def hidden_from(self, node_id: int, t: float, center: Position, observer: Position) -> bool:
        """A hiding node ignores ranging requests coming from its scripted sector"""
        step = self.active(node_id, t)
        if step is None or step.behavior != AttackBehavior.HIDE or observer == center:
            return False
        return sector_of(center, observer) == step.sector

    def timeline(self, t_values: Iterable[float]) -> Dict[str, List[int]]:
        """Number of attackers active per behaviour at each time"""
        times = list(t_values)
        series = {b.value: [0] * len(times) for b in AttackBehavior}
        for node_id in self.attackers:
            for k, t in enumerate(times):
                step = self.active(node_id, t)
                if step is not None:
                    series[step.behavior.value][k] += 1
        return series


def victim_of(replayer: Position, neighbors: Sequence, exclude: Optional[int] = None) -> Optional[int]:
    """The nearest neighbour a replaying node sends stale stamps to"""
    usable = [n for n in neighbors if n.id != exclude]
    if not usable:
        return None
    return min(usable, key=lambda n: (n.position.distance_to(replayer), n.id)).id
