"""Node state and position history"""

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .errors import ConfigError, InsufficientDataError, TrustError
from .geometry import Position
from .models import Role
from .pki import KeyPair

_GUARDED_ROLES = (Role.CLUSTER_HEAD, Role.RA, Role.REFERENCE)


class Trajectory:
    """Time-stamped position history; times are non-decreasing"""

    def __init__(self, samples: Optional[List[Tuple[float, Position]]] = None):
        self.times: List[float] = []
        self.positions: List[Position] = []
        for t, p in samples or []:
            self.append(t, p)

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self):
        return iter(zip(self.times, self.positions))

    def append(self, t: float, position: Position) -> None:
        if self.times and t < self.times[-1]:
            raise InsufficientDataError(f"Trajectory sample at t={t} precedes t={self.times[-1]}")
        self.times.append(t)
        self.positions.append(position)

    def last(self) -> Tuple[float, Position]:
        if not self.times:
            raise InsufficientDataError("Empty trajectory")
        return self.times[-1], self.positions[-1]

    def window(self, t_from: float, t_to: float) -> "Trajectory":
        return Trajectory([(t, p) for t, p in self if t_from <= t <= t_to])

    def position_at(self, t: float) -> Position:
        """Linear interpolation, clamped to the first/last sample"""
        if not self.times:
            raise InsufficientDataError("Empty trajectory")
        if t <= self.times[0]:
            return self.positions[0]
        if t >= self.times[-1]:
            return self.positions[-1]
        i = bisect_right(self.times, t)
        t0, t1 = self.times[i - 1], self.times[i]
        if t1 == t0:
            return self.positions[i]
        return self.positions[i - 1].lerp(self.positions[i], (t - t0) / (t1 - t0))


@dataclass(slots=True)
class NodeState:
    id: int
    position: Position
    waypoint: Position
    speed: float
    role: Role = Role.MEMBER
    residual_energy: float = 1.0
    trust: float = 1.0
    behaviour: float = 0.0
    key_pair: Optional[KeyPair] = None
    connectivity_degree: int = 0
    cluster_id: Optional[int] = None
    is_attacker: bool = False
    trajectory: Trajectory = field(default_factory=Trajectory)

    def __post_init__(self):
        for name in ("trust", "behaviour", "residual_energy"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"Node {self.id}: {name}={value} outside [0, 1]")
        if self.speed < 0:
            raise ConfigError(f"Node {self.id}: negative speed")

    @property
    def flagged(self) -> bool:
        return self.role == Role.MALICIOUS

    def assign_role(self, role: Role) -> None:
        if self.flagged and role in _GUARDED_ROLES:
            raise TrustError(f"Node {self.id} is flagged malicious and cannot hold role {role.value}")
        if self.flagged and role == Role.MEMBER:
            return
        self.role = role

    def velocity(self) -> Tuple[float, float]:
        dx = self.waypoint.x - self.position.x
        dy = self.waypoint.y - self.position.y
        norm = math.hypot(dx, dy)
        if norm == 0.0:
            return 0.0, 0.0
        return self.speed * dx / norm, self.speed * dy / norm

    def record(self, t: float) -> None:
        self.trajectory.append(t, self.position)
