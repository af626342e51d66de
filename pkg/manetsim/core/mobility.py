"""Random waypoint kinematics and relative mobility"""

import math
from dataclasses import replace
from typing import Tuple

import numpy as np

from .errors import InsufficientDataError
from .geometry import Position
from .nodes import NodeState

ARRIVAL_EPS = 1e-9  # meters

Bounds = Tuple[float, float]  # (width, height), origin at (0, 0)
SpeedRange = Tuple[float, float]


def draw_leg(rng: np.random.Generator, bounds: Bounds, speed_range: SpeedRange) -> Tuple[Position, float]:
    """Uniform waypoint inside bounds and uniform speed in [v_min, v_max]"""
    width, height = bounds
    waypoint = Position(float(rng.uniform(0.0, width)), float(rng.uniform(0.0, height)))
    speed = float(rng.uniform(speed_range[0], speed_range[1]))
    return waypoint, speed


def advance_waypoint(
    node: NodeState,
    dt: float,
    rng: np.random.Generator,
    bounds: Bounds,
    speed_range: SpeedRange,
) -> NodeState:
    """Move a node toward its waypoint for dt seconds (zero pause time).

    A node sitting on its waypoint draws a new leg first. A node that reaches
    its waypoint during the step stops there and draws the next leg, so the
    displacement per step never exceeds speed * dt.
    """
    if dt <= 0:
        return node
    position, waypoint, speed = node.position, node.waypoint, node.speed
    if position.distance_to(waypoint) <= ARRIVAL_EPS:
        waypoint, speed = draw_leg(rng, bounds, speed_range)

    remaining = position.distance_to(waypoint)
    step = speed * dt
    if step >= remaining:
        position = waypoint
        waypoint, speed = draw_leg(rng, bounds, speed_range)
    else:
        position = position.lerp(waypoint, step / remaining)
    return replace(node, position=position, waypoint=waypoint, speed=speed)


def relative_mobility(a: NodeState, b: NodeState, window: float, now: float | None = None) -> float:
    """|d(t2) - d(t1)| / (t2 - t1) over the shared window ending at `now`; lower is more stable"""
    if now is None:
        now = min(a.trajectory.last()[0], b.trajectory.last()[0])
    wa = a.trajectory.window(now - window, now)
    wb = b.trajectory.window(now - window, now)
    if len(wa) < 2 or len(wb) < 2:
        raise InsufficientDataError(
            f"Relative mobility of {a.id},{b.id} needs 2 samples each in the window"
        )
    t1 = max(wa.times[0], wb.times[0])
    t2 = min(wa.times[-1], wb.times[-1])
    if t2 <= t1:
        raise InsufficientDataError(f"Nodes {a.id},{b.id} share no time span in the window")
    d1 = wa.position_at(t1).distance_to(wb.position_at(t1))
    d2 = wa.position_at(t2).distance_to(wb.position_at(t2))
    return abs(d2 - d1) / (t2 - t1)


def radial_speed(a: NodeState, b: NodeState) -> float:
    """Instantaneous |d/dt distance(a, b)| from current velocities (no history needed)"""
    dx = b.position.x - a.position.x
    dy = b.position.y - a.position.y
    distance = math.hypot(dx, dy)
    if distance == 0.0:
        return 0.0
    avx, avy = a.velocity()
    bvx, bvy = b.velocity()
    return abs((dx * (bvx - avx) + dy * (bvy - avy)) / distance)


def node_mobility(node: NodeState, neighbors: list[NodeState], window: float, now: float) -> float:
    """Mean relative mobility of a node against its one-hop neighbours"""
    if not neighbors:
        return 0.0
    total = 0.0
    for other in neighbors:
        try:
            total += relative_mobility(node, other, window, now)
        except InsufficientDataError:
            total += radial_speed(node, other)
    return total / len(neighbors)


def mobility_matrix(nodes: list[NodeState], window: float, now: float) -> np.ndarray:
    """Pairwise relative mobility over one shared window, vectorized.

    Falls back to instantaneous radial speed while the shared history is
    shorter than one sample interval.
    """
    if not nodes:
        return np.zeros((0, 0))
    histories = [node.trajectory for node in nodes]
    if all(len(h) >= 2 for h in histories):
        t1 = max(now - window, max(h.times[0] for h in histories))
        if now > t1:
            p1 = np.array([_xy(h.position_at(t1)) for h in histories])
            p2 = np.array([_xy(h.position_at(now)) for h in histories])
            d1 = np.linalg.norm(p1[:, None, :] - p1[None, :, :], axis=2)
            d2 = np.linalg.norm(p2[:, None, :] - p2[None, :, :], axis=2)
            return np.abs(d2 - d1) / (now - t1)

    pos = np.array([_xy(node.position) for node in nodes])
    vel = np.array([node.velocity() for node in nodes])
    delta = pos[None, :, :] - pos[:, None, :]
    dvel = vel[None, :, :] - vel[:, None, :]
    dist = np.linalg.norm(delta, axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        radial = np.abs(np.sum(delta * dvel, axis=2)) / dist
    return np.nan_to_num(radial, nan=0.0, posinf=0.0)


def _xy(position: Position) -> Tuple[float, float]:
    return position.x, position.y
