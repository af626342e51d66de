"""Modified PL&T: forward tracking zones of equal-area energy contours"""

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import config as defaults
from .config import debug_logger
from .errors import GeometryError, TrackingError
from .geometry import Position, angle_diff, bearing_deg, normalize_deg
from .localization import PositionEstimate
from .models import EstimateMethod, TrackStatus
from .nodes import Trajectory
from .radio import RadioModel, received_energy

_CONE_EPS = 1e-9  # degrees


@dataclass(frozen=True)
class TrackingZone:
    apex: Position
    heading: float
    half_angle: float = defaults.ZONE_HALF_ANGLE
    r1: float = defaults.ZONE_R1
    n_contours: int = defaults.ZONE_CONTOURS

    def __post_init__(self):
        if self.r1 <= 0:
            raise TrackingError(f"r1 must be > 0, got {self.r1}")
        if self.n_contours < 1:
            raise TrackingError(f"n_contours must be >= 1, got {self.n_contours}")
        if not 0.0 < self.half_angle <= defaults.MAX_HALF_ANGLE:
            raise TrackingError(f"half_angle must be in (0, 90], got {self.half_angle}")

    @property
    def radii(self) -> np.ndarray:
        """r_k = r1 * sqrt(k), k = 1..n: every annulus has area pi * r1^2"""
        return self.r1 * np.sqrt(np.arange(1, self.n_contours + 1, dtype=float))

    def band(self, k: int) -> Tuple[float, float]:
        radii = self.radii
        inner = 0.0 if k == 1 else float(radii[k - 2])
        return inner, float(radii[k - 1])

    def band_radius(self, k: int) -> float:
        inner, outer = self.band(k)
        return (inner + outer) / 2.0

    def in_cone(self, bearing: float) -> bool:
        return abs(angle_diff(bearing, self.heading)) <= self.half_angle + _CONE_EPS

    def annulus_areas(self) -> np.ndarray:
        squared = np.concatenate(([0.0], self.radii**2))
        return math.pi * np.diff(squared)


def predict_heading(p_prev: Position, p_curr: Position, previous_heading: Optional[float] = None) -> float:
    """Bearing of p_curr - p_prev; coincident points reuse `previous_heading`"""
    try:
        return bearing_deg(p_prev, p_curr)
    except GeometryError:
        if previous_heading is None:
            raise TrackingError("Coincident positions and no previous heading") from None
        return previous_heading


def build_zone(
    p_prev: Position,
    p_curr: Position,
    r1: float = defaults.ZONE_R1,
    n_contours: int = defaults.ZONE_CONTOURS,
    half_angle: float = defaults.ZONE_HALF_ANGLE,
    previous_heading: Optional[float] = None,
) -> TrackingZone:
    return TrackingZone(
        apex=p_curr,
        heading=predict_heading(p_prev, p_curr, previous_heading),
        half_angle=half_angle,
        r1=r1,
        n_contours=n_contours,
    )


def contour_index(
    zone: TrackingZone,
    received: float,
    tx_energy: float = 1.0,
    path_exponent: float = defaults.PATH_EXPONENT,
    d_ref: float = 1.0,
) -> Optional[int]:
    """Contour k with r_{k-1} < d <= r_k for the distance the energy implies; None when outside"""
    if received <= 0:
        raise TrackingError(f"Received energy must be > 0, got {received}")
    distance = (tx_energy / received) ** (1.0 / path_exponent) * d_ref
    index = bisect_left(zone.radii.tolist(), distance)
    if index >= zone.n_contours:
        return None
    return index + 1


def observe(
    zone: TrackingZone,
    true_position: Position,
    radio: RadioModel,
    rng: Optional[np.random.Generator] = None,
    bearing_noise_deg: float = 0.0,
    tx_energy: float = 1.0,
) -> Tuple[float, Optional[int]]:
    """Beam bearing and contour index seen from the zone apex"""
    distance = zone.apex.distance_to(true_position)
    if distance == 0.0:
        bearing = zone.heading
    else:
        bearing = bearing_deg(zone.apex, true_position)
    if rng is not None and bearing_noise_deg > 0:
        bearing = normalize_deg(bearing + rng.normal(0.0, bearing_noise_deg))
    energy = received_energy(tx_energy, distance, radio)
    return bearing, contour_index(zone, energy, tx_energy, radio.path_exponent)


def fuse_fix(
    zone: TrackingZone,
    contour_k: int,
    band_estimate: Position,
    fix: Optional[Position],
    tolerance: float,
) -> Position:
    """Keep a range-based fix only when it falls in the active band (+/- tolerance) and the cone"""
    if fix is None:
        return band_estimate
    inner, outer = zone.band(contour_k)
    distance = zone.apex.distance_to(fix)
    if not inner - tolerance <= distance <= outer + tolerance:
        return band_estimate
    if distance > 0.0 and not zone.in_cone(bearing_deg(zone.apex, fix)):
        return band_estimate
    return fix


@dataclass
class TrackerState:
    target_id: int
    observer_id: int
    last_two: List[Tuple[float, Position]]
    zone: TrackingZone
    method: EstimateMethod = EstimateMethod.MULTILATERATION
    status: TrackStatus = TrackStatus.LOCKED
    history: Trajectory = field(default_factory=Trajectory)
    coast_epochs: int = 0
    base_half_angle: float = defaults.ZONE_HALF_ANGLE
    max_coast: int = defaults.MAX_COAST_EPOCHS

    @classmethod
    def start(
        cls,
        target_id: int,
        observer_id: int,
        first: Tuple[float, Position],
        second: Tuple[float, Position],
        *,
        r1: float = defaults.ZONE_R1,
        n_contours: int = defaults.ZONE_CONTOURS,
        half_angle: float = defaults.ZONE_HALF_ANGLE,
        max_coast: int = defaults.MAX_COAST_EPOCHS,
        method: EstimateMethod = EstimateMethod.MULTILATERATION,
        previous_heading: Optional[float] = None,
    ) -> "TrackerState":
        if second[0] < first[0]:
            raise TrackingError("Tracker seed positions must be time-ordered")
        zone = build_zone(first[1], second[1], r1, n_contours, half_angle, previous_heading)
        state = cls(
            target_id=target_id,
            observer_id=observer_id,
            last_two=[first, second],
            zone=zone,
            method=method,
            base_half_angle=half_angle,
            max_coast=max_coast,
        )
        state.history.append(*second)
        return state


def coast_position(state: TrackerState, t: float) -> Position:
    """Constant-velocity extrapolation of the last two positions to time t"""
    (t0, p0), (t1, p1) = state.last_two
    if t1 <= t0:
        return p1
    fraction = (t - t1) / (t1 - t0)
    return Position(p1.x + (p1.x - p0.x) * fraction, p1.y + (p1.y - p0.y) * fraction, p1.z)


def plt_step(
    state: TrackerState,
    beam_bearing: float,
    contour_k: Optional[int],
    t: float,
    *,
    fix: Optional[Position] = None,
    fusion_tolerance: float = 0.0,
) -> Tuple[Optional[PositionEstimate], TrackerState]:
    """One tracking epoch; the state is advanced in place and returned.

    In the cone, the estimate is the apex pushed along the beam to the middle
    of the observed band (or a fused range fix). Outside the cone the tracker
    coasts with a widened zone; outside the last contour it is Lost.
    """
    zone = state.zone
    if contour_k is None:
        state.status = TrackStatus.LOST
        debug_logger.info(f"Tracking: target {state.target_id} outside contour {zone.n_contours}, lost")
        return None, state

    if not zone.in_cone(beam_bearing):
        state.coast_epochs += 1
        if state.coast_epochs > state.max_coast:
            state.status = TrackStatus.LOST
            return None, state
        state.status = TrackStatus.COASTING
        widened = min(zone.half_angle + state.base_half_angle, defaults.MAX_HALF_ANGLE)
        state.zone = TrackingZone(zone.apex, zone.heading, widened, zone.r1, zone.n_contours)
        return None, state

    band_estimate = zone.apex.offset(zone.band_radius(contour_k), beam_bearing)
    position = fuse_fix(zone, contour_k, band_estimate, fix, fusion_tolerance)
    inner, outer = zone.band(contour_k)
    estimate = PositionEstimate(
        position=position,
        residual=(outer - inner) / 2.0,
        method=state.method,
        epoch=t,
        n_fixes=0 if position is band_estimate else 1,
    )
    apex_t = state.last_two[1][0]
    state.last_two = [(apex_t, zone.apex), (t, position)]
    state.zone = build_zone(
        zone.apex, position, zone.r1, zone.n_contours, state.base_half_angle, zone.heading
    )
    state.status = TrackStatus.LOCKED
    state.coast_epochs = 0
    state.history.append(t, position)
    return estimate, state


def reacquire(state: TrackerState, fix: Position, t: float) -> TrackerState:
    """Re-seed a Lost or Coasting tracker from its last locked position and a fresh fix"""
    last_t, last_p = state.last_two[1]
    state.zone = build_zone(
        last_p, fix, state.zone.r1, state.zone.n_contours, state.base_half_angle, state.zone.heading
    )
    state.last_two = [(last_t, last_p), (t, fix)]
    state.status = TrackStatus.LOCKED
    state.coast_epochs = 0
    state.history.append(t, fix)
    return state


def track_epoch(
    state: TrackerState,
    beam_bearing: float,
    contour_k: Optional[int],
    t: float,
    fix: Optional[Position] = None,
    fusion_tolerance: float = 0.0,
) -> Tuple[Optional[Position], TrackerState]:
    """Caller policy around plt_step: the reported position for this epoch.

    A Lost tracker, or one coasting for a second epoch, re-acquires from the
    fresh fix. Coasting epochs report the constant-velocity extrapolation.
    """
    if state.status == TrackStatus.LOST or (
        state.status == TrackStatus.COASTING and state.coast_epochs >= 2
    ):
        if fix is not None:
            reacquire(state, fix, t)
            return fix, state
    estimate, state = plt_step(state, beam_bearing, contour_k, t, fix=fix, fusion_tolerance=fusion_tolerance)
    if estimate is not None:
        return estimate.position, state
    if state.status == TrackStatus.LOST:
        if fix is not None:
            reacquire(state, fix, t)
            return fix, state
        return None, state
    return coast_position(state, t), state
