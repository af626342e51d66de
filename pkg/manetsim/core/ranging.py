"""Range and angle measurements from ToA/ToD management packets"""

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import config as defaults
from .config import debug_logger
from .errors import InsufficientDataError, OutOfRangeError
from .geometry import Position, bearing_deg, normalize_deg
from .models import RangeStatus
from .radio import RadioModel, TimestampPair, timestamp_pairs

READINGS = 3

# A fixed position or a function of time (a node moving during the exchange)
Located = Union[Position, Callable[[float], Position]]


@dataclass
class RangeDecision:
    distance: Optional[float]
    status: RangeStatus


@dataclass
class RangeMeasurement:
    reference_id: int
    target_id: int
    t: float
    pairs: List[List[TimestampPair]] = field(default_factory=list)
    readings: List[float] = field(default_factory=list)
    n_packets: int = defaults.PACKETS_PER_READING
    distance: Optional[float] = None
    aoa: Optional[float] = None
    status: RangeStatus = RangeStatus.REJECTED
    attempts: int = 0
    clamped: bool = False

    @property
    def usable(self) -> bool:
        return self.status != RangeStatus.REJECTED and self.distance is not None

    def as_row(self) -> dict:
        readings = list(self.readings) + [None] * (READINGS - len(self.readings))
        return {
            "t": self.t,
            "reference_id": self.reference_id,
            "target_id": self.target_id,
            "reading1": readings[0],
            "reading2": readings[1],
            "reading3": readings[2],
            "status": self.status.value,
            "final_distance": self.distance,
            "aoa": self.aoa,
            "attempts": self.attempts,
            "clamped": self.clamped,
        }


def _flight_range(pairs: Sequence[TimestampPair], speed: float) -> Tuple[float, bool]:
    if not pairs:
        raise InsufficientDataError("range_from_packets needs at least one (ToD, ToA) pair")
    mean_flight = math.fsum(toa - tod for tod, toa in pairs) / len(pairs)
    distance = speed * mean_flight
    if distance < 0.0:
        return 0.0, True
    return distance, False


def range_from_packets(pairs: Sequence[TimestampPair], speed: float) -> float:
    """speed * mean(ToA - ToD); a negative mean (noise) clamps to 0"""
    distance, clamped = _flight_range(pairs, speed)
    if clamped:
        debug_logger.info(f"Ranging: negative mean flight time over {len(pairs)} packets clamped to 0")
    return distance


def accept_range(readings: Sequence[float], threshold: float = defaults.RANGE_ACCEPT_THRESHOLD) -> RangeDecision:
    """Mutual-consistency check over three repeated readings of one pair.

    Accepted when every reading is within `threshold` of the mean of all
    three; PartialAccept when some pair agrees within `threshold` of its own
    mean (the closest pair wins); otherwise Rejected.
    """
    if len(readings) != READINGS:
        raise InsufficientDataError(f"accept_range expects {READINGS} readings, got {len(readings)}")
    ordered = sorted(float(r) for r in readings)
    mean = math.fsum(ordered) / READINGS
    if all(abs(r - mean) <= threshold for r in ordered):
        return RangeDecision(mean, RangeStatus.ACCEPTED)

    best = None
    for a, b in combinations(ordered, 2):
        pair_mean = (a + b) / 2.0
        spread = b - a
        if abs(a - pair_mean) <= threshold and (best is None or spread < best[0]):
            best = (spread, pair_mean)
    if best is not None:
        return RangeDecision(best[1], RangeStatus.PARTIAL_ACCEPT)
    return RangeDecision(None, RangeStatus.REJECTED)


def _at(located: Located, t: float) -> Position:
    return located(t) if callable(located) else located


def measure_aoa(
    ref,
    target,
    noise_deg: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    transmission_range: float = defaults.TRANSMISSION_RANGE,
) -> float:
    """Bearing from ref to target with Gaussian noise, normalized to [0, 360)"""
    ref_pos = getattr(ref, "position", ref)
    target_pos = getattr(target, "position", target)
    distance = ref_pos.distance_to(target_pos)
    if distance > transmission_range:
        raise OutOfRangeError(f"Target {distance:.2f} m away exceeds range {transmission_range} m")
    bearing = bearing_deg(ref_pos, target_pos)
    if rng is not None and noise_deg > 0:
        bearing += rng.normal(0.0, noise_deg)
    return normalize_deg(bearing)


def measure_range(
    reference: Located,
    target: Located,
    radio: RadioModel,
    rng: np.random.Generator,
    *,
    reference_id: int = 0,
    target_id: int = 0,
    n_packets: int = defaults.PACKETS_PER_READING,
    threshold: float = defaults.RANGE_ACCEPT_THRESHOLD,
    max_retries: int = defaults.MAX_RANGE_RETRIES,
    forged_offset: float = 0.0,
    exchange_start: float = 0.0,
    packet_interval: float = 0.0,
    aoa_noise_deg: Optional[float] = None,
    drop_ratio: float = 0.0,
) -> RangeMeasurement:
    """Three readings of `n_packets` packets from target to reference.

    Rejected batches are re-measured up to `max_retries` times, after which
    the reference abstains (status Rejected, no distance). Positions are
    sampled at every packet's send time. A target dropping packets loses
    each one with probability `drop_ratio`; a reading with no packets left
    fails the whole attempt.
    """
    start_ref, start_target = _at(reference, exchange_start), _at(target, exchange_start)
    if not radio.in_range(start_ref, start_target):
        raise OutOfRangeError(
            f"Target {target_id} is out of range of reference {reference_id} "
            f"({start_ref.distance_to(start_target):.2f} m)"
        )
    measurement = RangeMeasurement(reference_id, target_id, exchange_start, n_packets=n_packets)
    if aoa_noise_deg is not None:
        measurement.aoa = measure_aoa(start_ref, start_target, aoa_noise_deg, rng, radio.transmission_range)

    packet_index = 0
    for attempt in range(1, max_retries + 2):
        measurement.attempts = attempt
        batches, readings, clamped = [], [], False
        for _ in range(READINGS):
            times = [exchange_start + (packet_index + p) * packet_interval for p in range(n_packets)]
            packet_index += n_packets
            if drop_ratio > 0:
                times = [t for t in times if rng.random() >= drop_ratio]
            pairs = timestamp_pairs(
                [_at(target, t) for t in times],
                [_at(reference, t) for t in times],
                times,
                radio,
                rng,
                forged_offset,
            )
            batches.append(pairs)
            if pairs:
                distance, was_clamped = _flight_range(pairs, radio.propagation_speed)
                readings.append(distance)
                clamped = clamped or was_clamped

        measurement.pairs, measurement.readings, measurement.clamped = batches, readings, clamped
        if len(readings) == READINGS:
            decision = accept_range(readings, threshold)
            measurement.status, measurement.distance = decision.status, decision.distance
            if decision.status != RangeStatus.REJECTED:
                return measurement
        debug_logger.info(
            f"Ranging: {reference_id}->{target_id} attempt {attempt} rejected, readings={readings}"
        )

    measurement.status, measurement.distance = RangeStatus.REJECTED, None
    debug_logger.info(f"Ranging: reference {reference_id} abstains for target {target_id}")
    return measurement
