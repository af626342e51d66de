"""Idealized radio-timing channel: propagation delay, ToD/ToA stamps, received energy"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import config as defaults
from .errors import ConfigError, GeometryError
from .geometry import Position

TimestampPair = Tuple[float, float]  # (ToD, ToA) in seconds


@dataclass(frozen=True, slots=True)
class RadioModel:
    propagation_speed: float = defaults.SPEED_OF_LIGHT
    timestamp_noise_sigma: float = 0.0  # seconds, Gaussian on each ToA
    transmission_range: float = defaults.TRANSMISSION_RANGE
    path_exponent: float = defaults.PATH_EXPONENT

    def __post_init__(self):
        if self.propagation_speed <= 0:
            raise ConfigError("propagation_speed must be > 0")
        if self.transmission_range <= 0:
            raise ConfigError("transmission_range must be > 0")
        if self.timestamp_noise_sigma < 0:
            raise ConfigError("timestamp_noise_sigma must be >= 0")
        if self.path_exponent <= 0:
            raise ConfigError("path_exponent must be > 0")

    @classmethod
    def from_config(cls, radio_config) -> "RadioModel":
        return cls(
            propagation_speed=radio_config.propagation_speed,
            timestamp_noise_sigma=radio_config.timestamp_noise_sigma,
            transmission_range=radio_config.transmission_range,
            path_exponent=radio_config.path_exponent,
        )

    def in_range(self, a: Position, b: Position) -> bool:
        return a.distance_to(b) <= self.transmission_range


def propagation_time(
    a: Position,
    b: Position,
    radio: RadioModel,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """One-way flight time |a-b|/c; with an rng, a measured reading with Gaussian noise"""
    flight = a.distance_to(b) / radio.propagation_speed
    if rng is not None and radio.timestamp_noise_sigma > 0:
        flight += rng.normal(0.0, radio.timestamp_noise_sigma)
    return flight


def timestamp_pairs(
    sender_positions: Sequence[Position],
    receiver_positions: Sequence[Position],
    send_times: Sequence[float],
    radio: RadioModel,
    rng: Optional[np.random.Generator] = None,
    forged_offset: float = 0.0,
) -> List[TimestampPair]:
    """One (ToD, ToA) pair per packet.

    ToD is the sender's exact clock; ToA carries the receiver-side detection
    jitter. Positions are sampled per packet so motion during an exchange is
    reflected in the stamps. `forged_offset` seconds are added to every
    reported ToA (a target replaying stale stamps).
    """
    if not (len(sender_positions) == len(receiver_positions) == len(send_times)):
        raise GeometryError("sender, receiver and send time sequences must align")
    flights = [propagation_time(s, r, radio) for s, r in zip(sender_positions, receiver_positions)]
    if rng is not None and radio.timestamp_noise_sigma > 0 and flights:
        jitter = rng.normal(0.0, radio.timestamp_noise_sigma, size=len(flights)).tolist()
    else:
        jitter = [0.0] * len(flights)
    return [
        (tod, tod + flight + noise + forged_offset)
        for tod, flight, noise in zip(send_times, flights, jitter)
    ]


def received_energy(
    tx_energy: float, distance: float, radio: RadioModel, d_ref: float = 1.0
) -> float:
    """Normalized energy at `distance` under the power law E = tx * (d_ref/d)^n"""
    if distance <= 0:
        return tx_energy
    return tx_energy * (d_ref / distance) ** radio.path_exponent
