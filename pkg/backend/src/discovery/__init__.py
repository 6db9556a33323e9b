"""
Neighbor discovery: beacons, broadcast channels and the per-instance agent.
"""

from .beacon import Beacon, decode_beacon, encode_beacon
from .channel import BeaconChannel, EmulatedBeaconBus, UdpBeaconChannel
from .ipnd import EXPIRY_PERIODS, NeighborDiscovery

__all__ = [
    "Beacon",
    "BeaconChannel",
    "EXPIRY_PERIODS",
    "EmulatedBeaconBus",
    "NeighborDiscovery",
    "UdpBeaconChannel",
    "decode_beacon",
    "encode_beacon",
]
