"""
Discovery beacon and its datagram encoding.

A beacon is a CBOR map with integer keys::

    {0: source node EID (text), 1: sequence number, 2: period in ms,
     3: advertised CLA name, 4: advertised CLA address}
"""

from dataclasses import dataclass

import cbor2

from ..bundle import EndpointId, parse_eid
from ..utils.errors import MalformedBeacon, MalformedEid

_SOURCE, _SEQUENCE, _PERIOD, _CLA, _ADDRESS = range(5)


@dataclass(frozen=True)
class Beacon:
    """
    Attributes:
        source: Node EID of the sender
        sequence: Strictly increasing per sender
        period: Seconds between two beacons of the sender
        cla: Name of the CLA the sender serves
        address: Address peers dial to reach that CLA
    """

    source: EndpointId
    sequence: int
    period: float
    cla: str
    address: str


def encode_beacon(beacon: Beacon) -> bytes:
    return cbor2.dumps(
        {
            _SOURCE: str(beacon.source),
            _SEQUENCE: beacon.sequence,
            _PERIOD: int(round(beacon.period * 1000)),
            _CLA: beacon.cla,
            _ADDRESS: beacon.address,
        }
    )


def decode_beacon(data: bytes) -> Beacon:
    """
    Raises:
        MalformedBeacon: Not a CBOR map with the five expected keys
    """
    try:
        value = cbor2.loads(data)
    except Exception as exc:
        raise MalformedBeacon(f"invalid CBOR: {exc}") from exc
    if not isinstance(value, dict) or set(value) != {_SOURCE, _SEQUENCE, _PERIOD, _CLA, _ADDRESS}:
        raise MalformedBeacon("beacon must be a map with keys 0..4")
    sequence, period_ms = value[_SEQUENCE], value[_PERIOD]
    for name, number in (("sequence", sequence), ("period", period_ms)):
        if isinstance(number, bool) or not isinstance(number, int) or number < 0:
            raise MalformedBeacon(f"beacon {name} must be an unsigned integer")
    if period_ms == 0:
        raise MalformedBeacon("beacon period must be positive")
    if not all(isinstance(value[key], str) for key in (_SOURCE, _CLA, _ADDRESS)):
        raise MalformedBeacon("beacon source, CLA and address must be text")
    try:
        source = parse_eid(value[_SOURCE])
    except MalformedEid as exc:
        raise MalformedBeacon(f"bad beacon source: {exc}") from exc
    return Beacon(source, sequence, period_ms / 1000, value[_CLA], value[_ADDRESS])
