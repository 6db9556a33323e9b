"""
BIBE protocol data unit.

A BPDU is the CBOR array ``[transmission_id, retransmission_time, bundle_bytes]``
carried directly as the payload of an outer bundle. The outer bundle is not
flagged as an administrative record, so it can be addressed to any endpoint a
BIBE-CLA registered like an ordinary application. Custody transfer is not
implemented: both numeric fields are always zero.
"""

from dataclasses import dataclass

import cbor2

from ..utils.errors import MalformedBpdu
from .eid import UINT64_MAX


@dataclass(frozen=True)
class BibePdu:
    """
    Attributes:
        encapsulated: Serialized inner bundle, carried bit-exact
        transmission_id: 0, no custody requested
        retransmission_time: 0, no retransmission deadline
    """

    encapsulated: bytes
    transmission_id: int = 0
    retransmission_time: int = 0

    def __post_init__(self) -> None:
        if self.transmission_id != 0 or self.retransmission_time != 0:
            raise ValueError("custody transfer is not supported; ids must be 0")
        if not isinstance(self.encapsulated, bytes):
            raise ValueError("encapsulated bundle must be bytes")


def encode_bpdu(pdu: BibePdu) -> bytes:
    return cbor2.dumps([pdu.transmission_id, pdu.retransmission_time, pdu.encapsulated])


def decode_bpdu(data: bytes) -> BibePdu:
    """
    Parse a BPDU without looking into the encapsulated bundle.

    Raises:
        MalformedBpdu: Anything but a 3-element array of two zero-valued
            unsigned integers and a byte string, or trailing data
    """
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise MalformedBpdu("BPDU data must be bytes")
    data = bytes(data)
    if not data or data[0] != 0x83:
        raise MalformedBpdu("BPDU must be a 3-element array")
    try:
        value = cbor2.loads(data)
    except Exception as exc:
        raise MalformedBpdu(f"invalid CBOR: {exc}") from exc

    transmission_id, retransmission_time, encapsulated = value
    for name, number in (
        ("transmission id", transmission_id),
        ("retransmission time", retransmission_time),
    ):
        if isinstance(number, bool) or not isinstance(number, int):
            raise MalformedBpdu(f"{name} must be an unsigned integer")
        if not 0 <= number <= UINT64_MAX:
            raise MalformedBpdu(f"{name} out of range")
        if number != 0:
            raise MalformedBpdu(f"{name} must be 0 without custody transfer")
    if not isinstance(encapsulated, bytes):
        raise MalformedBpdu("encapsulated bundle must be a byte string")
    pdu = BibePdu(encapsulated=encapsulated)
    if encode_bpdu(pdu) != data:
        raise MalformedBpdu("non-canonical encoding or trailing data")
    return pdu
