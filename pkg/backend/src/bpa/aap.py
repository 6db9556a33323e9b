"""
Application Agent Protocol (AAP) message codec.

Every message starts with one header byte, ``0x10 | type`` (protocol version 1
in the high nibble). Depending on the type it carries:

- an EID as a u16 big-endian length followed by ASCII text,
- a payload as a u64 big-endian length followed by raw bytes,
- a bundle id as a u64,
- for SENDBUNDLE, a trailing u64 requested lifetime in ms (0 = instance default).

Applications and upper-layer BIBE CLAs speak exactly the same messages.
"""

import enum
import struct
from dataclasses import dataclass
from typing import Iterator, Optional

from ..utils.errors import MalformedAapMessage

AAP_VERSION = 1

_U16 = struct.Struct("!H")
_U64 = struct.Struct("!Q")


class InsufficientAapData(Exception):
    """
    The buffered bytes are a valid prefix but the message is incomplete.

    Args:
        bytes_needed: Total number of bytes required for the next parsing step
    """

    def __init__(self, bytes_needed: int):
        super().__init__(f"need {bytes_needed} bytes")
        self.bytes_needed = bytes_needed


class AapMessageType(enum.IntEnum):
    """AAP message type codes."""

    ACK = 0x0
    NACK = 0x1
    REGISTER = 0x2
    SENDBUNDLE = 0x3
    RECVBUNDLE = 0x4
    SENDCONFIRM = 0x5
    WELCOME = 0x7
    PING = 0x8


_WITH_EID = frozenset(
    {
        AapMessageType.REGISTER,
        AapMessageType.SENDBUNDLE,
        AapMessageType.RECVBUNDLE,
        AapMessageType.WELCOME,
    }
)
_WITH_PAYLOAD = frozenset({AapMessageType.SENDBUNDLE, AapMessageType.RECVBUNDLE})


@dataclass(frozen=True)
class AapMessage:
    """One AAP message; unused fields stay None."""

    msg_type: AapMessageType
    eid: Optional[str] = None
    payload: Optional[bytes] = None
    bundle_id: Optional[int] = None
    lifetime_ms: int = 0

    def serialize(self) -> bytes:
        """On-wire representation."""
        parts = [bytes([(AAP_VERSION << 4) | (int(self.msg_type) & 0xF)])]
        if self.msg_type in _WITH_EID:
            raw_eid = (self.eid or "").encode("ascii")
            parts.append(_U16.pack(len(raw_eid)))
            parts.append(raw_eid)
        if self.msg_type in _WITH_PAYLOAD:
            payload = self.payload or b""
            parts.append(_U64.pack(len(payload)))
            parts.append(payload)
        if self.msg_type == AapMessageType.SENDBUNDLE:
            parts.append(_U64.pack(self.lifetime_ms))
        if self.msg_type == AapMessageType.SENDCONFIRM:
            parts.append(_U64.pack(self.bundle_id or 0))
        return b"".join(parts)

    def __bytes__(self) -> bytes:
        return self.serialize()

    @staticmethod
    def parse(data: bytes) -> tuple["AapMessage", int]:
        """
        Parse one message from the start of ``data``.

        Returns:
            tuple: The message and the number of bytes it occupied

        Raises:
            InsufficientAapData: More bytes are needed
            MalformedAapMessage: Wrong version, unknown type, non-ASCII EID
        """
        if len(data) == 0:
            raise InsufficientAapData(1)
        version = (data[0] >> 4) & 0xF
        if version != AAP_VERSION:
            raise MalformedAapMessage(f"invalid AAP version: {version}")
        try:
            msg_type = AapMessageType(data[0] & 0xF)
        except ValueError as exc:
            raise MalformedAapMessage(f"unknown AAP message type {data[0] & 0xF}") from exc

        eid = payload = bundle_id = None
        lifetime_ms = 0
        index = 1

        if msg_type in _WITH_EID:
            (eid_length,) = _U16.unpack(_take(data, index, 2))
            index += 2
            raw_eid = _take(data, index, eid_length)
            index += eid_length
            try:
                eid = raw_eid.decode("ascii")
            except UnicodeDecodeError as exc:
                raise MalformedAapMessage("EID is not ASCII") from exc

        if msg_type in _WITH_PAYLOAD:
            (payload_length,) = _U64.unpack(_take(data, index, 8))
            index += 8
            payload = _take(data, index, payload_length)
            index += payload_length

        if msg_type == AapMessageType.SENDBUNDLE:
            (lifetime_ms,) = _U64.unpack(_take(data, index, 8))
            index += 8

        if msg_type == AapMessageType.SENDCONFIRM:
            (bundle_id,) = _U64.unpack(_take(data, index, 8))
            index += 8

        return AapMessage(msg_type, eid, payload, bundle_id, lifetime_ms), index


def _take(data: bytes, index: int, count: int) -> bytes:
    if len(data) - index < count:
        raise InsufficientAapData(index + count)
    return bytes(data[index : index + count])


def encode_bundle_id(timestamp_ms: int, seqnum: int) -> int:
    """Pack a creation timestamp into the with-timestamp bundle id format."""
    return (2 << 62) | ((timestamp_ms & 0x00003FFFFFFFFFFF) << 16) | (seqnum & 0xFFFF)


def decode_bundle_id(bundle_id: int) -> tuple[int, int]:
    """
    Unpack ``(timestamp_ms, seqnum)`` from a with-timestamp bundle id.

    Raises:
        MalformedAapMessage: The id does not use the with-timestamp format
    """
    if (bundle_id >> 62) != 2:
        raise MalformedAapMessage("bundle id is not in the with-timestamp format")
    return (bundle_id & 0x3FFFFFFFFFFF0000) >> 16, bundle_id & 0xFFFF


class AapStreamDecoder:
    """Incremental parser over a connection's byte stream."""

    def __init__(self) -> None:
        self._buffer = bytearray()

    def feed(self, data: bytes) -> Iterator[AapMessage]:
        self._buffer.extend(data)
        while self._buffer:
            try:
                message, used = AapMessage.parse(self._buffer)
            except InsufficientAapData:
                return
            del self._buffer[:used]
            yield message


def ack() -> AapMessage:
    return AapMessage(AapMessageType.ACK)


def nack() -> AapMessage:
    return AapMessage(AapMessageType.NACK)
