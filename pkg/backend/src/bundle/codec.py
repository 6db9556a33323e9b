"""
Canonical CBOR wire codec for bundles.

Layout (indefinite-length array of two blocks)::

    9F
      [7, flags, crc_type, dest, source, report_to, [time_ms, seq], lifetime, crc?]
      [1, 1, 0, crc_type, payload, crc?]
    FF

EIDs are ``[1, "//authority/path" | 0]`` or ``[2, [node, service]]``. A block CRC
is computed over the block encoded with a zero-filled CRC field and stored as a
big-endian byte string. Only this canonical form is accepted on input, so
``encode(decode(x)) == x`` for every accepted ``x``. The payload is never
interpreted.
"""

from typing import Any, Optional

import cbor2

from ..utils.errors import MalformedBundle, MalformedEid
from .bundle import BP_VERSION, Bundle, BundleFlags, CreationTimestamp
from .crc import CrcType, compute_crc
from .eid import UINT64_MAX, EndpointId
from .events import EventKind, ScopeEvents, digest

PAYLOAD_BLOCK_TYPE = 1
PAYLOAD_BLOCK_NUMBER = 1


def _encode_block(fields: list[Any], crc_type: CrcType) -> bytes:
    if crc_type == CrcType.NONE:
        return cbor2.dumps(fields)
    size = crc_type.size
    zeroed = cbor2.dumps(fields + [bytes(size)])
    return zeroed[:-size] + compute_crc(crc_type, zeroed)


def _primary_fields(bundle: Bundle) -> list[Any]:
    return [
        BP_VERSION,
        int(bundle.flags),
        int(bundle.crc_type),
        bundle.destination.to_cbor(),
        bundle.source.to_cbor(),
        bundle.report_to.to_cbor(),
        [bundle.creation.time_ms, bundle.creation.sequence],
        bundle.lifetime_ms,
    ]


def _payload_fields(bundle: Bundle) -> list[Any]:
    return [PAYLOAD_BLOCK_TYPE, PAYLOAD_BLOCK_NUMBER, 0, int(bundle.crc_type), bundle.payload]


def encode_bundle(bundle: Bundle) -> bytes:
    """
    Serialize a bundle deterministically.

    Args:
        bundle: A valid Bundle

    Returns:
        bytes: Canonical encoding; identical bundles give identical bytes
    """
    return b"".join(
        (
            b"\x9f",
            _encode_block(_primary_fields(bundle), bundle.crc_type),
            _encode_block(_payload_fields(bundle), bundle.crc_type),
            b"\xff",
        )
    )


def _uint(value: Any, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise MalformedBundle(f"{what} must be an unsigned integer")
    if not 0 <= value <= UINT64_MAX:
        raise MalformedBundle(f"{what} out of range")
    return value


def _crc_type(value: Any) -> CrcType:
    try:
        return CrcType(_uint(value, "CRC type"))
    except ValueError as exc:
        raise MalformedBundle(f"unknown CRC type {value}") from exc


def _eid(value: Any, what: str) -> EndpointId:
    try:
        return EndpointId.from_cbor(value)
    except MalformedEid as exc:
        raise MalformedBundle(f"bad {what} EID: {exc}") from exc


def _check_crc(fields: list[Any], crc_type: CrcType, what: str) -> None:
    if crc_type == CrcType.NONE:
        return
    carried = fields[-1]
    if not isinstance(carried, bytes) or len(carried) != crc_type.size:
        raise MalformedBundle(f"{what} CRC field has the wrong size")
    zeroed = cbor2.dumps(fields[:-1] + [bytes(crc_type.size)])
    if compute_crc(crc_type, zeroed) != carried:
        raise MalformedBundle(f"{what} CRC mismatch")


def _decode_blocks(data: bytes) -> Bundle:
    if len(data) < 3 or data[0] != 0x9F or data[-1] != 0xFF:
        raise MalformedBundle("not an indefinite-length block array")
    try:
        blocks = cbor2.loads(data)
    except Exception as exc:
        raise MalformedBundle(f"invalid CBOR: {exc}") from exc

    if not isinstance(blocks, list) or len(blocks) != 2:
        raise MalformedBundle("expected exactly a primary and a payload block")
    primary, payload_block = blocks

    if not isinstance(primary, list) or len(primary) not in (8, 9):
        raise MalformedBundle("primary block must be an array of 8 or 9 items")
    if _uint(primary[0], "version") != BP_VERSION:
        raise MalformedBundle(f"unsupported bundle protocol version {primary[0]}")
    flags = BundleFlags(_uint(primary[1], "processing flags"))
    if flags & BundleFlags.IS_FRAGMENT:
        raise MalformedBundle("fragmented bundles are not supported")
    crc_type = _crc_type(primary[2])
    if len(primary) != 8 + (crc_type != CrcType.NONE):
        raise MalformedBundle("primary block length does not match its CRC type")
    _check_crc(primary, crc_type, "primary block")

    creation = primary[6]
    if not isinstance(creation, list) or len(creation) != 2:
        raise MalformedBundle("creation timestamp must be [time, sequence]")

    if not isinstance(payload_block, list) or len(payload_block) not in (5, 6):
        raise MalformedBundle("payload block must be an array of 5 or 6 items")
    if _uint(payload_block[0], "block type") != PAYLOAD_BLOCK_TYPE:
        raise MalformedBundle("only a payload block may follow the primary block")
    if _uint(payload_block[1], "block number") != PAYLOAD_BLOCK_NUMBER:
        raise MalformedBundle("payload block must be block number 1")
    if _uint(payload_block[2], "block flags") != 0:
        raise MalformedBundle("block processing flags are not supported")
    if _crc_type(payload_block[3]) != crc_type:
        raise MalformedBundle("payload block CRC type differs from the primary block")
    if len(payload_block) != 5 + (crc_type != CrcType.NONE):
        raise MalformedBundle("payload block length does not match its CRC type")
    payload = payload_block[4]
    if not isinstance(payload, bytes):
        raise MalformedBundle("payload must be a byte string")
    _check_crc(payload_block, crc_type, "payload block")

    try:
        bundle = Bundle(
            destination=_eid(primary[3], "destination"),
            source=_eid(primary[4], "source"),
            report_to=_eid(primary[5], "report-to"),
            creation=CreationTimestamp(
                _uint(creation[0], "creation time"), _uint(creation[1], "sequence number")
            ),
            lifetime_ms=_uint(primary[7], "lifetime"),
            payload=payload,
            flags=flags,
            crc_type=crc_type,
        )
    except ValueError as exc:
        if isinstance(exc, MalformedBundle):
            raise
        raise MalformedBundle(str(exc)) from exc

    if encode_bundle(bundle) != data:
        raise MalformedBundle("non-canonical encoding or trailing data")
    return bundle


def decode_bundle(data: bytes, events: Optional[ScopeEvents] = None) -> Bundle:
    """
    Parse a bundle encoding.

    Args:
        data: Candidate bundle bytes
        events: Scope sink of the caller; a PARSE event with the digest of
            ``data`` is recorded whether or not parsing succeeds

    Returns:
        Bundle: The decoded bundle

    Raises:
        MalformedBundle: Truncation, bad CBOR structure, unsupported version,
            CRC mismatch
    """
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise MalformedBundle("bundle data must be bytes")
    data = bytes(data)
    try:
        bundle = _decode_blocks(data)
    except MalformedBundle:
        if events is not None:
            events.record(EventKind.PARSE, digest(data), detail="malformed")
        raise
    except Exception as exc:
        if events is not None:
            events.record(EventKind.PARSE, digest(data), detail="malformed")
        raise MalformedBundle(f"undecodable bundle: {exc}") from exc
    if events is not None:
        events.record(EventKind.PARSE, digest(data), bundle_id=bundle.bundle_id)
    return bundle
