"""
The bundle data model.
"""

from dataclasses import dataclass, field, replace
from enum import IntFlag

from .crc import CrcType
from .eid import DTN_NONE, UINT64_MAX, EndpointId

BP_VERSION = 7


class BundleFlags(IntFlag):
    """Bundle processing control flags understood by this implementation."""

    NONE = 0
    IS_FRAGMENT = 0x000001
    ADMIN_RECORD = 0x000002
    NO_FRAGMENT = 0x000004
    ACK_REQUESTED = 0x000020
    STATUS_TIME_REQUESTED = 0x000040
    REPORT_RECEPTION = 0x004000
    REPORT_FORWARDING = 0x010000
    REPORT_DELIVERY = 0x020000
    REPORT_DELETION = 0x040000


@dataclass(frozen=True, order=True)
class CreationTimestamp:
    """DTN time of creation in milliseconds plus a per-source sequence number."""

    time_ms: int
    sequence: int = 0


@dataclass(frozen=True)
class Bundle:
    """
    A bundle with a primary block and a single payload block.

    Attributes:
        destination: Destination endpoint
        source: Source node endpoint
        report_to: Report-to endpoint (dtn:none by default)
        creation: CreationTimestamp
        lifetime_ms: Lifetime counted from the creation time
        payload: Opaque application data unit
        flags: BundleFlags
        crc_type: CRC applied to both blocks
    """

    destination: EndpointId
    source: EndpointId
    creation: CreationTimestamp
    lifetime_ms: int
    payload: bytes = b""
    report_to: EndpointId = DTN_NONE
    flags: BundleFlags = BundleFlags.NONE
    crc_type: CrcType = CrcType.CRC32C
    version: int = field(default=BP_VERSION, init=False)

    def __post_init__(self) -> None:
        for name, value in (
            ("creation time", self.creation.time_ms),
            ("sequence number", self.creation.sequence),
            ("lifetime", self.lifetime_ms),
        ):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValueError(f"{name} must be an integer")
            if not 0 <= value <= UINT64_MAX:
                raise ValueError(f"{name} out of range: {value}")
        if not isinstance(self.payload, bytes):
            raise ValueError("payload must be bytes")
        if self.flags & BundleFlags.IS_FRAGMENT:
            raise ValueError("fragmented bundles are not supported")

    @property
    def bundle_id(self) -> str:
        """Source plus creation timestamp, unique per bundle."""
        return f"{self.source}@{self.creation.time_ms}.{self.creation.sequence}"

    @property
    def expires_at_ms(self) -> int:
        return self.creation.time_ms + self.lifetime_ms

    def is_expired(self, now_ms: int) -> bool:
        """Expired once the current DTN time reaches creation time + lifetime."""
        return now_ms >= self.expires_at_ms

    def remaining_lifetime_ms(self, now_ms: int) -> int:
        return max(0, self.expires_at_ms - now_ms)

    def with_payload(self, payload: bytes) -> "Bundle":
        return replace(self, payload=payload)
