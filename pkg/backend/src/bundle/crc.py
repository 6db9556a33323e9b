"""
Block CRCs of the bundle wire format (X-25 and CRC-32C).
"""

from enum import IntEnum

import crcmod.predefined

_crc16_x25 = crcmod.predefined.mkPredefinedCrcFun("x-25")
_crc32c = crcmod.predefined.mkPredefinedCrcFun("crc-32c")


class CrcType(IntEnum):
    """CRC type codes carried in every block."""

    NONE = 0
    CRC16 = 1
    CRC32C = 2

    @property
    def size(self) -> int:
        """Length in bytes of the CRC field."""
        return {CrcType.NONE: 0, CrcType.CRC16: 2, CrcType.CRC32C: 4}[self]


def compute_crc(crc_type: CrcType, data: bytes) -> bytes:
    """CRC of ``data`` as the big-endian byte string stored in the block."""
    if crc_type == CrcType.CRC16:
        return _crc16_x25(data).to_bytes(2, "big")
    if crc_type == CrcType.CRC32C:
        return _crc32c(data).to_bytes(4, "big")
    return b""
