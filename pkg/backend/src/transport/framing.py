"""
Length-prefixed framing over a byte stream (4-byte big-endian length).
"""

import struct
from typing import Iterator

from ..utils.config import app_settings

LENGTH_PREFIX = struct.Struct("!I")


class FrameTooLarge(ValueError):
    """A peer announced a frame above the configured limit."""


def frame(data: bytes) -> bytes:
    """Prefix ``data`` with its length."""
    return LENGTH_PREFIX.pack(len(data)) + data


class LengthPrefixFramer:
    """Reassembles frames from arbitrarily segmented stream data."""

    def __init__(self, max_frame_size: int = app_settings.MAX_FRAME_SIZE):
        self._buffer = bytearray()
        self._max_frame_size = max_frame_size

    def feed(self, data: bytes) -> Iterator[bytes]:
        """Add received bytes and yield every frame completed by them."""
        self._buffer.extend(data)
        while len(self._buffer) >= LENGTH_PREFIX.size:
            (length,) = LENGTH_PREFIX.unpack_from(self._buffer)
            if length > self._max_frame_size:
                raise FrameTooLarge(f"frame of {length} bytes exceeds limit")
            end = LENGTH_PREFIX.size + length
            if len(self._buffer) < end:
                return
            payload = bytes(self._buffer[LENGTH_PREFIX.size : end])
            del self._buffer[:end]
            yield payload

    @property
    def buffered(self) -> int:
        return len(self._buffer)
