"""
Byte-stream transports: in-process emulation and TCP.
"""

from .base import Connection, ConnectionHandler, HandlerFactory, Network
from .emulated import EmulatedConnection, EmulatedNetwork
from .framing import FrameTooLarge, LengthPrefixFramer, frame
from .tcp import TcpNetwork, split_address

__all__ = [
    "Connection",
    "ConnectionHandler",
    "EmulatedConnection",
    "EmulatedNetwork",
    "FrameTooLarge",
    "HandlerFactory",
    "LengthPrefixFramer",
    "Network",
    "TcpNetwork",
    "frame",
    "split_address",
]
