"""
Broadcast channels that carry discovery beacons.
"""

import asyncio
import socket
from abc import ABC, abstractmethod
from typing import Callable, Optional

from ..utils.clock import Scheduler
from ..utils.config import app_settings
from ..utils.errors import ChannelUnavailable
from ..utils.logger import app_logger

BeaconReceiver = Callable[[bytes], None]


class BeaconChannel(ABC):
    """A datagram broadcast medium shared by discovery members."""

    @abstractmethod
    def join(self, member: str, receiver: BeaconReceiver) -> None: ...

    @abstractmethod
    def leave(self, member: str) -> None: ...

    @abstractmethod
    def broadcast(self, member: str, data: bytes) -> None:
        """
        Raises:
            ChannelUnavailable: The member cannot send right now
        """


class EmulatedBeaconBus(BeaconChannel):
    """
    In-process broadcast with a symmetric radio-range relation.

    Members are in range of each other unless ``set_in_range`` says otherwise
    (or the reverse when ``default_in_range`` is False). Datagrams arrive after
    ``delay`` seconds; a sender never hears itself through the bus.
    """

    def __init__(
        self, scheduler: Scheduler, default_in_range: bool = True, delay: float = 0.001
    ):
        self._scheduler = scheduler
        self.default_in_range = default_in_range
        self.delay = delay
        self._members: dict[str, BeaconReceiver] = {}
        self._range: dict[frozenset[str], bool] = {}
        self.sent = 0

    def join(self, member: str, receiver: BeaconReceiver) -> None:
        self._members[member] = receiver

    def leave(self, member: str) -> None:
        self._members.pop(member, None)

    def set_in_range(self, a: str, b: str, in_range: bool) -> None:
        self._range[frozenset((a, b))] = in_range

    def in_range(self, a: str, b: str) -> bool:
        return self._range.get(frozenset((a, b)), self.default_in_range)

    def broadcast(self, member: str, data: bytes) -> None:
        if member not in self._members:
            raise ChannelUnavailable(f"{member} has not joined the channel")
        self.sent += 1
        for other, receiver in self._members.items():
            if other != member and self.in_range(member, other):
                self._scheduler.call_later(self.delay, receiver, data)


class _DatagramProtocol(asyncio.DatagramProtocol):
    def __init__(self, receiver: BeaconReceiver):
        self._receiver = receiver

    def datagram_received(self, data: bytes, addr) -> None:
        self._receiver(data)

    def error_received(self, exc: Exception) -> None:
        app_logger.warning(f"Beacon socket error: {exc}")


class UdpBeaconChannel(BeaconChannel):
    """UDP broadcast on one port, for the node daemon."""

    def __init__(
        self,
        loop: asyncio.AbstractEventLoop,
        port: int = app_settings.BEACON_PORT,
        broadcast_address: str = "255.255.255.255",
    ):
        self._loop = loop
        self.port = port
        self.broadcast_address = broadcast_address
        self._transports: dict[str, asyncio.DatagramTransport] = {}
        self._opening: dict[str, asyncio.Task] = {}

    def join(self, member: str, receiver: BeaconReceiver) -> None:
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        if hasattr(socket, "SO_REUSEPORT"):
            sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEPORT, 1)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_BROADCAST, 1)
        sock.bind(("", self.port))
        sock.setblocking(False)

        async def open_endpoint() -> None:
            try:
                transport, _ = await self._loop.create_datagram_endpoint(
                    lambda: _DatagramProtocol(receiver), sock=sock
                )
            except BaseException:
                sock.close()
                raise
            self._transports[member] = transport

        task = self._loop.create_task(open_endpoint())
        task.add_done_callback(lambda done: self._opened(member, done))
        self._opening[member] = task

    def _opened(self, member: str, task: asyncio.Task) -> None:
        if self._opening.get(member) is task:
            del self._opening[member]
        if not task.cancelled() and task.exception() is not None:
            app_logger.error(f"Beacon socket of {member} failed to open: {task.exception()}")

    async def wait_open(self) -> None:
        """Wait until every joined member's socket is open (or failed to open)."""
        if self._opening:
            await asyncio.gather(*self._opening.values(), return_exceptions=True)

    def leave(self, member: str) -> None:
        task = self._opening.pop(member, None)
        if task is not None:
            task.cancel()
        transport = self._transports.pop(member, None)
        if transport is not None:
            transport.close()

    def broadcast(self, member: str, data: bytes) -> None:
        transport: Optional[asyncio.DatagramTransport] = self._transports.get(member)
        if transport is None:
            raise ChannelUnavailable(f"beacon socket of {member} is not open")
        try:
            transport.sendto(data, (self.broadcast_address, self.port))
        except OSError as exc:
            raise ChannelUnavailable(str(exc)) from exc
