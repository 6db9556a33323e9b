"""
In-process network emulation on top of a scheduler.

Every connection is a pair of ``EmulatedConnection`` ends. Writes are cut into
segments and delivered to the peer after the one-way delay of the link, in
order. Dials between endpoints of the same node use no delay.
"""

from dataclasses import dataclass
from typing import Callable, Optional

from ..utils.clock import Scheduler
from ..utils.config import app_settings
from ..utils.logger import app_logger
from .base import Connection, ConnectionHandler, HandlerFactory, Network


@dataclass
class _Listener:
    factory: HandlerFactory
    node: Optional[str]


class EmulatedConnection(Connection):
    """One end of an emulated stream."""

    def __init__(self, scheduler: Scheduler, delay: float, segment_size: int, label: str):
        self._scheduler = scheduler
        self._delay = delay
        self._segment_size = segment_size
        self._label = label
        self._peer: Optional["EmulatedConnection"] = None
        self._handler: Optional[ConnectionHandler] = None
        self._tail = 0.0
        self._closed = False
        self.bytes_sent = 0

    def _set_peer(self, peer: "EmulatedConnection") -> None:
        self._peer = peer

    def _set_handler(self, handler: ConnectionHandler) -> None:
        self._handler = handler

    def _arrival_time(self) -> float:
        self._tail = max(self._scheduler.now() + self._delay, self._tail)
        return self._tail

    def write(self, data: bytes) -> None:
        if self._closed or self._peer is None:
            raise ConnectionResetError(f"connection {self._label} is closed")
        self.bytes_sent += len(data)
        for offset in range(0, len(data), self._segment_size):
            segment = bytes(data[offset : offset + self._segment_size])
            self._scheduler.call_at(self._arrival_time(), self._peer._deliver, segment)

    def _deliver(self, segment: bytes) -> None:
        if self._closed or self._handler is None:
            return
        self._handler.data_received(segment)

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        peer = self._peer
        if peer is not None and not peer._closed:
            self._scheduler.call_at(self._arrival_time(), peer._remote_closed)

    def _remote_closed(self) -> None:
        if self._closed:
            return
        self._closed = True
        if self._handler is not None:
            self._handler.connection_lost()

    @property
    def closed(self) -> bool:
        return self._closed

    def __repr__(self) -> str:
        return f"EmulatedConnection({self._label})"


class EmulatedNetwork(Network):
    """
    Address space of listeners plus per-link delays.

    Attributes:
        default_delay: One-way delay of links without an explicit setting
        segment_size: Maximum bytes per delivered segment
    """

    def __init__(
        self,
        scheduler: Scheduler,
        default_delay: float = app_settings.LINK_DELAY,
        segment_size: int = app_settings.SEGMENT_SIZE,
    ):
        self._scheduler = scheduler
        self.default_delay = default_delay
        self.segment_size = segment_size
        self._listeners: dict[str, _Listener] = {}
        self._delays: dict[tuple[str, str], float] = {}

    def set_link_delay(self, origin: str, address: str, delay: float) -> None:
        """One-way delay for traffic from node ``origin`` to ``address`` and back."""
        self._delays[(origin, address)] = delay

    def delay_for(self, origin: Optional[str], address: str) -> float:
        listener = self._listeners.get(address)
        if listener is not None and origin is not None and listener.node == origin:
            return 0.0
        return self._delays.get((origin or "", address), self.default_delay)

    def listen(self, address: str, factory: HandlerFactory, node: Optional[str] = None) -> None:
        if address in self._listeners:
            raise OSError(f"address already in use: {address}")
        self._listeners[address] = _Listener(factory, node)
        app_logger.debug(f"Emulated listener on {address} ({node})")

    def unlisten(self, address: str) -> None:
        self._listeners.pop(address, None)

    def dial(
        self,
        address: str,
        factory: HandlerFactory,
        on_ready: Callable[[Connection], None],
        on_error: Callable[[Exception], None],
        origin: Optional[str] = None,
    ) -> None:
        listener = self._listeners.get(address)
        if listener is None:
            self._scheduler.call_soon(
                on_error, ConnectionRefusedError(f"nothing listens on {address}")
            )
            return

        delay = self.delay_for(origin, address)
        client = EmulatedConnection(
            self._scheduler, delay, self.segment_size, f"{origin}->{address}"
        )
        server = EmulatedConnection(
            self._scheduler, delay, self.segment_size, f"{address}->{origin}"
        )
        client._set_peer(server)
        server._set_peer(client)
        # Handlers may write from their constructor, so peers are linked first
        server._set_handler(listener.factory(server))
        client._set_handler(factory(client))
        self._scheduler.call_soon(on_ready, client)
