"""
Real TCP transport for the node daemon, built on asyncio protocols.
"""

import asyncio
from typing import Callable, Optional

from ..utils.logger import app_logger
from .base import Connection, ConnectionHandler, HandlerFactory, Network


def split_address(address: str) -> tuple[str, int]:
    """Split ``host:port``; raises ValueError for anything else."""
    host, sep, port = address.rpartition(":")
    if not sep or not host or not port.isdigit() or not 0 < int(port) < 65536:
        raise ValueError(f"expected host:port, got {address!r}")
    return host, int(port)


class TcpConnection(Connection, asyncio.Protocol):
    """asyncio protocol that forwards stream events to a ConnectionHandler."""

    def __init__(self, factory: HandlerFactory):
        self._factory = factory
        self._transport: Optional[asyncio.Transport] = None
        self._handler: Optional[ConnectionHandler] = None
        self._closed = False

    def connection_made(self, transport: asyncio.BaseTransport) -> None:
        self._transport = transport  # type: ignore[assignment]
        self._handler = self._factory(self)

    def data_received(self, data: bytes) -> None:
        if self._handler is not None:
            self._handler.data_received(data)

    def connection_lost(self, exc: Optional[Exception]) -> None:
        if exc is not None:
            app_logger.debug(f"TCP connection lost: {exc}")
        self._closed = True
        if self._handler is not None:
            self._handler.connection_lost()

    def write(self, data: bytes) -> None:
        if self._closed or self._transport is None:
            raise ConnectionResetError("connection is closed")
        self._transport.write(data)

    def close(self) -> None:
        if not self._closed and self._transport is not None:
            self._closed = True
            self._transport.close()

    @property
    def closed(self) -> bool:
        return self._closed


class TcpNetwork(Network):
    """Listens and dials over TCP on the given event loop."""

    def __init__(self, loop: asyncio.AbstractEventLoop):
        self._loop = loop
        self._servers: dict[str, asyncio.AbstractServer] = {}
        self._starting: list[asyncio.Task] = []

    def listen(self, address: str, factory: HandlerFactory, node: Optional[str] = None) -> None:
        host, port = split_address(address)

        async def start() -> None:
            server = await self._loop.create_server(
                lambda: TcpConnection(factory), host, port
            )
            self._servers[address] = server
            app_logger.info(f"Listening on tcp://{address}")

        task = self._loop.create_task(start())
        task.add_done_callback(_log_failure(f"listen on {address}"))
        self._starting.append(task)

    def unlisten(self, address: str) -> None:
        server = self._servers.pop(address, None)
        if server is not None:
            server.close()

    def dial(
        self,
        address: str,
        factory: HandlerFactory,
        on_ready: Callable[[Connection], None],
        on_error: Callable[[Exception], None],
        origin: Optional[str] = None,
    ) -> None:
        try:
            host, port = split_address(address)
        except ValueError as exc:
            self._loop.call_soon(on_error, exc)
            return

        async def connect() -> None:
            try:
                _, protocol = await self._loop.create_connection(
                    lambda: TcpConnection(factory), host, port
                )
            except OSError as exc:
                on_error(exc)
                return
            on_ready(protocol)

        self._loop.create_task(connect())

    async def wait_listening(self) -> None:
        """Wait until every requested listener is bound (or failed to bind)."""
        starting, self._starting = self._starting, []
        if starting:
            await asyncio.gather(*starting, return_exceptions=True)


def _log_failure(what: str) -> Callable[[asyncio.Task], None]:
    def callback(task: asyncio.Task) -> None:
        if not task.cancelled() and task.exception() is not None:
            app_logger.error(f"Failed to {what}: {task.exception()}")

    return callback
