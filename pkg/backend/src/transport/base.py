"""
Connection and network abstractions shared by AAP and the stream CLA.
"""

from abc import ABC, abstractmethod
from typing import Callable, Optional, Protocol


class ConnectionHandler(Protocol):
    """Receives events of one connection, always on the owning event loop."""

    def data_received(self, data: bytes) -> None: ...

    def connection_lost(self) -> None: ...


class Connection(ABC):
    """One end of a reliable, ordered byte stream."""

    @abstractmethod
    def write(self, data: bytes) -> None:
        """Queue bytes for the peer."""

    @abstractmethod
    def close(self) -> None:
        """Close both directions; the peer sees ``connection_lost``."""

    @property
    @abstractmethod
    def closed(self) -> bool: ...


HandlerFactory = Callable[[Connection], ConnectionHandler]


class Network(ABC):
    """Where endpoints listen and whom they can dial."""

    @abstractmethod
    def listen(self, address: str, factory: HandlerFactory, node: Optional[str] = None) -> None:
        """Accept connections on ``address``; ``factory`` builds a handler per connection."""

    @abstractmethod
    def unlisten(self, address: str) -> None: ...

    @abstractmethod
    def dial(
        self,
        address: str,
        factory: HandlerFactory,
        on_ready: Callable[[Connection], None],
        on_error: Callable[[Exception], None],
        origin: Optional[str] = None,
    ) -> None:
        """
        Open a connection to ``address``.

        Exactly one of ``on_ready``/``on_error`` is called later on the event
        loop. ``origin`` names the dialing node so emulated links can pick a delay.
        """
