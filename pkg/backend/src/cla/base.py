"""
Convergence-layer adapter interface.
"""

from abc import ABC, abstractmethod
from typing import TYPE_CHECKING, Any, Optional

from ..bpa.routing import NextHop
from ..bundle import Bundle, EndpointId
from ..utils.logger import ScopeLogAdapter, scope_logger

if TYPE_CHECKING:
    from ..bpa.instance import ScopeInstance

# A CLA name plus the CLA-specific next-hop address
ClaAddress = NextHop


class ConvergenceLayerAdapter(ABC):
    """
    Binds one ScopeInstance to an underlying transport.

    A CLA talks to its instance only through ``instance.post`` and the
    store/requeue callbacks; it never reads the instance's routing table.
    """

    kind = "abstract"

    def __init__(self, name: str):
        self.name = name
        self._instance: Optional["ScopeInstance"] = None
        self.log: Optional[ScopeLogAdapter] = None

    @property
    def instance(self) -> "ScopeInstance":
        if self._instance is None:
            raise RuntimeError(f"CLA {self.name} is not attached")
        return self._instance

    def attach(self, instance: "ScopeInstance") -> None:
        self._instance = instance
        self.log = scope_logger(instance.node, instance.scope)

    def start(self) -> None:
        """Begin listening or connecting."""

    def stop(self) -> None:
        """Release transport resources."""

    @abstractmethod
    def can_transmit(self, address: str) -> bool:
        """Whether ``transmit`` to ``address`` may be attempted right now."""

    @abstractmethod
    def transmit(self, address: str, bundle: Bundle) -> None:
        """
        Hand a bundle to the transport.

        Raises:
            LinkDown: No contact or connection; the bundle goes back to the store
            PeerRejected: The next hop refused the bundle
        """

    def may_reach(self, dest: EndpointId, now: float) -> bool:
        """Whether a current or future contact is planned toward ``dest``."""
        return False

    def describe(self) -> dict[str, Any]:
        return {"type": self.kind}

    def hop(self, address: str) -> NextHop:
        return NextHop(self.name, address)


def cla_transmit(cla: ConvergenceLayerAdapter, address: str, bundle: Bundle) -> None:
    """Transmit ``bundle`` via ``cla``; raises LinkDown or PeerRejected."""
    cla.transmit(address, bundle)
