"""
Endpoint registrations of one BPA instance.
"""

from typing import Callable, Optional

from ..bundle import Bundle, EndpointId
from ..utils.errors import DuplicateRegistration

# An application, an AAP session or an upper-layer BIBE CLA
Agent = Callable[[Bundle], None]


class Registration:
    """Token returned by ``EndpointRegistry.register``; ``release()`` deregisters."""

    def __init__(self, registry: "EndpointRegistry", eid: EndpointId, agent: Agent):
        self._registry = registry
        self.eid = eid
        self.agent = agent
        self.active = True

    def release(self) -> None:
        if self.active:
            self._registry._remove(self)
            self.active = False

    def __repr__(self) -> str:
        state = "active" if self.active else "released"
        return f"Registration({self.eid}, {state})"


class EndpointRegistry:
    """At most one active registration per endpoint."""

    def __init__(self) -> None:
        self._entries: dict[EndpointId, Registration] = {}

    def register(self, eid: EndpointId, agent: Agent) -> Registration:
        """
        Register ``agent`` for bundles destined to ``eid``.

        Raises:
            DuplicateRegistration: ``eid`` already has an active registration
        """
        if eid in self._entries:
            raise DuplicateRegistration(f"{eid} is already registered")
        registration = Registration(self, eid, agent)
        self._entries[eid] = registration
        return registration

    def _remove(self, registration: Registration) -> None:
        if self._entries.get(registration.eid) is registration:
            del self._entries[registration.eid]

    def lookup(self, eid: EndpointId) -> Optional[Agent]:
        registration = self._entries.get(eid)
        return registration.agent if registration is not None else None

    def __contains__(self, eid: object) -> bool:
        return eid in self._entries

    def endpoints(self) -> list[EndpointId]:
        return list(self._entries)
