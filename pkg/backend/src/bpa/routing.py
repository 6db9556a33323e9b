"""
Static next-hop routing for one scope.

Entries come from configuration and never change afterwards. The only mutable
part of a table is the set of *learned* exact routes, written by neighbor
discovery in scopes where it is enabled.
"""

import hashlib
import json
from dataclasses import dataclass
from typing import Iterable, Optional

from ..bundle import EndpointId, RoutePattern
from ..utils.errors import NoRoute, UnknownCla


@dataclass(frozen=True)
class NextHop:
    """A CLA name plus the CLA-specific address of the next hop."""

    cla: str
    address: str

    def __str__(self) -> str:
        return f"{self.cla}:{self.address}"


@dataclass(frozen=True)
class RouteEntry:
    pattern: RoutePattern
    next_hop: NextHop

    def render(self) -> dict[str, str]:
        return {
            "dest": str(self.pattern),
            "cla": self.next_hop.cla,
            "address": self.next_hop.address,
        }


class RoutingTable:
    """
    Ordered routing entries of one BPA instance.

    Lookup precedence: learned exact, static exact, ipn wildcard, default.
    Within a class the first entry in configuration order wins.
    """

    def __init__(
        self, entries: Iterable[RouteEntry] = (), default: Optional[NextHop] = None
    ):
        self._entries: tuple[RouteEntry, ...] = tuple(entries)
        self._default = default
        self._learned: dict[EndpointId, NextHop] = {}

    @property
    def entries(self) -> tuple[RouteEntry, ...]:
        return self._entries

    @property
    def default(self) -> Optional[NextHop]:
        return self._default

    @property
    def learned(self) -> dict[EndpointId, NextHop]:
        return dict(self._learned)

    def lookup(self, dest: EndpointId) -> NextHop:
        """
        Raises:
            NoRoute: No entry matches and there is no default
        """
        learned = self._learned.get(dest)
        if learned is not None:
            return learned
        for entry in self._entries:
            if not entry.pattern.is_wildcard and entry.pattern.matches(dest):
                return entry.next_hop
        for entry in self._entries:
            if entry.pattern.is_wildcard and entry.pattern.matches(dest):
                return entry.next_hop
        if self._default is not None:
            return self._default
        raise NoRoute(f"no route to {dest}")

    def validate(self, cla_names: Iterable[str]) -> None:
        """
        Raises:
            UnknownCla: An entry names a CLA that is not attached
        """
        attached = set(cla_names)
        hops = [entry.next_hop for entry in self._entries]
        if self._default is not None:
            hops.append(self._default)
        for hop in hops:
            if hop.cla not in attached:
                raise UnknownCla(f"route uses unattached CLA {hop.cla!r}")

    def learn(self, dest: EndpointId, next_hop: NextHop) -> None:
        self._learned[dest] = next_hop

    def forget(self, dest: EndpointId) -> bool:
        return self._learned.pop(dest, None) is not None

    def destinations(self) -> list[RoutePattern]:
        """Every destination pattern, static and learned."""
        patterns = [entry.pattern for entry in self._entries]
        patterns.extend(RoutePattern(exact=eid) for eid in self._learned)
        return patterns

    def to_dict(self) -> dict:
        return {
            "entries": [entry.render() for entry in self._entries],
            "default": (
                {"cla": self._default.cla, "address": self._default.address}
                if self._default
                else None
            ),
            "learned": [
                {"dest": str(dest), "cla": hop.cla, "address": hop.address}
                for dest, hop in sorted(self._learned.items(), key=lambda item: str(item[0]))
            ],
        }

    def digest(self) -> str:
        """SHA-256 of a canonical rendering of the whole table."""
        rendering = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(rendering.encode("utf-8")).hexdigest()

    def __len__(self) -> int:
        return len(self._entries) + len(self._learned) + (self._default is not None)


def lookup_route(routes: RoutingTable, dest: EndpointId) -> NextHop:
    """Deterministic next hop for ``dest``; raises NoRoute."""
    return routes.lookup(dest)
