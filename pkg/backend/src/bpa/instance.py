"""
One Bundle Protocol Agent instance, owning exactly one scope.

All state of an instance is mutated inside callbacks of its scheduler. CLAs and
applications hand work to it through ``post()``; nothing outside the instance
touches its registry, routing table or store.
"""

from enum import Enum
from typing import TYPE_CHECKING, Any, Callable, Iterable, Optional

from ..bundle import (
    Bundle,
    CreationTimestamp,
    EndpointId,
    EventKind,
    ScopeEvents,
    decode_bpdu,
    decode_bundle,
)
from ..utils.clock import Scheduler
from ..utils.config import app_settings
from ..utils.errors import LinkDown, MalformedBundle, NoRoute, PeerRejected
from ..utils.logger import scope_logger
from .registry import Agent, EndpointRegistry, Registration
from .routing import NextHop, RoutingTable, lookup_route
from .store import PENDING, BundleStore, MemoryBundleStore

if TYPE_CHECKING:
    from ..cla.base import ConvergenceLayerAdapter


class DispatchOutcome(str, Enum):
    """Terminal outcome of one dispatch."""

    DELIVERED_LOCALLY = "delivered"
    FORWARDED = "forwarded"
    STORED = "stored"
    DELETED = "deleted"


class ScopeInstance:
    """
    A BPA instance: endpoint registry, routing table, store and attached CLAs.

    Attributes:
        node: Name of the hosting node
        scope: Scope label, unique within the node
        node_eids: Local node EIDs; the first one stamps locally created bundles
        routes: RoutingTable of this scope
        events: Audit sink tagged with (node, scope)
    """

    def __init__(
        self,
        node: str,
        scope: str,
        node_eids: Iterable[EndpointId],
        routes: RoutingTable,
        scheduler: Scheduler,
        events: ScopeEvents,
        store: Optional[BundleStore] = None,
        discovery_enabled: bool = False,
        default_lifetime_ms: int = app_settings.DEFAULT_LIFETIME_MS,
    ):
        self.node = node
        self.scope = scope
        self.node_eids = tuple(node_eids)
        if not self.node_eids:
            raise ValueError("an instance needs at least one node EID")
        self.routes = routes
        self.scheduler = scheduler
        self.events = events
        self.store = store or MemoryBundleStore()
        self.discovery_enabled = discovery_enabled
        self.default_lifetime_ms = default_lifetime_ms
        self.registry = EndpointRegistry()
        self.inspect_payloads = False
        self.log = scope_logger(node, scope)
        self._clas: dict[str, "ConvergenceLayerAdapter"] = {}
        self._last_timestamp = -1
        self._sequence = 0
        self._running = False

    @property
    def primary_eid(self) -> EndpointId:
        return self.node_eids[0]

    @property
    def clas(self) -> dict[str, "ConvergenceLayerAdapter"]:
        return dict(self._clas)

    def attach_cla(self, cla: "ConvergenceLayerAdapter") -> None:
        if cla.name in self._clas:
            raise ValueError(f"CLA {cla.name!r} is already attached")
        self._clas[cla.name] = cla
        cla.attach(self)

    def start(self) -> None:
        """Validate the routing table and start every attached CLA."""
        self.routes.validate(self._clas)
        for cla in self._clas.values():
            cla.start()
        self._running = True
        self.log.info(
            f"Started with {len(self.routes)} routes and CLAs {sorted(self._clas)}"
        )

    def stop(self) -> None:
        for cla in self._clas.values():
            cla.stop()
        self._running = False

    def post(self, callback: Callable[..., Any], *args: Any) -> None:
        """Queue work on this instance's event loop."""
        self.scheduler.call_soon(callback, *args)

    # Registration

    def register(self, eid: EndpointId, agent: Agent) -> Registration:
        """
        Deliver bundles destined to ``eid`` to ``agent`` from now on.

        Raises:
            DuplicateRegistration: ``eid`` is already registered
        """
        registration = self.registry.register(eid, agent)
        self.log.debug(f"Registered {eid}")
        return registration

    # Ingress

    def receive(self, data: bytes, via: str = "") -> Optional[DispatchOutcome]:
        """Parse bytes handed up by a CLA and dispatch the bundle."""
        try:
            bundle = decode_bundle(data, self.events)
        except MalformedBundle as exc:
            self.log.warning(f"Dropping malformed bundle from {via or 'unknown'}: {exc}")
            self.events.record(EventKind.DELETE, detail=f"malformed: {exc}")
            return None
        return self.dispatch(bundle)

    def create_bundle(
        self,
        destination: EndpointId,
        payload: bytes,
        lifetime_ms: Optional[int] = None,
    ) -> Bundle:
        """
        Create a bundle on behalf of a local application.

        The source is the primary node EID; the creation timestamp is the
        current DTN time plus a sequence number unique within that millisecond.
        ``lifetime_ms=None`` takes the instance default; 0 is kept as given.
        """
        now_ms = self.scheduler.dtn_time_ms()
        if now_ms == self._last_timestamp:
            self._sequence += 1
        else:
            self._last_timestamp = now_ms
            self._sequence = 0
        return Bundle(
            destination=destination,
            source=self.primary_eid,
            report_to=self.primary_eid,
            creation=CreationTimestamp(now_ms, self._sequence),
            lifetime_ms=(
                self.default_lifetime_ms if lifetime_ms is None else lifetime_ms
            ),
            payload=payload,
        )

    def submit(
        self,
        destination: EndpointId,
        payload: bytes,
        lifetime_ms: Optional[int] = None,
    ) -> Bundle:
        """Create a bundle for a local application and dispatch it."""
        bundle = self.create_bundle(destination, payload, lifetime_ms)
        self.dispatch(bundle)
        return bundle

    # Dispatch

    def lookup_route(self, dest: EndpointId) -> NextHop:
        self.events.record(EventKind.LOOKUP, detail=str(dest))
        return lookup_route(self.routes, dest)

    def dispatch(self, bundle: Bundle) -> DispatchOutcome:
        """
        Decide the fate of one bundle; never raises.

        Registered destinations are delivered without a route lookup. Otherwise
        the routing table picks a CLA; bundles the CLA cannot send right now, or
        that would overtake bundles already stored for the same hop, are stored.
        Expired or unroutable bundles are deleted.
        """
        if self.inspect_payloads:
            self._inspect(bundle)

        now_ms = self.scheduler.dtn_time_ms()
        if bundle.is_expired(now_ms):
            return self._delete(bundle, "expired")

        agent = self.registry.lookup(bundle.destination)
        if agent is not None:
            try:
                agent(bundle)
            except Exception as exc:
                self.log.exception(f"Agent for {bundle.destination} failed")
                return self._delete(bundle, f"delivery failed: {exc}")
            self.events.record(EventKind.DELIVER, bundle_id=bundle.bundle_id)
            self.log.debug(f"Delivered {bundle.bundle_id} to {bundle.destination}")
            return DispatchOutcome.DELIVERED_LOCALLY

        try:
            hop = self.lookup_route(bundle.destination)
        except NoRoute:
            if self.discovery_enabled or self._contact_may_reach(bundle.destination):
                return self._store(bundle, PENDING, "no route yet")
            return self._delete(bundle, "no route")

        cla = self._clas.get(hop.cla)
        if cla is None:
            return self._delete(bundle, f"unknown CLA {hop.cla}")
        if not cla.can_transmit(hop.address):
            return self._store(bundle, hop, "link down")
        if self.store.holds(hop):
            return self._store(bundle, hop, "queued behind stored bundles")
        try:
            cla.transmit(hop.address, bundle)
        except LinkDown as exc:
            return self._store(bundle, hop, f"link down: {exc}")
        except PeerRejected as exc:
            return self._delete(bundle, f"rejected: {exc}")
        self.events.record(EventKind.FORWARD, bundle_id=bundle.bundle_id, detail=str(hop))
        self.log.debug(f"Forwarded {bundle.bundle_id} via {hop}")
        return DispatchOutcome.FORWARDED

    def _contact_may_reach(self, dest: EndpointId) -> bool:
        now = self.scheduler.now()
        return any(cla.may_reach(dest, now) for cla in self._clas.values())

    def _store(self, bundle: Bundle, key: NextHop, reason: str) -> DispatchOutcome:
        self.store.push(bundle, key)
        where = "pending" if key == PENDING else str(key)
        self.events.record(
            EventKind.STORE, bundle_id=bundle.bundle_id, detail=f"{where}: {reason}"
        )
        self.log.info(f"Stored {bundle.bundle_id} for {where} ({reason})")
        return DispatchOutcome.STORED

    def _delete(self, bundle: Bundle, reason: str) -> DispatchOutcome:
        self.events.record(EventKind.DELETE, bundle_id=bundle.bundle_id, detail=reason)
        self.log.info(f"Deleted {bundle.bundle_id}: {reason}")
        return DispatchOutcome.DELETED

    def _inspect(self, bundle: Bundle) -> None:
        # Sabotage hook for auditor tests: parses payloads that belong to another scope
        try:
            inner = decode_bpdu(bundle.payload).encapsulated
            decode_bundle(inner, self.events)
        except ValueError:
            pass

    # Store and retry

    def requeue(self, bundle: Bundle, hop: NextHop, reason: str = "link lost") -> None:
        """A CLA hands back a bundle it accepted but could not send."""
        self._store(bundle, hop, reason)

    def bundle_failed(self, bundle: Bundle, reason: str) -> None:
        """A CLA reports a bundle the next hop refused."""
        self._delete(bundle, reason)

    def purge_expired(self) -> int:
        expired = self.store.purge_expired(self.scheduler.dtn_time_ms())
        for bundle in expired:
            self._delete(bundle, "expired in store")
        return len(expired)

    def store_and_retry(self, cla: str, address: str) -> list[DispatchOutcome]:
        """
        Contact start for ``(cla, address)``: purge expired bundles, then
        re-dispatch the matching queue and the no-route queue in FIFO order.
        """
        self.purge_expired()
        hop = NextHop(cla, address)
        waiting = self.store.take(hop)
        if hop != PENDING:
            waiting += self.store.take_pending()
        if waiting:
            self.log.info(f"Contact to {hop} started, retrying {len(waiting)} bundles")
        return [self.dispatch(bundle) for bundle in waiting]

    def on_contact_started(self, cla: str, address: str) -> None:
        self.store_and_retry(cla, address)

    def routes_changed(self) -> None:
        """Learned routes changed; bundles without a route get another chance."""
        self.purge_expired()
        for bundle in self.store.take_pending():
            self.dispatch(bundle)

    def replace_routes(self, routes: RoutingTable) -> None:
        """Swap the whole table (multiplexer reconfiguration) and re-dispatch the store."""
        routes.validate(self._clas)
        self.routes = routes
        self.events.record(EventKind.RECONFIGURE, detail=routes.digest())
        self.log.info(f"Routing table replaced, digest {routes.digest()[:12]}")
        self.purge_expired()
        for _, bundle in self.store.take_all():
            self.dispatch(bundle)

    # Introspection

    def route_digest(self) -> str:
        return self.routes.digest()

    def snapshot(self) -> dict[str, Any]:
        return {
            "node": self.node,
            "scope": self.scope,
            "node_eids": [str(eid) for eid in self.node_eids],
            "registrations": sorted(str(eid) for eid in self.registry.endpoints()),
            "routes": self.routes.to_dict(),
            "route_digest": self.route_digest(),
            "store": self.store.depths(),
            "discovery": self.discovery_enabled,
            "clas": {name: cla.describe() for name, cla in sorted(self._clas.items())},
        }

    def __repr__(self) -> str:
        return f"ScopeInstance({self.node}/{self.scope})"
