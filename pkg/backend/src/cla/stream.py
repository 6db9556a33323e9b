"""
Stream CLA: length-prefixed bundle encodings over a reliable byte stream.

Contacts are enforced here, not in the BPA. A bundle handed to ``transmit``
outside a contact raises LinkDown; bundles still queued when a contact ends or
a dial fails go back to the instance's store. A link lost while its contact
is still open is retried every ``retry_interval`` seconds.
"""

import math
from collections import deque
from typing import Any, Iterable, Optional

from ..bundle import Bundle, EndpointId, encode_bundle
from ..transport import Connection, FrameTooLarge, LengthPrefixFramer, Network, frame
from ..utils.clock import TimerHandle
from ..utils.config import app_settings
from ..utils.errors import LinkDown
from .base import ConvergenceLayerAdapter
from .contacts import Contact, ContactPlan


class _InboundLink:
    """Receives frames from one accepted connection."""

    def __init__(self, cla: "StreamCla", connection: Connection):
        self._cla = cla
        self._connection = connection
        self._framer = LengthPrefixFramer()

    def data_received(self, data: bytes) -> None:
        try:
            for payload in self._framer.feed(data):
                self._cla.instance.post(self._cla.instance.receive, payload, self._cla.name)
        except FrameTooLarge as exc:
            self._cla.log.warning(f"Closing inbound stream: {exc}")
            self._connection.close()

    def connection_lost(self) -> None:
        pass


class _OutboundLink:
    """Lazily dialed connection to one peer, with a paced send queue."""

    def __init__(self, cla: "StreamCla", address: str):
        self.cla = cla
        self.address = address
        self.queue: deque[Bundle] = deque()
        self.connection: Optional[Connection] = None
        self.sent = 0
        self._dialing = False
        self._next_free = 0.0
        self._pump: Optional[TimerHandle] = None

    def enqueue(self, bundle: Bundle) -> None:
        self.queue.append(bundle)
        if self.connection is None:
            if not self._dialing:
                self._dialing = True
                self.cla.network.dial(
                    self.address,
                    lambda _: self,
                    self._ready,
                    self._failed,
                    origin=self.cla.origin,
                )
        else:
            self._schedule()

    def _ready(self, connection: Connection) -> None:
        self._dialing = False
        self.connection = connection
        self.cla.log.debug(f"Connected to {self.address}")
        self._schedule()

    def _failed(self, exc: Exception) -> None:
        self._dialing = False
        self.cla.log.warning(f"Dial to {self.address} failed: {exc}")
        self.cla._drop_link(self, f"dial failed: {exc}")

    def _schedule(self) -> None:
        if self._pump is None and self.queue:
            scheduler = self.cla.instance.scheduler
            self._pump = scheduler.call_at(
                max(scheduler.now(), self._next_free), self._send_next
            )

    def _send_next(self) -> None:
        self._pump = None
        if not self.queue or self.connection is None:
            return
        scheduler = self.cla.instance.scheduler
        contact = self.cla.plan.active(self.address, scheduler.now())
        if contact is None:
            self.cla._drop_link(self, "contact ended")
            return
        data = frame(encode_bundle(self.queue.popleft()))
        try:
            self.connection.write(data)
        except ConnectionError as exc:
            self.cla._drop_link(self, f"connection lost: {exc}")
            return
        self.sent += 1
        if contact.rate:
            self._next_free = scheduler.now() + len(data) / contact.rate
        self._schedule()

    def take_queue(self) -> list[Bundle]:
        if self._pump is not None:
            self._pump.cancel()
            self._pump = None
        bundles = list(self.queue)
        self.queue.clear()
        return bundles

    def close(self) -> None:
        if self.connection is not None:
            self.connection.close()
            self.connection = None

    # ConnectionHandler of the dialed connection

    def data_received(self, data: bytes) -> None:
        pass

    def connection_lost(self) -> None:
        self.connection = None
        self.cla._drop_link(self, "connection lost")


class StreamCla(ConvergenceLayerAdapter):
    """
    Args:
        name: CLA name used in routes
        network: Network to listen and dial on
        listen: Own address peers dial
        origin: Node name of the owning assembly
        contacts: Static contact windows
        retry_interval: Seconds before retrying bundles requeued by a lost link
    """

    kind = "stream"

    def __init__(
        self,
        name: str,
        network: Network,
        listen: Optional[str] = None,
        origin: Optional[str] = None,
        contacts: Iterable[Contact] = (),
        retry_interval: float = app_settings.RETRY_INTERVAL,
    ):
        super().__init__(name)
        self.network = network
        self.listen_address = listen
        self.origin = origin
        self.retry_interval = retry_interval
        self.plan = ContactPlan()
        self._static = list(contacts)
        self._links: dict[str, _OutboundLink] = {}
        self._timers: list[TimerHandle] = []
        self._retries: dict[str, TimerHandle] = {}
        self._running = False

    def start(self) -> None:
        self._running = True
        if self.listen_address:
            self.network.listen(
                self.listen_address,
                lambda connection: _InboundLink(self, connection),
                node=self.origin,
            )
        scheduler = self.instance.scheduler
        for contact in self._static:
            self.plan.add(contact)
            self._timers.append(scheduler.call_at(contact.start, self._contact_started, contact))
            if not math.isinf(contact.end):
                self._timers.append(scheduler.call_at(contact.end, self._contact_ended, contact))

    def stop(self) -> None:
        self._running = False
        for timer in [*self._timers, *self._retries.values()]:
            timer.cancel()
        self._timers.clear()
        self._retries.clear()
        for link in list(self._links.values()):
            self._drop_link(link, "CLA stopped")
        if self.listen_address:
            self.network.unlisten(self.listen_address)

    def open_contact(
        self, address: str, end: Optional[float] = None, rate: int = 0
    ) -> Contact:
        """Open a contact toward ``address`` now, until ``end`` or until closed."""
        now = self.instance.scheduler.now()
        existing = self.plan.active(address, now)
        if existing is not None and end is None:
            return existing
        contact = Contact(address, now, math.inf if end is None else end, rate)
        self.plan.add(contact)
        if end is not None:
            self._timers.append(
                self.instance.scheduler.call_at(end, self._contact_ended, contact)
            )
        self._contact_started(contact)
        return contact

    def close_contact(self, address: str) -> None:
        """End every contact toward ``address`` that covers the current time."""
        now = self.instance.scheduler.now()
        for contact in self.plan.for_address(address):
            if contact.covers(now):
                self._contact_ended(contact)

    def _contact_started(self, contact: Contact) -> None:
        self.log.info(f"Contact to {contact.address} started")
        self.instance.post(self.instance.on_contact_started, self.name, contact.address)

    def _contact_ended(self, contact: Contact) -> None:
        self.plan.remove(contact)
        if self.plan.active(contact.address, self.instance.scheduler.now()) is not None:
            return
        self.log.info(f"Contact to {contact.address} ended")
        retry = self._retries.pop(contact.address, None)
        if retry is not None:
            retry.cancel()
        link = self._links.get(contact.address)
        if link is not None:
            self._drop_link(link, "contact ended")

    def _drop_link(self, link: _OutboundLink, reason: str) -> None:
        if self._links.get(link.address) is link:
            del self._links[link.address]
        link.close()
        requeued = link.take_queue()
        for bundle in requeued:
            self.instance.requeue(bundle, self.hop(link.address), reason)
        if requeued and self._running and self.can_transmit(link.address):
            self._schedule_retry(link.address)

    def _schedule_retry(self, address: str) -> None:
        if address in self._retries:
            return
        self._retries[address] = self.instance.scheduler.call_later(
            self.retry_interval, self._retry, address
        )

    def _retry(self, address: str) -> None:
        self._retries.pop(address, None)
        if self.can_transmit(address):
            self.log.info(f"Retrying stored bundles for {address}")
            self.instance.store_and_retry(self.name, address)

    def can_transmit(self, address: str) -> bool:
        return self.plan.active(address, self.instance.scheduler.now()) is not None

    def transmit(self, address: str, bundle: Bundle) -> None:
        if not self.can_transmit(address):
            raise LinkDown(f"no contact to {address}")
        link = self._links.get(address)
        if link is None:
            link = self._links[address] = _OutboundLink(self, address)
        link.enqueue(bundle)

    def may_reach(self, dest: EndpointId, now: float) -> bool:
        return self.plan.may_reach(dest, now)

    def describe(self) -> dict[str, Any]:
        return {
            "type": self.kind,
            "listen": self.listen_address,
            "contacts": [contact.to_dict() for contact in self.plan],
            "links": {address: link.sent for address, link in self._links.items()},
        }
