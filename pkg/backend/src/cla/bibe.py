"""
Bundle-in-bundle encapsulation CLA.

The BIBE CLA bridges an upper scope to lower scopes. It holds nothing but AAP
client connections to the lower instances: it registers its lower-scope EIDs
like any application, sends BPDUs with SENDBUNDLE and receives them as
RECVBUNDLE. Lower instances never look inside the payload.
"""

from dataclasses import dataclass, field
from functools import partial
from typing import Any, Iterable, Optional

from ..bpa.aap import AapMessage, AapMessageType
from ..bpa.aap_client import AapClient
from ..bundle import (
    BibePdu,
    Bundle,
    CreationTimestamp,
    EndpointId,
    EventKind,
    ScopeEvents,
    decode_bpdu,
    decode_bundle,
    encode_bpdu,
    encode_bundle,
    parse_eid,
)
from ..transport import Network
from ..utils.clock import TimerHandle
from ..utils.config import app_settings
from ..utils.errors import LinkDown, MalformedBpdu, MalformedBundle, MalformedEid
from .base import ConvergenceLayerAdapter


@dataclass(frozen=True)
class BibeAddress:
    """
    ``<aap-endpoint>#<lower-eid>``: where the lower instance's application
    interface is, and the lower-scope EID of the next hop.
    """

    endpoint: str
    lower_eid: EndpointId

    @classmethod
    def parse(cls, text: str) -> "BibeAddress":
        endpoint, sep, eid = text.rpartition("#")
        if not sep or not endpoint:
            raise MalformedEid(f"BIBE address must be <aap-endpoint>#<eid>, got {text!r}")
        return cls(endpoint, parse_eid(eid))

    def __str__(self) -> str:
        return f"{self.endpoint}#{self.lower_eid}"


def bpdu_payload(inner: Bundle) -> bytes:
    """Outer payload carrying ``inner`` bit-exactly."""
    return encode_bpdu(BibePdu(encapsulated=encode_bundle(inner)))


def outer_lifetime(inner: Bundle, requested_ms: int, now_ms: int) -> int:
    """An outer bundle never outlives the bundle it carries."""
    return min(requested_ms, inner.remaining_lifetime_ms(now_ms))


def bibe_encapsulate(
    inner: Bundle,
    outer_dest: EndpointId,
    outer_source: EndpointId,
    lifetime_ms: int,
    now_ms: int,
    creation: Optional[CreationTimestamp] = None,
) -> Bundle:
    """
    Wrap ``inner`` into an outer bundle for a lower scope.

    Args:
        inner: Bundle of the upper scope
        outer_dest: Lower-scope EID of the next hop
        outer_source: Lower instance's node EID
        lifetime_ms: Requested outer lifetime
        now_ms: Current DTN time
        creation: Outer creation timestamp, ``(now_ms, 0)`` by default

    Returns:
        Bundle: Outer bundle whose payload is the BPDU of ``inner``
    """
    return Bundle(
        destination=outer_dest,
        source=outer_source,
        report_to=outer_source,
        creation=creation or CreationTimestamp(now_ms, 0),
        lifetime_ms=outer_lifetime(inner, lifetime_ms, now_ms),
        payload=bpdu_payload(inner),
    )


def bibe_decapsulate(payload: bytes, events: Optional[ScopeEvents] = None) -> Bundle:
    """
    Recover the inner bundle from an outer payload.

    The inner parse event is recorded with ``events``, the sink of the upper
    scope that owns the inner bundle.

    Raises:
        MalformedBpdu: The payload is not a BPDU
        MalformedBundle: The encapsulated bytes are not a bundle
    """
    return decode_bundle(decode_bpdu(payload).encapsulated, events)


def _endpoint_of(address: str) -> str:
    try:
        return BibeAddress.parse(address).endpoint
    except MalformedEid:
        return ""


@dataclass
class _LowerBinding:
    client: AapClient
    register: list[EndpointId] = field(default_factory=list)
    registered: set[EndpointId] = field(default_factory=set)
    # WELCOME received on the current connection
    up: bool = False
    reconnect: Optional[TimerHandle] = None


class BibeCla(ConvergenceLayerAdapter):
    """
    Args:
        name: CLA name used in routes
        network: Network the lower instances' AAP endpoints live on
        origin: Node name of the owning assembly
        lifetime_ms: Requested outer lifetime, clamped per bundle
        retry_interval: Seconds between reconnects to an unreachable lower instance

    Bundles for a lower instance that is not connected wait in the upper
    store under their BIBE hop and are retried once it welcomes us again.
    """

    kind = "bibe"

    def __init__(
        self,
        name: str,
        network: Network,
        origin: Optional[str] = None,
        lifetime_ms: int = app_settings.BIBE_LIFETIME_MS,
        retry_interval: float = app_settings.RETRY_INTERVAL,
    ):
        super().__init__(name)
        self.network = network
        self.origin = origin
        self.lifetime_ms = lifetime_ms
        self.retry_interval = retry_interval
        self._running = False
        self._lowers: dict[str, _LowerBinding] = {}
        self.encapsulated = 0
        self.decapsulated = 0

    def add_lower(self, endpoint: str, register: Iterable[EndpointId] = ()) -> None:
        """Bind a lower instance by its AAP endpoint and the EIDs to register there."""
        binding = self._lowers.get(endpoint)
        if binding is None:
            client = AapClient(
                self.network,
                endpoint,
                origin=self.origin,
                on_bundle=partial(self._received, endpoint),
                on_welcome=partial(self._lower_up, endpoint),
                on_closed=partial(self._lower_down, endpoint),
            )
            binding = self._lowers[endpoint] = _LowerBinding(client)
        binding.register.extend(eid for eid in register if eid not in binding.register)

    def start(self) -> None:
        self._running = True
        for binding in self._lowers.values():
            binding.client.connect()
            for eid in binding.register:
                binding.client.register(eid, partial(self._registered, binding, eid))

    def stop(self) -> None:
        self._running = False
        for binding in self._lowers.values():
            if binding.reconnect is not None:
                binding.reconnect.cancel()
                binding.reconnect = None
            binding.client.close()

    def _lower_up(self, endpoint: str, node_eid: EndpointId) -> None:
        self._lowers[endpoint].up = True
        self.log.info(f"Lower instance {endpoint} is {node_eid}")
        self.instance.post(self._retry_stored, endpoint)

    def _lower_down(self, endpoint: str, reason: Optional[Exception]) -> None:
        binding = self._lowers[endpoint]
        binding.up = False
        binding.registered.clear()
        if not self._running or binding.reconnect is not None:
            return
        self.log.warning(
            f"Lower instance {endpoint} unreachable ({reason}), "
            f"reconnecting in {self.retry_interval}s"
        )
        binding.reconnect = self.instance.scheduler.call_later(
            self.retry_interval, self._reconnect, endpoint
        )

    def _reconnect(self, endpoint: str) -> None:
        binding = self._lowers[endpoint]
        binding.reconnect = None
        if self._running:
            binding.client.connect()

    def _retry_stored(self, endpoint: str) -> None:
        instance = self.instance
        for hop in instance.store.hops():
            if hop.cla == self.name and _endpoint_of(hop.address) == endpoint:
                instance.store_and_retry(hop.cla, hop.address)

    def _registered(
        self, binding: _LowerBinding, eid: EndpointId, response: Optional[AapMessage]
    ) -> None:
        if response is not None and response.msg_type == AapMessageType.ACK:
            binding.registered.add(eid)
            self.log.info(f"Registered {eid} at lower instance {binding.client.address}")
        elif response is None:
            self.log.warning(f"Registration of {eid} at {binding.client.address} interrupted")
        else:
            self.log.error(f"Lower instance {binding.client.address} refused {eid}")

    def can_transmit(self, address: str) -> bool:
        binding = self._lowers.get(_endpoint_of(address))
        return binding is not None and binding.up

    def transmit(self, address: str, bundle: Bundle) -> None:
        try:
            target = BibeAddress.parse(address)
        except MalformedEid as exc:
            raise LinkDown(str(exc)) from exc
        binding = self._lowers.get(target.endpoint)
        if binding is None:
            raise LinkDown(f"no lower instance bound at {target.endpoint}")
        now_ms = self.instance.scheduler.dtn_time_ms()
        binding.client.send(
            target.lower_eid,
            bpdu_payload(bundle),
            outer_lifetime(bundle, self.lifetime_ms, now_ms),
            partial(self._confirmed, binding.client, bundle, address),
        )

    def _confirmed(
        self,
        client: AapClient,
        inner: Bundle,
        address: str,
        response: Optional[AapMessage],
    ) -> None:
        instance = self.instance
        if response is None:
            instance.post(instance.requeue, inner, self.hop(address), "lower instance unreachable")
            return
        if response.msg_type != AapMessageType.SENDCONFIRM:
            instance.post(instance.bundle_failed, inner, "rejected by lower instance")
            return
        self.encapsulated += 1
        instance.events.record(
            EventKind.ENCAPSULATE,
            bundle_id=inner.bundle_id,
            related=client.bundle_id_text(response),
            detail=address,
        )

    def _received(self, endpoint: str, source: EndpointId, payload: bytes) -> None:
        self.instance.post(self._decapsulate, endpoint, payload)

    def _decapsulate(self, endpoint: str, payload: bytes) -> None:
        instance = self.instance
        try:
            inner = bibe_decapsulate(payload, instance.events)
        except (MalformedBpdu, MalformedBundle) as exc:
            self.log.warning(f"Outer bundle from {endpoint} deleted: {exc}")
            instance.events.record(EventKind.DELETE, detail=f"decapsulation failed: {exc}")
            return
        self.decapsulated += 1
        instance.events.record(
            EventKind.DECAPSULATE, bundle_id=inner.bundle_id, detail=endpoint
        )
        instance.dispatch(inner)

    def describe(self) -> dict[str, Any]:
        return {
            "type": self.kind,
            "lowers": {
                endpoint: sorted(str(eid) for eid in binding.registered)
                for endpoint, binding in self._lowers.items()
            },
            "encapsulated": self.encapsulated,
            "decapsulated": self.decapsulated,
        }
