"""
IPND-style neighbor discovery for one BPA instance.

The emitter broadcasts a beacon once per period (jittered by up to 10%). The
listener turns every fresh beacon of another node into a learned route plus an
open-ended contact on the advertised address, and forgets both when three
periods pass without news from that node.
"""

import random
from typing import TYPE_CHECKING, Optional

from ..bpa.routing import NextHop
from ..bundle import EndpointId, EventKind
from ..utils.clock import TimerHandle
from ..utils.config import app_settings
from ..utils.errors import ChannelUnavailable, MalformedBeacon
from .beacon import Beacon, decode_beacon, encode_beacon
from .channel import BeaconChannel

if TYPE_CHECKING:
    from ..bpa.instance import ScopeInstance
    from ..cla.stream import StreamCla

JITTER = 0.1
EXPIRY_PERIODS = 3


class NeighborDiscovery:
    """
    Args:
        instance: The enabling ScopeInstance
        channel: Broadcast channel
        cla: Stream CLA advertised in beacons and used for learned contacts
        member: Channel member name, ``node/scope``
        period: Beacon period in seconds
        seed: Seed of the jitter generator
    """

    def __init__(
        self,
        instance: "ScopeInstance",
        channel: BeaconChannel,
        cla: "StreamCla",
        member: Optional[str] = None,
        period: float = app_settings.BEACON_PERIOD,
        seed: int | str = 0,
    ):
        if period <= 0:
            raise ValueError("beacon period must be positive")
        self.instance = instance
        self.channel = channel
        self.cla = cla
        self.member = member or f"{instance.node}/{instance.scope}"
        self.period = period
        self._rng = random.Random(seed)
        self._sequence = 0
        self._timer: Optional[TimerHandle] = None
        self._last_sequence: dict[EndpointId, int] = {}
        self._neighbors: dict[EndpointId, tuple[NextHop, TimerHandle]] = {}
        self.emitted = 0
        self.learned = 0
        self.expired = 0

    @property
    def neighbors(self) -> dict[EndpointId, NextHop]:
        return {eid: hop for eid, (hop, _) in self._neighbors.items()}

    def start(self) -> None:
        if not self.cla.listen_address:
            raise ValueError(f"CLA {self.cla.name} has no address to advertise")
        self.channel.join(self.member, self._on_datagram)
        first = self._rng.uniform(0, JITTER * self.period)
        self._timer = self.instance.scheduler.call_later(first, self.emit_beacon)

    def stop(self) -> None:
        if self._timer is not None:
            self._timer.cancel()
            self._timer = None
        self.channel.leave(self.member)
        for _, timer in self._neighbors.values():
            timer.cancel()

    # Emitter

    def emit_beacon(self) -> None:
        """Broadcast one beacon and schedule the next one."""
        self._sequence += 1
        beacon = Beacon(
            source=self.instance.primary_eid,
            sequence=self._sequence,
            period=self.period,
            cla=self.cla.name,
            address=self.cla.listen_address or "",
        )
        try:
            self.channel.broadcast(self.member, encode_beacon(beacon))
            self.emitted += 1
        except ChannelUnavailable as exc:
            self.instance.log.warning(f"Beacon not sent, retrying next period: {exc}")
        delay = self.period * (1 + self._rng.uniform(-JITTER, JITTER))
        self._timer = self.instance.scheduler.call_later(delay, self.emit_beacon)

    # Listener

    def _on_datagram(self, data: bytes) -> None:
        self.instance.post(self._handle_datagram, data)

    def _handle_datagram(self, data: bytes) -> None:
        try:
            beacon = decode_beacon(data)
        except MalformedBeacon as exc:
            self.instance.log.debug(f"Ignoring undecodable beacon: {exc}")
            return
        self.handle_beacon(beacon)

    def handle_beacon(self, beacon: Beacon) -> bool:
        """
        Learn or refresh the neighbor that sent ``beacon``.

        Returns:
            bool: False when the beacon was ignored (own or stale)
        """
        if beacon.source in self.instance.node_eids:
            return False
        last = self._last_sequence.get(beacon.source)
        if last is not None and beacon.sequence <= last:
            self.instance.log.debug(f"Stale beacon {beacon.sequence} from {beacon.source}")
            return False
        self._last_sequence[beacon.source] = beacon.sequence

        hop = NextHop(self.cla.name, beacon.address)
        current = self._neighbors.get(beacon.source)
        if current is not None:
            current[1].cancel()
        timer = self.instance.scheduler.call_later(
            EXPIRY_PERIODS * beacon.period, self._expire, beacon.source
        )
        self._neighbors[beacon.source] = (hop, timer)
        if current is None or current[0] != hop:
            if current is not None:
                self.cla.close_contact(current[0].address)
            self._learn(beacon.source, hop)
        return True

    def _learn(self, source: EndpointId, hop: NextHop) -> None:
        self.learned += 1
        self.instance.routes.learn(source, hop)
        self.instance.events.record(
            EventKind.DISCOVERY, related=str(source), detail=f"learned {source} via {hop}"
        )
        self.instance.log.info(f"Discovered {source} at {hop.address}")
        self.cla.open_contact(hop.address)
        self.instance.routes_changed()

    def _expire(self, source: EndpointId) -> None:
        entry = self._neighbors.pop(source, None)
        if entry is None:
            return
        hop, _ = entry
        # A restarted neighbor counts its beacons from 1 again
        self._last_sequence.pop(source, None)
        self.expired += 1
        self.instance.routes.forget(source)
        self.cla.close_contact(hop.address)
        self.instance.events.record(
            EventKind.DISCOVERY, related=str(source), detail=f"expired {source} via {hop}"
        )
        self.instance.log.info(f"Neighbor {source} expired")
