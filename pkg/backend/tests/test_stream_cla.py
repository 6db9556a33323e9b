"""
Stream CLA between two emulated nodes: contacts, pacing and requeueing.
"""

import pytest

from backend.src.bpa import NextHop, RouteEntry, RoutingTable
from backend.src.bundle import EventKind, parse_eid, parse_pattern
from backend.src.cla import Contact, StreamCla
from backend.src.transport import FrameTooLarge, LengthPrefixFramer, frame
from backend.src.utils.errors import LinkDown

DRONE = parse_eid("ipn:2.1")


@pytest.fixture
def pair(make_instance, network, scheduler):
    """Factory for a sender ``a`` routing ipn:2.* to a receiver ``b``."""

    def build(contacts=(Contact("b:4556", 0.0),), peer="b:4556"):
        routes = RoutingTable([RouteEntry(parse_pattern("ipn:2.*"), NextHop("tcp", peer))])
        sender = make_instance(node="a", scope="s", eids=("ipn:1.0",), routes=routes)
        sender_cla = StreamCla("tcp", network, listen="a:4556", origin="a", contacts=contacts)
        sender.attach_cla(sender_cla)

        receiver = make_instance(node="b", scope="s", eids=("ipn:2.0",))
        receiver.attach_cla(StreamCla("tcp", network, listen="b:4556", origin="b"))

        deliveries = []
        receiver.register(DRONE, lambda bundle: deliveries.append((scheduler.now(), bundle)))
        sender.start()
        receiver.start()
        return sender, sender_cla, deliveries

    return build


class TestStreamDelivery:
    def test_bundle_crosses_the_link(self, pair, scheduler, audit):
        sender, _, deliveries = pair()
        bundle = sender.submit(DRONE, b"fly-to")
        scheduler.run_until_idle()
        assert [delivered for _, delivered in deliveries] == [bundle]
        assert [event.node for event in audit.select(EventKind.PARSE)] == ["b"]

    def test_link_delay(self, pair, network, scheduler):
        network.set_link_delay("a", "b:4556", 1.5)
        sender, _, deliveries = pair()
        sender.submit(DRONE, b"x")
        scheduler.run_until_idle()
        assert deliveries[0][0] >= 1.5

    def test_stored_until_contact_starts(self, pair, scheduler):
        sender, _, deliveries = pair(contacts=(Contact("b:4556", 2.0),))
        sender.submit(DRONE, b"x")
        scheduler.run_until(1.0)
        assert sender.store.depths() == {"tcp:b:4556": 1}
        scheduler.run_until_idle()
        assert len(deliveries) == 1
        assert deliveries[0][0] >= 2.0
        assert len(sender.store) == 0

    def test_rate_limited_contact_requeues_unsent_bundles(self, pair, scheduler, audit):
        sender, _, deliveries = pair(contacts=(Contact("b:4556", 0.0, end=0.5, rate=50),))
        for index in range(3):
            sender.submit(DRONE, bytes([index]) * 30)
        scheduler.run_until_idle()
        assert len(deliveries) == 1
        assert sender.store.depths() == {"tcp:b:4556": 2}
        requeued = audit.select(EventKind.STORE, node="a")
        assert [event.detail for event in requeued] == ["tcp:b:4556: contact ended"] * 2

    def test_dial_failure_requeues(self, pair, scheduler, audit):
        sender, _, _ = pair(contacts=(Contact("nowhere:4556", 0.0),), peer="nowhere:4556")
        sender.submit(DRONE, b"x")
        scheduler.run_until(1.0)
        assert sender.store.depths() == {"tcp:nowhere:4556": 1}
        assert "dial failed" in audit.select(EventKind.STORE)[0].detail

    def test_lost_link_is_retried_while_the_contact_lasts(
        self, pair, make_instance, network, scheduler
    ):
        sender, cla, _ = pair(contacts=(Contact("c:4556", 0.0),), peer="c:4556")
        sender.submit(DRONE, b"first")
        scheduler.run_until(1.0)
        assert sender.store.depths() == {"tcp:c:4556": 1}

        late = make_instance(node="c", scope="s", eids=("ipn:2.0",))
        late.attach_cla(StreamCla("tcp", network, listen="c:4556", origin="c"))
        delivered = []
        late.register(DRONE, delivered.append)
        late.start()
        sender.submit(DRONE, b"second")
        assert sender.store.depths() == {"tcp:c:4556": 2}

        scheduler.run_until(1.0 + 2 * cla.retry_interval)
        assert [bundle.payload for bundle in delivered] == [b"first", b"second"]
        assert len(sender.store) == 0

    def test_no_retry_once_the_contact_ended(self, pair, scheduler, audit):
        contact = Contact("nowhere:4556", 0.0, end=2.0)
        sender, _, _ = pair(contacts=(contact,), peer="nowhere:4556")
        sender.submit(DRONE, b"x")
        scheduler.run_until_idle()
        assert sender.store.depths() == {"tcp:nowhere:4556": 1}
        assert len(audit.select(EventKind.STORE)) == 1


class TestContacts:
    def test_transmit_outside_contact(self, pair, make_bundle):
        _, cla, _ = pair(contacts=())
        with pytest.raises(LinkDown):
            cla.transmit("b:4556", make_bundle())

    def test_open_and_close_contact(self, pair, scheduler):
        sender, cla, deliveries = pair(contacts=())
        sender.submit(DRONE, b"x")
        scheduler.run_until_idle()
        assert len(deliveries) == 0

        cla.open_contact("b:4556")
        scheduler.run_until_idle()
        assert len(deliveries) == 1
        assert cla.can_transmit("b:4556")

        cla.close_contact("b:4556")
        assert not cla.can_transmit("b:4556")

    def test_planned_contact_may_reach(self, pair):
        reachable = (parse_pattern("ipn:6.*"),)
        _, cla, _ = pair(contacts=(Contact("b:4556", 5.0, reachable=reachable),))
        assert cla.may_reach(parse_eid("ipn:6.1"), 0.0)
        assert not cla.may_reach(parse_eid("ipn:7.1"), 0.0)

    def test_describe(self, pair):
        _, cla, _ = pair()
        assert cla.describe() == {
            "type": "stream",
            "listen": "a:4556",
            "contacts": [{"address": "b:4556", "start": 0.0, "end": None, "rate": 0}],
            "links": {},
        }

    @pytest.mark.parametrize("start,end,rate", [(1.0, 1.0, 0), (2.0, 1.0, 0), (0.0, 1.0, -1)])
    def test_invalid_contact(self, start, end, rate):
        with pytest.raises(ValueError):
            Contact("b:4556", start, end, rate)


class TestFraming:
    def test_reassembles_split_frames(self):
        stream = frame(b"first") + frame(b"") + frame(b"third")
        framer = LengthPrefixFramer()
        frames = []
        for index in range(0, len(stream), 3):
            frames.extend(framer.feed(stream[index : index + 3]))
        assert frames == [b"first", b"", b"third"]
        assert framer.buffered == 0

    def test_frame_too_large(self):
        framer = LengthPrefixFramer(max_frame_size=10)
        with pytest.raises(FrameTooLarge):
            list(framer.feed(frame(b"x" * 11)))
