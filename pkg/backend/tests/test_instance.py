"""
Dispatch, store-and-retry and reconfiguration of a single BPA instance.
"""

from typing import Optional

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from backend.src.bpa import DispatchOutcome, NextHop, RouteEntry, RoutingTable, ScopeInstance
from backend.src.bundle import (
    AuditLog,
    Bundle,
    CreationTimestamp,
    EventKind,
    digest,
    encode_bundle,
    parse_eid,
    parse_pattern,
)
from backend.src.cla import ConvergenceLayerAdapter, bpdu_payload
from backend.src.utils.clock import DEFAULT_VIRTUAL_START_MS, VirtualScheduler
from backend.src.utils.errors import LinkDown, PeerRejected, UnknownCla

NOW_MS = DEFAULT_VIRTUAL_START_MS


class RecordingCla(ConvergenceLayerAdapter):
    """Keeps transmitted bundles in memory; link state is set by the test."""

    kind = "recording"

    def __init__(self, name: str = "tcp"):
        super().__init__(name)
        self.up = True
        self.error: Optional[Exception] = None
        self.reachable: set = set()
        self.sent: list[tuple[str, Bundle]] = []

    def can_transmit(self, address: str) -> bool:
        return self.up

    def transmit(self, address: str, bundle: Bundle) -> None:
        if self.error is not None:
            raise self.error
        self.sent.append((address, bundle))

    def may_reach(self, dest, now: float) -> bool:
        return dest in self.reachable


def routes_to(
    pattern: str = "ipn:2.*", cla: str = "tcp", address: str = "peer:4556"
) -> RoutingTable:
    return RoutingTable([RouteEntry(parse_pattern(pattern), NextHop(cla, address))])


@pytest.fixture
def cla():
    return RecordingCla()


@pytest.fixture
def node(make_instance, cla):
    instance = make_instance(routes=routes_to())
    instance.attach_cla(cla)
    instance.start()
    return instance


@pytest.fixture
def fresh(make_bundle):
    """Bundles created at the current virtual DTN time."""

    def make(**kwargs) -> Bundle:
        kwargs.setdefault("time_ms", NOW_MS)
        return make_bundle(**kwargs)

    return make


def kinds(audit) -> list[EventKind]:
    return [event.kind for event in audit.events()]


# =============================================================================
# Dispatch
# =============================================================================


class TestDispatch:
    def test_registered_destination_is_delivered_without_lookup(self, node, fresh, audit):
        delivered = []
        node.register(parse_eid("ipn:1.1"), delivered.append)
        bundle = fresh(dest="ipn:1.1")
        assert node.dispatch(bundle) == DispatchOutcome.DELIVERED_LOCALLY
        assert delivered == [bundle]
        assert kinds(audit) == [EventKind.DELIVER]

    def test_forward(self, node, cla, fresh, audit):
        bundle = fresh()
        assert node.dispatch(bundle) == DispatchOutcome.FORWARDED
        assert cla.sent == [("peer:4556", bundle)]
        lookup, forward = audit.events()
        assert lookup.kind == EventKind.LOOKUP and lookup.detail == "ipn:2.0"
        assert forward.kind == EventKind.FORWARD and forward.detail == "tcp:peer:4556"
        assert forward.bundle_id == bundle.bundle_id

    def test_no_route_is_deleted(self, node, fresh, audit):
        assert node.dispatch(fresh(dest="ipn:9.0")) == DispatchOutcome.DELETED
        assert audit.select(EventKind.DELETE)[0].detail == "no route"

    def test_no_route_waits_when_discovery_is_enabled(self, make_instance, fresh, audit):
        instance = make_instance(discovery_enabled=True)
        assert instance.dispatch(fresh(dest="dtn://chap.mars")) == DispatchOutcome.STORED
        assert instance.store.depths() == {"pending": 1}

    def test_no_route_waits_for_a_planned_contact(self, make_instance, cla, fresh):
        instance = make_instance()
        instance.attach_cla(cla)
        cla.reachable.add(parse_eid("ipn:7.0"))
        assert instance.dispatch(fresh(dest="ipn:7.0")) == DispatchOutcome.STORED

    def test_expired_bundle_is_deleted_before_lookup(self, node, make_bundle, audit):
        assert node.dispatch(make_bundle(time_ms=1000)) == DispatchOutcome.DELETED
        assert kinds(audit) == [EventKind.DELETE]
        assert audit.events()[0].detail == "expired"

    def test_unknown_cla_is_deleted(self, make_instance, fresh, audit):
        instance = make_instance(routes=routes_to(cla="ltp"))
        assert instance.dispatch(fresh()) == DispatchOutcome.DELETED
        assert audit.select(EventKind.DELETE)[0].detail == "unknown CLA ltp"

    def test_link_down_is_stored_under_the_hop(self, node, cla, fresh):
        cla.up = False
        assert node.dispatch(fresh()) == DispatchOutcome.STORED
        assert node.store.depths() == {"tcp:peer:4556": 1}

    def test_transmit_link_down_is_stored(self, node, cla, fresh):
        cla.error = LinkDown("contact ended")
        assert node.dispatch(fresh()) == DispatchOutcome.STORED

    def test_peer_rejected_is_deleted(self, node, cla, fresh, audit):
        cla.error = PeerRejected("NACK")
        assert node.dispatch(fresh()) == DispatchOutcome.DELETED
        assert audit.select(EventKind.DELETE)[0].detail == "rejected: NACK"

    def test_failing_agent_deletes(self, node, fresh, audit):
        def agent(bundle):
            raise ConnectionResetError("gone")

        node.register(parse_eid("ipn:1.1"), agent)
        assert node.dispatch(fresh(dest="ipn:1.1")) == DispatchOutcome.DELETED
        assert audit.select(EventKind.DELETE)[0].detail.startswith("delivery failed")

    def test_later_bundles_queue_behind_stored_ones(self, node, cla, fresh, audit):
        cla.up = False
        first = fresh(sequence=0)
        node.dispatch(first)
        cla.up = True
        second = fresh(sequence=1)
        assert node.dispatch(second) == DispatchOutcome.STORED
        stored = audit.select(EventKind.STORE)[-1]
        assert stored.detail == "tcp:peer:4556: queued behind stored bundles"
        assert cla.sent == []
        node.store_and_retry("tcp", "peer:4556")
        assert [bundle for _, bundle in cla.sent] == [first, second]


# =============================================================================
# Ingress and local creation
# =============================================================================


class TestIngress:
    def test_receive_records_parse_then_dispatches(self, node, cla, fresh, audit):
        bundle = fresh()
        data = encode_bundle(bundle)
        assert node.receive(data, via="tcp") == DispatchOutcome.FORWARDED
        parse = audit.events()[0]
        assert parse.kind == EventKind.PARSE
        assert parse.digest == digest(data)
        assert cla.sent[0][1] == bundle

    def test_malformed_input_is_dropped(self, node, audit):
        assert node.receive(b"\x9f\xff") is None
        assert kinds(audit) == [EventKind.PARSE, EventKind.DELETE]
        assert audit.events()[1].detail.startswith("malformed")

    def test_create_bundle(self, node, scheduler):
        first = node.create_bundle(parse_eid("ipn:2.0"), b"a")
        second = node.create_bundle(parse_eid("ipn:2.0"), b"b")
        scheduler.advance(0.001)
        third = node.create_bundle(parse_eid("ipn:2.0"), b"c", lifetime_ms=10)
        assert first.source == parse_eid("ipn:1.0")
        assert first.creation.time_ms == NOW_MS
        assert [first.creation.sequence, second.creation.sequence] == [0, 1]
        assert (third.creation.time_ms, third.creation.sequence) == (NOW_MS + 1, 0)
        assert first.lifetime_ms == node.default_lifetime_ms
        assert third.lifetime_ms == 10

    def test_explicit_zero_lifetime_is_kept(self, node, audit):
        assert node.create_bundle(parse_eid("ipn:2.0"), b"a", lifetime_ms=0).lifetime_ms == 0
        assert node.create_bundle(parse_eid("ipn:2.0"), b"b").lifetime_ms == node.default_lifetime_ms
        node.submit(parse_eid("ipn:2.0"), b"c", lifetime_ms=0)
        assert audit.select(EventKind.DELETE)[0].detail == "expired"

    def test_submit_dispatches(self, node, cla):
        bundle = node.submit(parse_eid("ipn:2.5"), b"x")
        assert cla.sent == [("peer:4556", bundle)]

    def test_inspect_hook_parses_foreign_payloads(self, node, fresh, audit):
        inner = fresh(dest="ipn:6.1", payload=b"secret")
        outer = fresh(payload=bpdu_payload(inner))
        node.inspect_payloads = True
        node.dispatch(outer)
        parses = audit.select(EventKind.PARSE, scope="s1")
        assert [event.digest for event in parses] == [digest(encode_bundle(inner))]


# =============================================================================
# Store and retry, reconfiguration
# =============================================================================


class TestStoreAndRetry:
    def test_contact_start_retries_in_fifo_order(self, node, cla, fresh):
        cla.up = False
        bundles = [fresh(sequence=i) for i in range(3)]
        for bundle in bundles:
            node.dispatch(bundle)
        cla.up = True
        outcomes = node.store_and_retry("tcp", "peer:4556")
        assert outcomes == [DispatchOutcome.FORWARDED] * 3
        assert [bundle for _, bundle in cla.sent] == bundles
        assert len(node.store) == 0

    def test_contact_start_also_retries_pending(self, make_instance, cla, fresh):
        instance = make_instance(discovery_enabled=True)
        instance.attach_cla(cla)
        instance.dispatch(fresh())
        instance.routes.learn(parse_eid("ipn:2.0"), NextHop("tcp", "peer:4556"))
        instance.on_contact_started("tcp", "peer:4556")
        assert len(cla.sent) == 1

    def test_requeue(self, node, fresh, audit):
        bundle = fresh()
        node.requeue(bundle, NextHop("tcp", "peer:4556"))
        assert node.store.take(NextHop("tcp", "peer:4556")) == [bundle]
        assert audit.select(EventKind.STORE)[0].detail == "tcp:peer:4556: link lost"

    def test_expired_bundles_are_purged_on_retry(self, node, cla, fresh, scheduler, audit):
        cla.up = False
        node.dispatch(fresh(lifetime_ms=500))
        scheduler.advance(1.0)
        cla.up = True
        assert node.store_and_retry("tcp", "peer:4556") == []
        assert audit.select(EventKind.DELETE)[0].detail == "expired in store"
        assert cla.sent == []

    def test_routes_changed_redispatches_pending(self, make_instance, cla, fresh):
        instance = make_instance(discovery_enabled=True)
        instance.attach_cla(cla)
        instance.dispatch(fresh(dest="dtn://chap.mars"))
        instance.routes.learn(parse_eid("dtn://chap.mars"), NextHop("tcp", "chap:4556"))
        instance.routes_changed()
        assert [address for address, _ in cla.sent] == ["chap:4556"]


class TestReconfiguration:
    def test_replace_routes(self, make_instance, cla, fresh, audit):
        instance = make_instance(discovery_enabled=True)
        instance.attach_cla(cla)
        instance.start()
        instance.dispatch(fresh())
        table = routes_to()
        instance.replace_routes(table)
        assert instance.route_digest() == table.digest()
        (reconfigure,) = audit.select(EventKind.RECONFIGURE)
        assert reconfigure.detail == table.digest()
        assert len(cla.sent) == 1

    def test_replace_routes_rejects_unknown_cla(self, node):
        before = node.route_digest()
        with pytest.raises(UnknownCla):
            node.replace_routes(routes_to(cla="ltp"))
        assert node.route_digest() == before

    def test_start_validates_routes(self, make_instance):
        with pytest.raises(UnknownCla):
            make_instance(routes=routes_to(cla="ltp")).start()


class TestInstanceModel:
    def test_snapshot(self, node, cla, fresh):
        node.register(parse_eid("ipn:1.1"), lambda bundle: None)
        cla.up = False
        node.dispatch(fresh())
        snapshot = node.snapshot()
        assert snapshot["node"] == "n1" and snapshot["scope"] == "s1"
        assert snapshot["registrations"] == ["ipn:1.1"]
        assert snapshot["store"] == {"tcp:peer:4556": 1}
        assert snapshot["clas"] == {"tcp": {"type": "recording"}}
        assert snapshot["route_digest"] == node.route_digest()

    def test_duplicate_cla_name(self, node):
        with pytest.raises(ValueError):
            node.attach_cla(RecordingCla("tcp"))

    def test_needs_a_node_eid(self, make_instance):
        with pytest.raises(ValueError):
            make_instance(eids=())


# =============================================================================
# Properties over many bundles
# =============================================================================

OUTCOME_EVENTS = {
    DispatchOutcome.DELIVERED_LOCALLY: EventKind.DELIVER,
    DispatchOutcome.FORWARDED: EventKind.FORWARD,
    DispatchOutcome.STORED: EventKind.STORE,
    DispatchOutcome.DELETED: EventKind.DELETE,
}

DESTINATIONS = {"local": "ipn:1.1", "routed": "ipn:2.7", "unroutable": "ipn:9.0"}

arrivals = st.lists(
    st.tuples(
        st.sampled_from(["local", "routed", "unroutable", "expired"]),
        st.sampled_from(["up", "down", "link-down", "rejected"]),
    ),
    min_size=1,
    max_size=40,
)


class TestDispatchProperties:
    @given(arrivals)
    @settings(max_examples=100, deadline=None)
    def test_every_bundle_gets_exactly_one_outcome(self, arrivals):
        scheduler = VirtualScheduler()
        audit = AuditLog(scheduler.now)
        cla = RecordingCla()
        instance = ScopeInstance(
            node="n1",
            scope="s1",
            node_eids=[parse_eid("ipn:1.0")],
            routes=routes_to(),
            scheduler=scheduler,
            events=audit.scope("n1", "s1"),
        )
        instance.attach_cla(cla)
        instance.register(parse_eid("ipn:1.1"), lambda bundle: None)

        outcomes = {}
        for sequence, (kind, link) in enumerate(arrivals):
            cla.up = link != "down"
            cla.error = {"link-down": LinkDown("gone"), "rejected": PeerRejected("no")}.get(link)
            bundle = Bundle(
                destination=parse_eid(DESTINATIONS.get(kind, "ipn:2.7")),
                source=parse_eid("ipn:1.0"),
                creation=CreationTimestamp(NOW_MS, sequence),
                lifetime_ms=0 if kind == "expired" else 60_000,
            )
            outcomes[bundle.bundle_id] = instance.dispatch(bundle)

        recorded = [
            (event.bundle_id, event.kind)
            for event in audit.events()
            if event.kind in OUTCOME_EVENTS.values()
        ]
        assert sorted(recorded) == sorted(
            (bundle_id, OUTCOME_EVENTS[outcome]) for bundle_id, outcome in outcomes.items()
        )

    def test_static_table_is_unchanged_by_a_thousand_bundles(self, node, cla, fresh, audit):
        before = (node.route_digest(), node.routes.to_dict())
        for index in range(1000):
            cla.up = index % 3 != 0
            node.dispatch(fresh(dest=f"ipn:{2 + index % 2}.{index}", sequence=index))
        cla.up = True
        node.store_and_retry("tcp", "peer:4556")
        assert (node.route_digest(), node.routes.to_dict()) == before
        assert audit.select(EventKind.RECONFIGURE) == []
        assert len(cla.sent) == 500
