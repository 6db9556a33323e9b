"""
Shared fixtures. The settings singleton is read at import time, so the test
environment is selected before anything from ``backend.src`` is imported.
"""

import os

os.environ["SCOPESTACK_CURRENT_ENV"] = "test"
os.environ["SCOPESTACK_STORE_URL"] = "sqlite://"
os.environ.setdefault("SCOPESTACK_LOG_LEVEL", "WARNING")

from pathlib import Path  # noqa: E402
from typing import Callable, Iterator, Optional  # noqa: E402

import pytest  # noqa: E402

from backend.src.bpa import AapServer, RoutingTable, ScopeInstance  # noqa: E402
from backend.src.bundle import (  # noqa: E402
    AuditLog,
    Bundle,
    CreationTimestamp,
    CrcType,
    parse_eid,
)
from backend.src.db.database import cleanup_database  # noqa: E402
from backend.src.transport import EmulatedNetwork  # noqa: E402
from backend.src.utils.clock import VirtualScheduler  # noqa: E402

from .support import ROOT  # noqa: E402


@pytest.fixture
def scheduler() -> VirtualScheduler:
    return VirtualScheduler()


@pytest.fixture
def network(scheduler: VirtualScheduler) -> EmulatedNetwork:
    return EmulatedNetwork(scheduler)


@pytest.fixture
def audit(scheduler: VirtualScheduler) -> AuditLog:
    return AuditLog(scheduler.now)


@pytest.fixture
def make_instance(
    scheduler: VirtualScheduler, audit: AuditLog
) -> Callable[..., ScopeInstance]:
    """Factory for instances sharing the test scheduler and audit log."""

    def make(
        node: str = "n1",
        scope: str = "s1",
        eids: tuple[str, ...] = ("ipn:1.0",),
        routes: Optional[RoutingTable] = None,
        **kwargs,
    ) -> ScopeInstance:
        return ScopeInstance(
            node=node,
            scope=scope,
            node_eids=[parse_eid(eid) for eid in eids],
            routes=routes or RoutingTable(),
            scheduler=scheduler,
            events=audit.scope(node, scope),
            **kwargs,
        )

    return make


@pytest.fixture
def serve_aap(network: EmulatedNetwork) -> Callable[[ScopeInstance, str], AapServer]:
    def serve(instance: ScopeInstance, address: str) -> AapServer:
        server = AapServer(instance, network, address)
        server.start()
        return server

    return serve


@pytest.fixture
def make_bundle() -> Callable[..., Bundle]:
    def make(
        dest: str = "ipn:2.0",
        source: str = "ipn:1.0",
        time_ms: int = 1000,
        sequence: int = 0,
        lifetime_ms: int = 3_600_000,
        payload: bytes = b"cmd",
        crc_type: CrcType = CrcType.CRC32C,
    ) -> Bundle:
        return Bundle(
            destination=parse_eid(dest),
            source=parse_eid(source),
            report_to=parse_eid(source),
            creation=CreationTimestamp(time_ms, sequence),
            lifetime_ms=lifetime_ms,
            payload=payload,
            crc_type=crc_type,
        )

    return make


@pytest.fixture
def vector_bundle(make_bundle) -> Bundle:
    """The bundle of vectors/bundle_ipn_crc_none.hex."""
    return make_bundle(crc_type=CrcType.NONE)


@pytest.fixture
def scenario_dir() -> Path:
    return ROOT / "scenarios"


@pytest.fixture
def sql_store_url() -> Iterator[str]:
    """In-memory spill database, discarded after the test."""
    cleanup_database()
    yield "sqlite://"
    cleanup_database()