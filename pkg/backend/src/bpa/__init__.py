"""
Bundle Protocol Agent: registrations, routing, storage, dispatch and the
application agent protocol.
"""

from .aap import (
    AapMessage,
    AapMessageType,
    AapStreamDecoder,
    InsufficientAapData,
    decode_bundle_id,
    encode_bundle_id,
)
from .aap_client import AapClient
from .aap_session import AapServer, AapSession
from .instance import DispatchOutcome, ScopeInstance
from .registry import Agent, EndpointRegistry, Registration
from .routing import NextHop, RouteEntry, RoutingTable, lookup_route
from .store import PENDING, BundleStore, MemoryBundleStore, SqlBundleStore

__all__ = [
    "AapClient",
    "AapMessage",
    "AapMessageType",
    "AapServer",
    "AapSession",
    "AapStreamDecoder",
    "Agent",
    "BundleStore",
    "DispatchOutcome",
    "EndpointRegistry",
    "InsufficientAapData",
    "MemoryBundleStore",
    "NextHop",
    "PENDING",
    "Registration",
    "RouteEntry",
    "RoutingTable",
    "ScopeInstance",
    "SqlBundleStore",
    "decode_bundle_id",
    "encode_bundle_id",
    "lookup_route",
]
