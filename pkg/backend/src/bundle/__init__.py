"""
Bundle data model, endpoint identifiers, wire codecs and the audit log.
"""

from .bpdu import BibePdu, decode_bpdu, encode_bpdu
from .bundle import BP_VERSION, Bundle, BundleFlags, CreationTimestamp
from .codec import decode_bundle, encode_bundle
from .crc import CrcType
from .eid import (
    DTN_NONE,
    EidScheme,
    EndpointId,
    RoutePattern,
    as_eid,
    parse_eid,
    parse_pattern,
)
from .events import AuditEvent, AuditLog, EventKind, ScopeEvents, digest

__all__ = [
    "AuditEvent",
    "AuditLog",
    "BP_VERSION",
    "BibePdu",
    "Bundle",
    "BundleFlags",
    "CreationTimestamp",
    "CrcType",
    "DTN_NONE",
    "EidScheme",
    "EndpointId",
    "EventKind",
    "RoutePattern",
    "ScopeEvents",
    "as_eid",
    "decode_bpdu",
    "decode_bundle",
    "digest",
    "encode_bpdu",
    "encode_bundle",
    "parse_eid",
    "parse_pattern",
]
