"""
Append-only audit log of bundle processing events.

Codecs, BPA instances and CLAs record what they parsed, looked up, delivered,
forwarded, stored or deleted, tagged with the scope that did it. The harness
auditor checks scope isolation from this log alone.
"""

import hashlib
import itertools
import json
import threading
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Callable, Iterable, Optional


class EventKind(str, Enum):
    """Kinds of audit events."""

    PARSE = "parse"
    LOOKUP = "lookup"
    DELIVER = "deliver"
    FORWARD = "forward"
    STORE = "store"
    DELETE = "delete"
    ENCAPSULATE = "encapsulate"
    DECAPSULATE = "decapsulate"
    RECONFIGURE = "reconfigure"
    DISCOVERY = "discovery"


TERMINAL_KINDS = frozenset(
    {EventKind.DELIVER, EventKind.FORWARD, EventKind.STORE, EventKind.DELETE}
)


def digest(data: bytes) -> str:
    """Short SHA-256 fingerprint (128 bits, hex) of an exact byte string."""
    return hashlib.sha256(data).hexdigest()[:32]


@dataclass(frozen=True)
class AuditEvent:
    """
    One audit record.

    Attributes:
        time: Scheduler time in seconds
        seq: Global append sequence, breaks ties between equal times
        node: Node name of the recording instance
        scope: Scope label of the recording instance
        kind: EventKind
        digest: Fingerprint of the bytes concerned ("" when not applicable)
        bundle_id: Bundle id when known
        related: Second bundle id, e.g. the outer bundle of an encapsulation
        detail: Free text (reasons, addresses)
    """

    time: float
    seq: int
    node: str
    scope: str
    kind: EventKind
    digest: str = ""
    bundle_id: Optional[str] = None
    related: Optional[str] = None
    detail: str = ""

    def to_json(self) -> str:
        record = asdict(self)
        record["kind"] = self.kind.value
        return json.dumps(record, sort_keys=True)


class AuditLog:
    """
    Thread-safe append-only event log totally ordered by (time, seq).
    """

    def __init__(self, clock: Callable[[], float]):
        self._clock = clock
        self._lock = threading.Lock()
        self._events: list[AuditEvent] = []
        self._sequence = itertools.count()

    def append(
        self,
        node: str,
        scope: str,
        kind: EventKind,
        digest: str = "",
        bundle_id: Optional[str] = None,
        related: Optional[str] = None,
        detail: str = "",
    ) -> AuditEvent:
        with self._lock:
            event = AuditEvent(
                time=self._clock(),
                seq=next(self._sequence),
                node=node,
                scope=scope,
                kind=kind,
                digest=digest,
                bundle_id=bundle_id,
                related=related,
                detail=detail,
            )
            self._events.append(event)
        return event

    def events(self) -> list[AuditEvent]:
        with self._lock:
            return sorted(self._events, key=lambda e: (e.time, e.seq))

    def select(
        self,
        kind: Optional[EventKind] = None,
        scope: Optional[str] = None,
        node: Optional[str] = None,
    ) -> list[AuditEvent]:
        return [
            event
            for event in self.events()
            if (kind is None or event.kind == kind)
            and (scope is None or event.scope == scope)
            and (node is None or event.node == node)
        ]

    def scope(self, node: str, scope: str) -> "ScopeEvents":
        return ScopeEvents(self, node, scope)

    def __len__(self) -> int:
        with self._lock:
            return len(self._events)

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for event in self.events():
                fh.write(event.to_json() + "\n")


class ScopeEvents:
    """The view of the audit log handed to one BPA instance and its codecs."""

    def __init__(self, log: AuditLog, node: str, scope: str):
        self.log = log
        self.node = node
        self.scope = scope

    def record(
        self,
        kind: EventKind,
        digest: str = "",
        bundle_id: Optional[str] = None,
        related: Optional[str] = None,
        detail: str = "",
    ) -> AuditEvent:
        return self.log.append(
            self.node, self.scope, kind, digest, bundle_id, related, detail
        )


def parse_scopes(events: Iterable[AuditEvent], wanted: str) -> set[str]:
    """Scope labels that parsed the encoding with fingerprint ``wanted``."""
    return {e.scope for e in events if e.kind == EventKind.PARSE and e.digest == wanted}
