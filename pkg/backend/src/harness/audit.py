"""
Scope isolation auditor.

Works on the audit log of a finished run plus what the configuration says each
scope owns. Three conditions must hold:

(a) every parsed encoding (by digest) was parsed under exactly one scope label;
(b) every routing table outside discovery-enabled instances ends on its last
    sanctioned digest (the initial table or a multiplexer reconfiguration);
(c) no destination pattern of a scope names an endpoint that only another
    scope's namespace contains. BIBE next-hop addresses are not patterns and
    are therefore not checked.
"""

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional

from pydantic import BaseModel, Field

from ..bundle import AuditEvent, EventKind, RoutePattern, parse_eid, parse_pattern
from ..utils.errors import MalformedEid


class Violation(BaseModel):
    condition: str
    detail: str
    event: Optional[dict] = None


class AuditVerdict(BaseModel):
    passed: bool
    violations: list[Violation] = Field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


@dataclass(frozen=True)
class TableRecord:
    """
    Routing table facts of one instance.

    Attributes:
        patterns: Every static destination pattern the table ever held
    """

    node: str
    scope: str
    discovery: bool
    initial_digest: str
    final_digest: str
    patterns: tuple[str, ...] = ()


@dataclass
class AuditContext:
    """
    Attributes:
        tables: One record per instance
        namespaces: Scope label -> endpoint IDs (text) owned by that scope
    """

    tables: list[TableRecord] = field(default_factory=list)
    namespaces: dict[str, set[str]] = field(default_factory=dict)

    def owners(self, pattern: RoutePattern) -> set[str]:
        """Scope labels whose namespace contains something ``pattern`` names."""
        owners = set()
        for scope, eids in self.namespaces.items():
            for text in eids:
                try:
                    eid = parse_eid(text)
                except MalformedEid:
                    continue
                if pattern.matches(eid):
                    owners.add(scope)
                    break
        return owners


def _event(event: AuditEvent) -> dict:
    record = {
        "time": event.time,
        "seq": event.seq,
        "node": event.node,
        "scope": event.scope,
        "kind": event.kind.value,
    }
    for name in ("digest", "bundle_id", "related", "detail"):
        value = getattr(event, name)
        if value:
            record[name] = value
    return record


def _check_parse_scopes(events: list[AuditEvent]) -> list[Violation]:
    first: dict[str, AuditEvent] = {}
    flagged: set[str] = set()
    violations = []
    for event in events:
        if event.kind != EventKind.PARSE or not event.digest:
            continue
        seen = first.setdefault(event.digest, event)
        if seen.scope != event.scope and event.digest not in flagged:
            flagged.add(event.digest)
            violations.append(
                Violation(
                    condition="a",
                    detail=(
                        f"encoding {event.digest} parsed in scope {seen.scope!r} "
                        f"({seen.node}) and in scope {event.scope!r} ({event.node})"
                    ),
                    event=_event(event),
                )
            )
    return violations


def _check_digests(events: list[AuditEvent], context: AuditContext) -> list[Violation]:
    sanctioned: dict[tuple[str, str], list[str]] = defaultdict(list)
    for event in events:
        if event.kind == EventKind.RECONFIGURE:
            sanctioned[(event.node, event.scope)].append(event.detail)
    violations = []
    for table in context.tables:
        if table.discovery:
            continue
        expected = ([table.initial_digest] + sanctioned[(table.node, table.scope)])[-1]
        if table.final_digest != expected:
            violations.append(
                Violation(
                    condition="b",
                    detail=(
                        f"routing table of {table.node}/{table.scope} changed without "
                        f"reconfiguration: {expected[:12]} -> {table.final_digest[:12]}"
                    ),
                )
            )
    return violations


def _check_namespaces(events: list[AuditEvent], context: AuditContext) -> list[Violation]:
    patterns: dict[tuple[str, str], list[tuple[str, Optional[AuditEvent]]]] = defaultdict(list)
    for table in context.tables:
        patterns[(table.node, table.scope)].extend((p, None) for p in table.patterns)
    for event in events:
        if event.kind == EventKind.DISCOVERY and event.related and event.detail.startswith("learned"):
            patterns[(event.node, event.scope)].append((event.related, event))

    violations = []
    for (node, scope), entries in patterns.items():
        for text, event in entries:
            try:
                pattern = parse_pattern(text)
            except MalformedEid:
                continue
            owners = context.owners(pattern)
            if owners and scope not in owners:
                violations.append(
                    Violation(
                        condition="c",
                        detail=(
                            f"{node}/{scope} routes toward {text}, which belongs to "
                            f"scope(s) {sorted(owners)}"
                        ),
                        event=_event(event) if event else None,
                    )
                )
    return violations


def audit_scope_isolation(events: Iterable[AuditEvent], context: AuditContext) -> AuditVerdict:
    """
    Check the three isolation conditions over a finished run.

    Returns:
        AuditVerdict: PASS iff no condition produced a violation
    """
    ordered = sorted(events, key=lambda e: (e.time, e.seq))
    violations = (
        _check_parse_scopes(ordered)
        + _check_digests(ordered, context)
        + _check_namespaces(ordered, context)
    )
    return AuditVerdict(passed=not violations, violations=violations)
