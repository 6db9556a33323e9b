"""
Scenario reports: what a run delivered, how deep bundles were encapsulated,
how routing tables evolved and what the isolation auditor concluded.
"""

from collections import defaultdict
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Literal, Optional

from pydantic import BaseModel, Field, computed_field

from ..bundle import AuditEvent, AuditLog, EventKind
from .audit import AuditVerdict


class ExpectationResult(BaseModel):
    phase: int
    action: str
    application: str
    at: float
    deadline: float
    passed: bool
    met_at: Optional[float] = None
    latency: Optional[float] = None
    detail: str = ""


class EncapsulationStats(BaseModel):
    """
    Attributes:
        push_downs: Encapsulations of the bundle and of its outer bundles
        pop_ups: Decapsulations recovering the bundle or its outer bundles
        max_nesting: Deepest simultaneous encapsulation
    """

    payload: str
    bundle_id: Optional[str] = None
    push_downs: int = 0
    pop_ups: int = 0
    max_nesting: int = 0


class TableSnapshot(BaseModel):
    node: str
    scope: str
    discovery: bool
    initial_digest: str
    final_digest: str
    sanctioned: list[str]
    learned: int = 0
    expired: int = 0

    @computed_field  # type: ignore[prop-decorator]
    @property
    def restored(self) -> bool:
        return self.final_digest == self.initial_digest


class ScenarioReport(BaseModel):
    scenario: str
    seed: int
    mode: Literal["virtual", "wall-clock"] = "virtual"
    duration: float
    expectations: list[ExpectationResult] = Field(default_factory=list)
    encapsulation: list[EncapsulationStats] = Field(default_factory=list)
    routing_tables: list[TableSnapshot] = Field(default_factory=list)
    audit: AuditVerdict
    event_count: int
    generated_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.expectations)

    def exit_code(self) -> int:
        """5 on audit FAIL, 1 on a failed expectation, else 0."""
        if not self.audit.passed:
            return 5
        return 0 if self.passed else 1

    def comparable(self) -> dict:
        """The report without its wall-clock timestamp."""
        return self.model_dump(exclude={"generated_at"})

    def stats(self, payload: str) -> EncapsulationStats:
        for stats in self.encapsulation:
            if stats.payload == payload:
                return stats
        raise KeyError(payload)

    def table(self, node: str, scope: str) -> TableSnapshot:
        for table in self.routing_tables:
            if table.node == node and table.scope == scope:
                return table
        raise KeyError(f"{node}/{scope}")

    def summary(self) -> str:
        met = sum(result.passed for result in self.expectations)
        lines = [
            f"Scenario {self.scenario} (seed {self.seed}, {self.mode} time, {self.duration:g} s)",
            f"  expectations: {met}/{len(self.expectations)} passed",
        ]
        for result in self.expectations:
            status = "PASS" if result.passed else "FAIL"
            latency = f", latency {result.latency:.3f} s" if result.latency is not None else ""
            detail = f" ({result.detail})" if result.detail else ""
            lines.append(
                f"    [{status}] phase {result.phase} {result.action} at {result.application}{latency}{detail}"
            )
        if self.encapsulation:
            lines.append("  encapsulation:")
            for stats in self.encapsulation:
                lines.append(
                    f"    {stats.payload}: push-downs {stats.push_downs}, "
                    f"pop-ups {stats.pop_ups}, max nesting {stats.max_nesting}"
                )
        lines.append(f"  audit: {self.audit.verdict} ({len(self.audit.violations)} violations)")
        for violation in self.audit.violations:
            lines.append(f"    ({violation.condition}) {violation.detail}")
        lines.append(f"  events: {self.event_count}")
        return "\n".join(lines) + "\n"

    def write(self, directory: str | Path, audit_log: Optional[AuditLog] = None) -> Path:
        """Write report.json, summary.txt and, given the log, audit.jsonl."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "report.json").write_text(self.model_dump_json(indent=2), encoding="utf-8")
        (directory / "summary.txt").write_text(self.summary(), encoding="utf-8")
        if audit_log is not None:
            audit_log.write_jsonl(directory / "audit.jsonl")
        return directory


def encapsulation_stats(
    events: Iterable[AuditEvent], bundle_id: Optional[str], payload: str
) -> EncapsulationStats:
    """
    Follow ``bundle_id`` through every encapsulation the log records.

    An ENCAPSULATE event names the inner bundle and, as ``related``, the outer
    bundle carrying it; a DECAPSULATE event names the inner bundle recovered.
    """
    if bundle_id is None:
        return EncapsulationStats(payload=payload)
    outers: dict[str, list[str]] = defaultdict(list)
    pops: dict[str, int] = defaultdict(int)
    for event in events:
        if event.kind == EventKind.ENCAPSULATE and event.bundle_id and event.related:
            outers[event.bundle_id].append(event.related)
        elif event.kind == EventKind.DECAPSULATE and event.bundle_id:
            pops[event.bundle_id] += 1

    push_downs = pop_ups = 0

    def walk(current: str, visiting: frozenset[str]) -> int:
        nonlocal push_downs, pop_ups
        pop_ups += pops[current]
        depth = 0
        for outer in outers[current]:
            push_downs += 1
            if outer not in visiting:
                depth = max(depth, 1 + walk(outer, visiting | {outer}))
        return depth

    nesting = walk(bundle_id, frozenset({bundle_id}))
    return EncapsulationStats(
        payload=payload,
        bundle_id=bundle_id,
        push_downs=push_downs,
        pop_ups=pop_ups,
        max_nesting=nesting,
    )
