"""
Scenario execution.

A scenario builds every node assembly on one Environment, attaches the
applications, then fires its phases at their offsets. Expectations watch the
applications' deliveries until their deadline. When the run ends the report
collects expectation results, encapsulation statistics, routing-table
snapshots and the isolation verdict.
"""

import asyncio
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from ..bundle import EventKind, digest
from ..discovery import EmulatedBeaconBus
from ..transport import EmulatedNetwork
from ..utils.clock import VirtualScheduler
from ..utils.config import app_settings
from ..utils.errors import ExpectationTimeout
from ..utils.logger import app_logger
from .applications import Delivery, ScenarioApplication
from .assembly import Environment, NodeAssembly, build_assembly
from .audit import AuditContext, TableRecord, audit_scope_isolation
from .config import AssemblyConfig, PhaseConfig, ScenarioConfig, load_scenario_config
from .multiplexer import Multiplexer, close_link, open_link
from .report import (
    EncapsulationStats,
    ExpectationResult,
    ScenarioReport,
    TableSnapshot,
    encapsulation_stats,
)


@dataclass
class _Expectation:
    index: int
    phase: PhaseConfig
    app: ScenarioApplication
    wanted: str
    since: float
    deadline: float
    result: Optional[ExpectationResult] = None


def _timed_out(message: str) -> str:
    error = ExpectationTimeout(message)
    return f"{type(error).__name__}: {error}"


class ScenarioRun:
    """
    One execution of a scenario on an Environment.

    Args:
        scenario: Checked scenario document
        assemblies: Checked assembly documents by node name
        env: Shared scheduler, network, beacon channel and audit log
        inject_leak: Make every lower instance parse the bundles it carries
            (only to prove the auditor notices)
    """

    def __init__(
        self,
        scenario: ScenarioConfig,
        assemblies: dict[str, AssemblyConfig],
        env: Environment,
        inject_leak: bool = False,
    ):
        self.scenario = scenario
        self.env = env
        self.inject_leak = inject_leak
        self.nodes: dict[str, NodeAssembly] = {
            name: build_assembly(config, env) for name, config in assemblies.items()
        }
        if isinstance(env.network, EmulatedNetwork):
            for link in scenario.links:
                env.network.set_link_delay(link.origin, link.address, link.delay)

        self.apps: dict[str, ScenarioApplication] = {}
        for app_config in scenario.applications:
            address = self.nodes[app_config.node].config.aap_address(app_config.instance)
            self.apps[app_config.name] = ScenarioApplication(
                app_config, address, env, on_delivery=self._delivered
            )

        self.mux = (
            Multiplexer(scenario.multiplexer, self.nodes) if scenario.multiplexer else None
        )
        self._injected: dict[str, tuple[ScenarioApplication, int]] = {}
        self._expectations: list[_Expectation] = []
        self._patterns: dict[tuple[str, str], set[str]] = {}

    # Lifecycle

    def start(self) -> None:
        for node in self.nodes.values():
            node.start()
        if self.inject_leak:
            lowers = {
                (node.node, wiring.lower)
                for node in self.nodes.values()
                for wiring in node.config.wiring
            }
            for node_name, label in sorted(lowers):
                self.nodes[node_name].instance(label).inspect_payloads = True
            app_logger.warning(f"Payload inspection enabled on {len(lowers)} lower instances")
        self._record_patterns()
        for app in self.apps.values():
            app.start()

        scheduler = self.env.scheduler
        if self.mux is not None and self.mux.config.initial:
            scheduler.call_soon(self._reconfigure, self.mux.config.initial)
        for index, phase in enumerate(self.scenario.phases):
            scheduler.call_at(phase.at, self._run_phase, index, phase)
        app_logger.info(
            f"Scenario {self.scenario.name} started: {len(self.nodes)} nodes, "
            f"{len(self.scenario.phases)} phases"
        )

    def stop(self) -> None:
        for app in self.apps.values():
            app.stop()
        for node in self.nodes.values():
            node.stop()

    # Phases

    def _run_phase(self, index: int, phase: PhaseConfig) -> None:
        app_logger.info(f"Phase {index} at {phase.at:g}s: {phase.action}")
        if phase.action == "inject":
            self._inject(index, phase)
        elif phase.action == "open_link":
            open_link(self.nodes, phase.link)  # type: ignore[arg-type]
        elif phase.action == "close_link":
            close_link(self.nodes, phase.link)  # type: ignore[arg-type]
        elif phase.action == "reconfigure":
            self._reconfigure(phase.profile or "")
        elif phase.action == "radio":
            if isinstance(self.env.beacons, EmulatedBeaconBus):
                self.env.beacons.set_in_range(phase.a or "", phase.b or "", phase.in_range)
            else:
                app_logger.warning("Radio phases only apply to the emulated beacon bus")
        elif phase.action == "expect_delivery":
            app, submission = self._injected[phase.payload_of or ""]
            sent = app.submissions[submission]
            self._expect(index, phase, sent.digest, sent.time)
        elif phase.action == "expect_photo_return":
            responder = self.apps[phase.responder or ""]
            self._expect(index, phase, digest(responder.photo or b""), phase.at)

    def _inject(self, index: int, phase: PhaseConfig) -> None:
        app = self.apps[phase.application or ""]
        if phase.payload is not None:
            payload = phase.payload.encode("utf-8")
        else:
            payload = self.env.rng("payload", str(index)).randbytes(phase.payload_size or 0)
        submission = app.send(phase.dest or "", payload, phase.lifetime_ms)
        self._injected[phase.id or f"phases[{index}]"] = (app, submission)

    def _reconfigure(self, profile: str) -> None:
        assert self.mux is not None
        if self.mux.reconfigure(profile):
            self._record_patterns()

    def _record_patterns(self) -> None:
        for node in self.nodes.values():
            for instance in node.instances:
                patterns = self._patterns.setdefault((node.node, instance.scope), set())
                patterns.update(str(entry.pattern) for entry in instance.routes.entries)

    # Expectations

    def _expect(self, index: int, phase: PhaseConfig, wanted: str, since: float) -> None:
        app = self.apps[phase.application or ""]
        expectation = _Expectation(
            index=index,
            phase=phase,
            app=app,
            wanted=wanted,
            since=since,
            deadline=phase.at + (phase.timeout or 0),
        )
        self._expectations.append(expectation)
        for delivery in app.deliveries:
            if self._matches(expectation, delivery):
                self._met(expectation, delivery)
                return
        self.env.scheduler.call_at(expectation.deadline, self._expired, expectation)

    @staticmethod
    def _matches(expectation: _Expectation, delivery: Delivery) -> bool:
        return delivery.digest == expectation.wanted and delivery.time >= expectation.since

    def _delivered(self, app: ScenarioApplication, delivery: Delivery) -> None:
        for expectation in self._expectations:
            if (
                expectation.result is None
                and expectation.app is app
                and self._matches(expectation, delivery)
            ):
                self._met(expectation, delivery)

    def _met(self, expectation: _Expectation, delivery: Delivery) -> None:
        expectation.result = self._result(
            expectation,
            passed=True,
            met_at=delivery.time,
            latency=round(delivery.time - expectation.since, 9),
        )
        app_logger.info(
            f"Expectation {expectation.index} met at {delivery.time:.3f}s by {expectation.app.name}"
        )

    def _expired(self, expectation: _Expectation) -> None:
        if expectation.result is None:
            expectation.result = self._result(
                expectation,
                passed=False,
                detail=_timed_out(
                    f"nothing matching arrived within {expectation.phase.timeout:g} s"
                ),
            )
            app_logger.warning(f"Expectation {expectation.index} timed out")

    def _result(self, expectation: _Expectation, passed: bool, **fields) -> ExpectationResult:
        return ExpectationResult(
            phase=expectation.index,
            action=expectation.phase.action,
            application=expectation.app.name,
            at=expectation.phase.at,
            deadline=expectation.deadline,
            passed=passed,
            **fields,
        )

    # Report

    def _encapsulation(self) -> list[EncapsulationStats]:
        events = self.env.audit.events()
        stats = []
        for name, (app, submission) in self._injected.items():
            stats.append(encapsulation_stats(events, app.submissions[submission].bundle_id, name))
        for app in self.apps.values():
            if app.config.responder is None:
                continue
            for number, submission in enumerate(app.submissions):
                stats.append(
                    encapsulation_stats(events, submission.bundle_id, f"{app.name}:photo{number}")
                )
        return stats

    def _namespaces(self) -> dict[str, set[str]]:
        namespaces: dict[str, set[str]] = {}
        for node in self.nodes.values():
            for instance in node.instances:
                namespaces.setdefault(instance.scope, set()).update(
                    str(eid) for eid in instance.node_eids
                )
            for wiring in node.config.wiring:
                namespaces.setdefault(wiring.lower, set()).update(wiring.registrations)
        for app in self.apps.values():
            if app.config.registration:
                namespaces.setdefault(app.config.instance, set()).add(app.config.registration)
        return namespaces

    def report(self, mode: str = "virtual") -> ScenarioReport:
        """Close open expectations and assemble the report of the run so far."""
        for expectation in self._expectations:
            if expectation.result is None:
                expectation.result = self._result(
                    expectation,
                    passed=False,
                    detail=_timed_out("run ended before the deadline"),
                )
        self._record_patterns()

        events = self.env.audit.events()
        sanctioned: dict[tuple[str, str], list[str]] = {}
        for event in events:
            if event.kind == EventKind.RECONFIGURE:
                sanctioned.setdefault((event.node, event.scope), []).append(event.detail)

        tables: list[TableSnapshot] = []
        records: list[TableRecord] = []
        for node in self.nodes.values():
            for instance in node.instances:
                key = (node.node, instance.scope)
                initial = node.initial_digests[instance.scope]
                discovery = node.discoveries.get(instance.scope)
                tables.append(
                    TableSnapshot(
                        node=node.node,
                        scope=instance.scope,
                        discovery=instance.discovery_enabled,
                        initial_digest=initial,
                        final_digest=instance.route_digest(),
                        sanctioned=[initial, *sanctioned.get(key, [])],
                        learned=discovery.learned if discovery else 0,
                        expired=discovery.expired if discovery else 0,
                    )
                )
                records.append(
                    TableRecord(
                        node=node.node,
                        scope=instance.scope,
                        discovery=instance.discovery_enabled,
                        initial_digest=initial,
                        final_digest=instance.route_digest(),
                        patterns=tuple(sorted(self._patterns.get(key, ()))),
                    )
                )

        verdict = audit_scope_isolation(
            events, AuditContext(tables=records, namespaces=self._namespaces())
        )
        return ScenarioReport(
            scenario=self.scenario.name,
            seed=self.env.seed,
            mode=mode,  # type: ignore[arg-type]
            duration=self.scenario.duration,
            expectations=[e.result for e in self._expectations if e.result is not None],
            encapsulation=self._encapsulation(),
            routing_tables=tables,
            audit=verdict,
            event_count=len(events),
        )


def _seed(scenario: ScenarioConfig, seed: Optional[int]) -> int:
    if seed is not None:
        return seed
    return scenario.seed if scenario.seed is not None else app_settings.SCENARIO_SEED


def run_scenario(
    scenario: ScenarioConfig,
    assemblies: dict[str, AssemblyConfig],
    env: Optional[Environment] = None,
    inject_leak: bool = False,
    seed: Optional[int] = None,
) -> tuple[ScenarioReport, ScenarioRun]:
    """
    Run ``scenario`` to its duration on virtual time.

    Returns:
        The report and the finished run (its Environment holds the audit log)
    """
    if env is None:
        env = Environment.virtual(
            seed=_seed(scenario, seed),
            link_delay=scenario.link_delay,
            radio_in_range=scenario.radio.default_in_range,
            radio_delay=scenario.radio.delay,
        )
    if not isinstance(env.scheduler, VirtualScheduler):
        raise TypeError("run_scenario needs a virtual scheduler, use run_scenario_wall_clock")
    run = ScenarioRun(scenario, assemblies, env, inject_leak)
    run.start()
    env.scheduler.run_until(scenario.duration)
    report = run.report()
    run.stop()
    app_logger.info(f"Scenario {scenario.name} finished: exit code {report.exit_code()}")
    return report, run


async def run_scenario_wall_clock(
    scenario: ScenarioConfig,
    assemblies: dict[str, AssemblyConfig],
    inject_leak: bool = False,
    seed: Optional[int] = None,
) -> tuple[ScenarioReport, ScenarioRun]:
    """Run ``scenario`` on the running asyncio loop in real time."""
    env = Environment.wall_clock(
        asyncio.get_running_loop(),
        seed=_seed(scenario, seed),
        link_delay=scenario.link_delay,
        radio_in_range=scenario.radio.default_in_range,
        radio_delay=scenario.radio.delay,
    )
    run = ScenarioRun(scenario, assemblies, env, inject_leak)
    run.start()
    await env.scheduler.run_for(scenario.duration)  # type: ignore[attr-defined]
    report = run.report(mode="wall-clock")
    run.stop()
    return report, run


def run_scenario_file(
    path: str | Path,
    seed: Optional[int] = None,
    wall_clock: bool = False,
    inject_leak: bool = False,
    report_dir: Optional[str | Path] = None,
) -> ScenarioReport:
    """
    Load, run and optionally write out a scenario.

    Raises:
        ConfigInvalid: The scenario or one of its assemblies is invalid
    """
    scenario, assemblies = load_scenario_config(path)
    if wall_clock:
        report, run = asyncio.run(
            run_scenario_wall_clock(scenario, assemblies, inject_leak, seed)
        )
    else:
        report, run = run_scenario(scenario, assemblies, inject_leak=inject_leak, seed=seed)
    if report_dir is not None:
        written = report.write(report_dir, run.env.audit)
        app_logger.info(f"Report written to {written}")
    return report
