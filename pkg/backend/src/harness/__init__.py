"""
Scenario harness: node assemblies, applications, the ground-station
multiplexer, scenario execution and the scope isolation auditor.
"""

from .applications import Delivery, ScenarioApplication, Submission
from .assembly import Environment, NodeAssembly, build_assembly
from .audit import AuditContext, AuditVerdict, TableRecord, Violation, audit_scope_isolation
from .config import (
    AssemblyConfig,
    ScenarioConfig,
    build_routing_table,
    check_assembly,
    check_scenario,
    load_assembly_config,
    load_scenario_config,
    parse_document,
)
from .multiplexer import Multiplexer, reconfigure_multiplexer
from .report import EncapsulationStats, ExpectationResult, ScenarioReport, encapsulation_stats
from .scenario import ScenarioRun, run_scenario, run_scenario_file, run_scenario_wall_clock

__all__ = [
    "AssemblyConfig",
    "AuditContext",
    "AuditVerdict",
    "Delivery",
    "EncapsulationStats",
    "Environment",
    "ExpectationResult",
    "Multiplexer",
    "NodeAssembly",
    "ScenarioApplication",
    "ScenarioConfig",
    "ScenarioReport",
    "ScenarioRun",
    "Submission",
    "TableRecord",
    "Violation",
    "audit_scope_isolation",
    "build_assembly",
    "build_routing_table",
    "check_assembly",
    "check_scenario",
    "encapsulation_stats",
    "load_assembly_config",
    "load_scenario_config",
    "parse_document",
    "reconfigure_multiplexer",
    "run_scenario",
    "run_scenario_file",
    "run_scenario_wall_clock",
]
