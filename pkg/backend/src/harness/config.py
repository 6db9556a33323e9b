"""
Configuration documents for node assemblies and scenarios.

Documents are TOML files. Their shape is checked by pydantic models; cross
references (CLA names, wiring, applications) are checked afterwards with
explicit key paths. Every failure surfaces as ``ConfigInvalid`` whose path
names the offending key, e.g. ``instances[1].routes[0].cla``.
"""

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Literal, Optional, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..bpa.routing import NextHop, RouteEntry, RoutingTable
from ..bundle import parse_eid, parse_pattern
from ..transport import split_address
from ..utils.config import app_settings
from ..utils.errors import ConfigInvalid, MalformedEid

DEFAULT_ROUTE = "default"


class _Document(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class ClaConfig(_Document):
    name: str
    type: Literal["stream", "bibe"]
    listen: Optional[str] = None
    lifetime_ms: int = Field(app_settings.BIBE_LIFETIME_MS, gt=0)


class RouteConfig(_Document):
    dest: str
    cla: str
    address: str


class ContactConfig(_Document):
    cla: str
    address: str
    start: float = Field(0.0, ge=0)
    end: Optional[float] = None
    rate: int = Field(0, ge=0)
    reachable: list[str] = Field(default_factory=list)


class DiscoveryConfig(_Document):
    enabled: bool = False
    period: float = Field(app_settings.BEACON_PERIOD, gt=0)
    cla: Optional[str] = None


class InstanceConfig(_Document):
    label: str = Field(min_length=1)
    node_eids: list[str] = Field(min_length=1)
    aap: Optional[str] = None
    clas: list[ClaConfig] = Field(default_factory=list)
    routes: list[RouteConfig] = Field(default_factory=list)
    contacts: list[ContactConfig] = Field(default_factory=list)
    discovery: DiscoveryConfig = Field(default_factory=DiscoveryConfig)
    lifetime_ms: int = Field(app_settings.DEFAULT_LIFETIME_MS, gt=0)
    spill: bool = False

    def cla(self, name: str) -> Optional[ClaConfig]:
        return next((cla for cla in self.clas if cla.name == name), None)


class WiringConfig(_Document):
    upper: str
    lower: str
    registrations: list[str] = Field(default_factory=list, alias="register")
    cla: str = "bibe"


class AssemblyConfig(_Document):
    """One node: its instances, top to bottom, and their BIBE wiring."""

    node: str = Field(min_length=1)
    instances: list[InstanceConfig] = Field(min_length=1)
    wiring: list[WiringConfig] = Field(default_factory=list)

    def aap_address(self, label: str) -> str:
        instance = self.instance(label)
        return instance.aap if instance and instance.aap else f"{self.node}/{label}"

    def instance(self, label: str) -> Optional[InstanceConfig]:
        return next((i for i in self.instances if i.label == label), None)


class LinkDelayConfig(_Document):
    origin: str
    address: str
    delay: float = Field(ge=0)


class RadioConfig(_Document):
    default_in_range: bool = True
    delay: float = Field(0.001, ge=0)


class ResponderConfig(_Document):
    reply_to: str
    photo_size: int = Field(1024 * 1024, gt=0)
    lifetime_ms: int = Field(0, ge=0)


class ApplicationConfig(_Document):
    name: str
    node: str
    instance: str
    registration: Optional[str] = Field(None, alias="register")
    responder: Optional[ResponderConfig] = None


LinkRef = tuple[str, str, str, str]


class ProfileConfig(_Document):
    links: list[LinkRef] = Field(default_factory=list)
    routes: dict[str, list[RouteConfig]] = Field(default_factory=dict)


class MultiplexerConfig(_Document):
    node: str
    initial: Optional[str] = None
    profiles: dict[str, ProfileConfig] = Field(min_length=1)


PhaseAction = Literal[
    "inject",
    "open_link",
    "close_link",
    "reconfigure",
    "radio",
    "expect_delivery",
    "expect_photo_return",
]


class PhaseConfig(_Document):
    at: float = Field(ge=0)
    action: PhaseAction
    id: Optional[str] = None
    application: Optional[str] = None
    dest: Optional[str] = None
    payload: Optional[str] = None
    payload_size: Optional[int] = Field(None, gt=0)
    payload_of: Optional[str] = None
    lifetime_ms: int = Field(0, ge=0)
    link: Optional[LinkRef] = None
    profile: Optional[str] = None
    a: Optional[str] = None
    b: Optional[str] = None
    in_range: bool = True
    responder: Optional[str] = None
    timeout: Optional[float] = Field(None, gt=0)


class ScenarioConfig(_Document):
    name: str
    description: str = ""
    assemblies: list[str] = Field(min_length=1)
    duration: float = Field(gt=0)
    seed: Optional[int] = None
    link_delay: float = Field(app_settings.LINK_DELAY, ge=0)
    links: list[LinkDelayConfig] = Field(default_factory=list)
    radio: RadioConfig = Field(default_factory=RadioConfig)
    applications: list[ApplicationConfig] = Field(default_factory=list)
    multiplexer: Optional[MultiplexerConfig] = None
    phases: list[PhaseConfig] = Field(default_factory=list)


# Loading

Model = TypeVar("Model", bound=BaseModel)


def format_path(loc: tuple[Any, ...]) -> str:
    """``("instances", 1, "routes", 0, "cla")`` -> ``instances[1].routes[0].cla``"""
    path = ""
    for part in loc:
        if isinstance(part, int):
            path += f"[{part}]"
        else:
            path += f".{part}" if path else str(part)
    return path


def parse_document(model: type[Model], data: dict[str, Any]) -> Model:
    """
    Raises:
        ConfigInvalid: With the key path of the first schema violation
    """
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        error = exc.errors()[0]
        raise ConfigInvalid(format_path(tuple(error["loc"])), error["msg"]) from exc


def load_toml(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigInvalid("", f"{path}: file not found") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigInvalid("", f"{path}: {exc}") from exc


def load_assembly_config(path: str | Path, daemon: bool = False) -> AssemblyConfig:
    config = parse_document(AssemblyConfig, load_toml(path))
    check_assembly(config, daemon=daemon)
    return config


def load_scenario_config(path: str | Path) -> tuple[ScenarioConfig, dict[str, AssemblyConfig]]:
    """Load a scenario and the assemblies it references (paths relative to it)."""
    path = Path(path)
    scenario = parse_document(ScenarioConfig, load_toml(path))
    assemblies: dict[str, AssemblyConfig] = {}
    for index, relative in enumerate(scenario.assemblies):
        try:
            config = load_assembly_config(path.parent / relative)
        except ConfigInvalid as exc:
            prefix = f"assemblies[{index}]"
            raise ConfigInvalid(
                f"{prefix}:{exc.path}" if exc.path else prefix, exc.message
            ) from exc
        if config.node in assemblies:
            raise ConfigInvalid(f"assemblies[{index}]", f"duplicate node {config.node!r}")
        assemblies[config.node] = config
    check_scenario(scenario, assemblies)
    return scenario, assemblies


# Cross-reference checks


def _eid(text: str, path: str) -> None:
    try:
        parse_eid(text)
    except MalformedEid as exc:
        raise ConfigInvalid(path, str(exc)) from exc


def _check_route(route: RouteConfig, instance: InstanceConfig, path: str) -> None:
    if route.dest != DEFAULT_ROUTE:
        try:
            parse_pattern(route.dest)
        except MalformedEid as exc:
            raise ConfigInvalid(f"{path}.dest", str(exc)) from exc
    cla = instance.cla(route.cla)
    if cla is None:
        raise ConfigInvalid(f"{path}.cla", f"CLA {route.cla!r} is not attached")
    if cla.type == "bibe":
        endpoint, sep, eid = route.address.rpartition("#")
        if not sep or not endpoint:
            raise ConfigInvalid(
                f"{path}.address", "BIBE address must be <aap-endpoint>#<lower-eid>"
            )
        _eid(eid, f"{path}.address")


def check_assembly(config: AssemblyConfig, daemon: bool = False) -> None:
    """
    Args:
        config: Parsed assembly document
        daemon: The assembly runs on real sockets, so every AAP, listen,
            contact and next-hop address must be ``host:port``

    Raises:
        ConfigInvalid: Duplicate labels, bad EIDs, routes or contacts naming
            unattached CLAs, wiring that references unknown instances
    """
    labels: set[str] = set()
    for i, instance in enumerate(config.instances):
        base = f"instances[{i}]"
        if instance.label in labels:
            raise ConfigInvalid(f"{base}.label", f"duplicate scope label {instance.label!r}")
        labels.add(instance.label)
        for j, eid in enumerate(instance.node_eids):
            _eid(eid, f"{base}.node_eids[{j}]")

        names: set[str] = set()
        for j, cla in enumerate(instance.clas):
            if cla.name in names:
                raise ConfigInvalid(f"{base}.clas[{j}].name", f"duplicate CLA {cla.name!r}")
            names.add(cla.name)

        for j, route in enumerate(instance.routes):
            _check_route(route, instance, f"{base}.routes[{j}]")
        if sum(route.dest == DEFAULT_ROUTE for route in instance.routes) > 1:
            raise ConfigInvalid(f"{base}.routes", "more than one default route")

        for j, contact in enumerate(instance.contacts):
            path = f"{base}.contacts[{j}]"
            cla = instance.cla(contact.cla)
            if cla is None or cla.type != "stream":
                raise ConfigInvalid(f"{path}.cla", f"no stream CLA named {contact.cla!r}")
            if contact.end is not None and contact.end <= contact.start:
                raise ConfigInvalid(f"{path}.end", "contact must end after it starts")
            for k, pattern in enumerate(contact.reachable):
                try:
                    parse_pattern(pattern)
                except MalformedEid as exc:
                    raise ConfigInvalid(f"{path}.reachable[{k}]", str(exc)) from exc

        if instance.discovery.enabled:
            path = f"{base}.discovery.cla"
            cla = instance.cla(instance.discovery.cla or "")
            if cla is None or cla.type != "stream":
                raise ConfigInvalid(path, "discovery needs a stream CLA")
            if not cla.listen:
                raise ConfigInvalid(path, f"CLA {cla.name!r} has no listen address to advertise")

    for k, wiring in enumerate(config.wiring):
        base = f"wiring[{k}]"
        upper = config.instance(wiring.upper)
        if upper is None:
            raise ConfigInvalid(f"{base}.upper", f"unknown instance {wiring.upper!r}")
        if config.instance(wiring.lower) is None:
            raise ConfigInvalid(f"{base}.lower", f"unknown instance {wiring.lower!r}")
        if wiring.upper == wiring.lower:
            raise ConfigInvalid(f"{base}.lower", "an instance cannot be wired to itself")
        cla = upper.cla(wiring.cla)
        if cla is None or cla.type != "bibe":
            raise ConfigInvalid(f"{base}.cla", f"instance {wiring.upper!r} has no BIBE CLA {wiring.cla!r}")
        for j, eid in enumerate(wiring.registrations):
            _eid(eid, f"{base}.register[{j}]")

    if daemon:
        _check_socket_addresses(config)


def _host_port(address: str, path: str) -> None:
    try:
        split_address(address)
    except ValueError as exc:
        raise ConfigInvalid(path, str(exc)) from exc


def _check_socket_addresses(config: AssemblyConfig) -> None:
    for i, instance in enumerate(config.instances):
        base = f"instances[{i}]"
        _host_port(config.aap_address(instance.label), f"{base}.aap")
        for j, cla in enumerate(instance.clas):
            if cla.listen:
                _host_port(cla.listen, f"{base}.clas[{j}].listen")
        for j, route in enumerate(instance.routes):
            address = route.address
            cla = instance.cla(route.cla)
            if cla is not None and cla.type == "bibe":
                address = address.rpartition("#")[0]
            _host_port(address, f"{base}.routes[{j}].address")
        for j, contact in enumerate(instance.contacts):
            _host_port(contact.address, f"{base}.contacts[{j}].address")


def _link_path_check(
    link: LinkRef, assemblies: dict[str, AssemblyConfig], path: str
) -> None:
    node, label, cla_name, _ = link
    assembly = assemblies.get(node)
    if assembly is None:
        raise ConfigInvalid(path, f"unknown node {node!r}")
    instance = assembly.instance(label)
    if instance is None:
        raise ConfigInvalid(path, f"node {node!r} has no instance {label!r}")
    cla = instance.cla(cla_name)
    if cla is None or cla.type != "stream":
        raise ConfigInvalid(path, f"{node}/{label} has no stream CLA {cla_name!r}")


def check_scenario(scenario: ScenarioConfig, assemblies: dict[str, AssemblyConfig]) -> None:
    """
    Raises:
        ConfigInvalid: Unknown nodes, instances, applications or profiles,
            duplicate addresses, decreasing phase offsets, missing action fields
    """
    seen: dict[str, str] = {}
    for assembly in assemblies.values():
        for instance in assembly.instances:
            addresses = [assembly.aap_address(instance.label)]
            addresses += [cla.listen for cla in instance.clas if cla.listen]
            for address in addresses:
                owner = f"{assembly.node}/{instance.label}"
                if address in seen and seen[address] != owner:
                    raise ConfigInvalid(
                        "assemblies", f"address {address!r} used by {seen[address]} and {owner}"
                    )
                seen[address] = owner

    apps: dict[str, ApplicationConfig] = {}
    for i, app in enumerate(scenario.applications):
        base = f"applications[{i}]"
        if app.name in apps:
            raise ConfigInvalid(f"{base}.name", f"duplicate application {app.name!r}")
        assembly = assemblies.get(app.node)
        if assembly is None:
            raise ConfigInvalid(f"{base}.node", f"unknown node {app.node!r}")
        if assembly.instance(app.instance) is None:
            raise ConfigInvalid(f"{base}.instance", f"node {app.node!r} has no instance {app.instance!r}")
        if app.registration:
            _eid(app.registration, f"{base}.register")
        if app.responder:
            _eid(app.responder.reply_to, f"{base}.responder.reply_to")
        apps[app.name] = app

    mux = scenario.multiplexer
    if mux is not None:
        if mux.node not in assemblies:
            raise ConfigInvalid("multiplexer.node", f"unknown node {mux.node!r}")
        if mux.initial is not None and mux.initial not in mux.profiles:
            raise ConfigInvalid("multiplexer.initial", f"unknown profile {mux.initial!r}")
        for name, profile in mux.profiles.items():
            base = f"multiplexer.profiles.{name}"
            for j, link in enumerate(profile.links):
                _link_path_check(link, assemblies, f"{base}.links[{j}]")
            for label, routes in profile.routes.items():
                instance = assemblies[mux.node].instance(label)
                if instance is None:
                    raise ConfigInvalid(f"{base}.routes.{label}", f"unknown instance {label!r}")
                for j, route in enumerate(routes):
                    _check_route(route, instance, f"{base}.routes.{label}[{j}]")

    injected: set[str] = set()
    previous = 0.0
    for i, phase in enumerate(scenario.phases):
        base = f"phases[{i}]"
        if phase.at < previous:
            raise ConfigInvalid(f"{base}.at", "phase offsets must not decrease")
        previous = phase.at

        def need(field: str) -> Any:
            value = getattr(phase, field)
            if value is None:
                raise ConfigInvalid(f"{base}.{field}", f"required for action {phase.action!r}")
            return value

        if phase.action in ("inject", "expect_delivery", "expect_photo_return"):
            if need("application") not in apps:
                raise ConfigInvalid(f"{base}.application", f"unknown application {phase.application!r}")
        if phase.action == "inject":
            _eid(need("dest"), f"{base}.dest")
            if phase.payload is None and phase.payload_size is None:
                raise ConfigInvalid(f"{base}.payload", "inject needs payload or payload_size")
            if phase.id:
                injected.add(phase.id)
        elif phase.action in ("open_link", "close_link"):
            _link_path_check(need("link"), assemblies, f"{base}.link")
        elif phase.action == "reconfigure":
            if mux is None:
                raise ConfigInvalid(f"{base}.action", "scenario has no multiplexer")
            if need("profile") not in mux.profiles:
                raise ConfigInvalid(f"{base}.profile", f"unknown profile {phase.profile!r}")
        elif phase.action == "radio":
            need("a")
            need("b")
        elif phase.action == "expect_delivery":
            need("timeout")
            if need("payload_of") not in injected:
                raise ConfigInvalid(f"{base}.payload_of", f"no earlier inject with id {phase.payload_of!r}")
        elif phase.action == "expect_photo_return":
            need("timeout")
            responder = apps.get(need("responder"))
            if responder is None or responder.responder is None:
                raise ConfigInvalid(f"{base}.responder", f"{phase.responder!r} is not a responder application")


def build_routing_table(routes: list[RouteConfig]) -> RoutingTable:
    """Routing table from already checked route entries."""
    entries = []
    default = None
    for route in routes:
        hop = NextHop(route.cla, route.address)
        if route.dest == DEFAULT_ROUTE:
            default = hop
        else:
            entries.append(RouteEntry(parse_pattern(route.dest), hop))
    return RoutingTable(entries, default)
