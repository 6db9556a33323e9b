"""
Node assemblies: every BPA instance of one node, wired top to bottom.

``build_assembly`` turns an ``AssemblyConfig`` into running objects on a shared
``Environment`` (scheduler, network, beacon channel, audit log). The same
builder serves the in-process emulation and the TCP node daemon.
"""

import asyncio
import random
from dataclasses import dataclass, field
from typing import Any, Optional

from ..bpa import AapServer, ScopeInstance, SqlBundleStore
from ..bundle import AuditLog, parse_eid, parse_pattern
from ..cla import BibeCla, Contact, StreamCla
from ..discovery import BeaconChannel, EmulatedBeaconBus, NeighborDiscovery, UdpBeaconChannel
from ..transport import EmulatedNetwork, Network, TcpNetwork
from ..utils.clock import AsyncioScheduler, Scheduler, VirtualScheduler
from ..utils.config import app_settings
from ..utils.logger import app_logger
from .config import AssemblyConfig, InstanceConfig, build_routing_table, check_assembly


@dataclass
class Environment:
    """
    Everything the assemblies of one process share.

    Attributes:
        scheduler: Event loop all callbacks run on
        network: Where stream CLAs and AAP endpoints listen and dial
        beacons: Discovery broadcast channel
        audit: The process-wide audit log
        seed: Root seed for jitter and generated payloads
    """

    scheduler: Scheduler
    network: Network
    beacons: BeaconChannel
    audit: AuditLog
    seed: int = app_settings.SCENARIO_SEED

    @classmethod
    def virtual(
        cls,
        seed: int = app_settings.SCENARIO_SEED,
        link_delay: float = app_settings.LINK_DELAY,
        radio_in_range: bool = True,
        radio_delay: float = 0.001,
    ) -> "Environment":
        """Deterministic emulation on virtual time."""
        scheduler = VirtualScheduler()
        return cls(
            scheduler=scheduler,
            network=EmulatedNetwork(scheduler, default_delay=link_delay),
            beacons=EmulatedBeaconBus(scheduler, radio_in_range, radio_delay),
            audit=AuditLog(scheduler.now),
            seed=seed,
        )

    @classmethod
    def wall_clock(
        cls,
        loop: asyncio.AbstractEventLoop,
        seed: int = app_settings.SCENARIO_SEED,
        link_delay: float = app_settings.LINK_DELAY,
        radio_in_range: bool = True,
        radio_delay: float = 0.001,
    ) -> "Environment":
        """Emulated links and radio, but real time on an asyncio loop."""
        scheduler = AsyncioScheduler(loop)
        return cls(
            scheduler=scheduler,
            network=EmulatedNetwork(scheduler, default_delay=link_delay),
            beacons=EmulatedBeaconBus(scheduler, radio_in_range, radio_delay),
            audit=AuditLog(scheduler.now),
            seed=seed,
        )

    @classmethod
    def daemon(cls, loop: asyncio.AbstractEventLoop) -> "Environment":
        """TCP links and UDP beacons for a real node process."""
        scheduler = AsyncioScheduler(loop)
        return cls(
            scheduler=scheduler,
            network=TcpNetwork(loop),
            beacons=UdpBeaconChannel(loop),
            audit=AuditLog(scheduler.now),
        )

    def rng(self, *labels: str) -> random.Random:
        """Generator seeded from the root seed and ``labels``, stable across runs."""
        return random.Random("/".join([str(self.seed), *labels]))


@dataclass
class NodeAssembly:
    """
    The instances of one node with their AAP servers and discovery agents.

    Attributes:
        node: Node name
        config: The checked configuration it was built from
        instances: ScopeInstances in configuration order
        servers: AAP server per scope label
        discoveries: Discovery agent per scope label, when enabled
        initial_digests: Routing table digest per label, taken at build time
    """

    node: str
    config: AssemblyConfig
    instances: list[ScopeInstance] = field(default_factory=list)
    servers: dict[str, AapServer] = field(default_factory=dict)
    discoveries: dict[str, NeighborDiscovery] = field(default_factory=dict)
    initial_digests: dict[str, str] = field(default_factory=dict)
    running: bool = False

    def instance(self, label: str) -> ScopeInstance:
        """
        Raises:
            KeyError: No instance with this scope label
        """
        for instance in self.instances:
            if instance.scope == label:
                return instance
        raise KeyError(f"{self.node} has no instance {label!r}")

    @property
    def labels(self) -> list[str]:
        return [instance.scope for instance in self.instances]

    def open_endpoints(self) -> None:
        for server in self.servers.values():
            server.start()

    def start_instances(self) -> None:
        """Start instances bottom-up, then discovery; AAP endpoints must be open."""
        for instance in reversed(self.instances):
            instance.start()
        for discovery in self.discoveries.values():
            discovery.start()
        self.running = True
        app_logger.info(f"Node {self.node} ready with scopes {self.labels}")

    def start(self) -> None:
        self.open_endpoints()
        self.start_instances()

    def stop(self) -> None:
        if not self.running:
            return
        for discovery in self.discoveries.values():
            discovery.stop()
        for instance in self.instances:
            instance.stop()
        for server in self.servers.values():
            server.stop()
        self.running = False
        app_logger.info(f"Node {self.node} stopped")

    def snapshot(self) -> dict[str, Any]:
        return {
            "node": self.node,
            "running": self.running,
            "instances": [instance.snapshot() for instance in self.instances],
            "wiring": [wiring.model_dump(by_alias=True) for wiring in self.config.wiring],
        }


def _contacts(config: InstanceConfig, cla: str) -> list[Contact]:
    return [
        Contact(
            address=contact.address,
            start=contact.start,
            end=float("inf") if contact.end is None else contact.end,
            rate=contact.rate,
            reachable=tuple(parse_pattern(p) for p in contact.reachable),
        )
        for contact in config.contacts
        if contact.cla == cla
    ]


def _build_instance(
    assembly: AssemblyConfig, config: InstanceConfig, env: Environment
) -> tuple[ScopeInstance, AapServer, Optional[NeighborDiscovery]]:
    node = assembly.node
    store = SqlBundleStore(node, config.label) if config.spill else None
    instance = ScopeInstance(
        node=node,
        scope=config.label,
        node_eids=[parse_eid(eid) for eid in config.node_eids],
        routes=build_routing_table(config.routes),
        scheduler=env.scheduler,
        events=env.audit.scope(node, config.label),
        store=store,
        discovery_enabled=config.discovery.enabled,
        default_lifetime_ms=config.lifetime_ms,
    )
    for cla in config.clas:
        if cla.type == "stream":
            instance.attach_cla(
                StreamCla(
                    cla.name,
                    env.network,
                    listen=cla.listen,
                    origin=node,
                    contacts=_contacts(config, cla.name),
                )
            )
        else:
            instance.attach_cla(
                BibeCla(cla.name, env.network, origin=node, lifetime_ms=cla.lifetime_ms)
            )

    server = AapServer(instance, env.network, assembly.aap_address(config.label), node)

    discovery = None
    if config.discovery.enabled:
        stream = instance.clas[config.discovery.cla or ""]
        assert isinstance(stream, StreamCla)
        discovery = NeighborDiscovery(
            instance,
            env.beacons,
            stream,
            member=f"{node}/{config.label}",
            period=config.discovery.period,
            seed=f"{env.seed}/{node}/{config.label}",
        )
    return instance, server, discovery


def build_assembly(config: AssemblyConfig, env: Environment) -> NodeAssembly:
    """
    Build (without starting) the instances of one node.

    Raises:
        ConfigInvalid: The configuration fails its cross-reference checks
    """
    check_assembly(config)
    assembly = NodeAssembly(node=config.node, config=config)
    for instance_config in config.instances:
        instance, server, discovery = _build_instance(config, instance_config, env)
        assembly.instances.append(instance)
        assembly.servers[instance.scope] = server
        if discovery is not None:
            assembly.discoveries[instance.scope] = discovery
        assembly.initial_digests[instance.scope] = instance.route_digest()

    for wiring in config.wiring:
        upper = assembly.instance(wiring.upper)
        bibe = upper.clas[wiring.cla]
        assert isinstance(bibe, BibeCla)
        bibe.add_lower(
            assembly.servers[wiring.lower].address,
            [parse_eid(eid) for eid in wiring.registrations],
        )
    app_logger.debug(f"Built node {config.node} with {len(assembly.instances)} instances")
    return assembly
