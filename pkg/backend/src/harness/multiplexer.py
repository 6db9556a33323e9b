"""
Ground-station multiplexer.

A profile is a set of stream links (node, instance, CLA, peer address) plus
optional route tables for the multiplexer node's own instances. Switching
profiles closes the links of the old profile that the new one lacks, opens the
new ones and swaps the route tables, all inside one scheduler callback.
Bundles already stored anywhere stay where they are.
"""

from typing import Optional

from ..cla import StreamCla
from ..utils.errors import UnknownProfile
from ..utils.logger import app_logger
from .assembly import NodeAssembly
from .config import LinkRef, MultiplexerConfig, build_routing_table


def link_cla(assemblies: dict[str, NodeAssembly], link: LinkRef) -> StreamCla:
    node, label, cla, _ = link
    stream = assemblies[node].instance(label).clas[cla]
    if not isinstance(stream, StreamCla):
        raise TypeError(f"{node}/{label} CLA {cla!r} is not a stream CLA")
    return stream


def open_link(assemblies: dict[str, NodeAssembly], link: LinkRef) -> None:
    link_cla(assemblies, link).open_contact(link[3])


def close_link(assemblies: dict[str, NodeAssembly], link: LinkRef) -> None:
    link_cla(assemblies, link).close_contact(link[3])


class Multiplexer:
    """
    Args:
        config: Profiles and the multiplexer node
        assemblies: Every node of the scenario, by name
    """

    def __init__(self, config: MultiplexerConfig, assemblies: dict[str, NodeAssembly]):
        self.config = config
        self.assemblies = assemblies
        self.node = assemblies[config.node]
        self.active: Optional[str] = None
        self.switches = 0

    @property
    def profiles(self) -> list[str]:
        return list(self.config.profiles)

    def reconfigure(self, profile: str) -> bool:
        """
        Activate ``profile``.

        Returns:
            bool: False when ``profile`` was already active (nothing changes)

        Raises:
            UnknownProfile: ``profile`` is not configured
        """
        target = self.config.profiles.get(profile)
        if target is None:
            raise UnknownProfile(f"no multiplexer profile {profile!r}")
        if profile == self.active:
            return False

        previous = self.config.profiles[self.active].links if self.active else []
        for link in previous:
            if link not in target.links:
                close_link(self.assemblies, link)
        for link in target.links:
            if link not in previous:
                open_link(self.assemblies, link)
        for label, routes in target.routes.items():
            self.node.instance(label).replace_routes(build_routing_table(routes))

        app_logger.info(
            f"Multiplexer {self.node.node}: {self.active or '-'} -> {profile}"
        )
        self.active = profile
        self.switches += 1
        return True


def reconfigure_multiplexer(mux: Multiplexer, profile: str) -> bool:
    """Switch ``mux`` to ``profile``; see ``Multiplexer.reconfigure``."""
    return mux.reconfigure(profile)
