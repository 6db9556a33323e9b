"""
Convergence-layer adapters: stream links between nodes and BIBE between scopes.
"""

from .base import ClaAddress, ConvergenceLayerAdapter, cla_transmit
from .bibe import (
    BibeAddress,
    BibeCla,
    bibe_decapsulate,
    bibe_encapsulate,
    bpdu_payload,
    outer_lifetime,
)
from .contacts import Contact, ContactPlan
from .stream import StreamCla

__all__ = [
    "BibeAddress",
    "BibeCla",
    "ClaAddress",
    "Contact",
    "ContactPlan",
    "ConvergenceLayerAdapter",
    "StreamCla",
    "bibe_decapsulate",
    "bibe_encapsulate",
    "bpdu_payload",
    "cla_transmit",
    "outer_lifetime",
]
