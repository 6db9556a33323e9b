"""
Endpoint identifiers of the ``dtn`` and ``ipn`` URI schemes.
"""

import re
from dataclasses import dataclass
from enum import IntEnum
from typing import Any, Optional, Union

from ..utils.errors import MalformedEid

UINT64_MAX = 2**64 - 1

_DECIMAL = re.compile(r"[0-9]+")


class EidScheme(IntEnum):
    """Scheme codes used in the CBOR encoding of an EID."""

    DTN = 1
    IPN = 2


@dataclass(frozen=True, order=True)
class EndpointId:
    """
    A dtn or ipn endpoint identifier.

    Attributes:
        scheme: EidScheme of the identifier
        ssp: dtn scheme-specific part, ``none`` or ``//authority[/path]``
        node: ipn node number
        service: ipn service number
    """

    scheme: EidScheme
    ssp: str = ""
    node: int = 0
    service: int = 0

    def __post_init__(self) -> None:
        if self.scheme == EidScheme.IPN:
            for value in (self.node, self.service):
                if isinstance(value, bool) or not isinstance(value, int):
                    raise MalformedEid("ipn numbers must be integers")
                if value < 0 or value > UINT64_MAX:
                    raise MalformedEid(f"ipn number out of range: {value}")
            if self.ssp:
                raise MalformedEid("ipn identifiers carry no ssp")
        elif self.scheme == EidScheme.DTN:
            if self.ssp != "none" and not _valid_dtn_ssp(self.ssp):
                raise MalformedEid(f"invalid dtn ssp: {self.ssp!r}")
        else:
            raise MalformedEid(f"unknown scheme code {self.scheme!r}")

    @classmethod
    def ipn(cls, node: int, service: int = 0) -> "EndpointId":
        return cls(EidScheme.IPN, node=node, service=service)

    @classmethod
    def dtn(cls, ssp: str) -> "EndpointId":
        return cls(EidScheme.DTN, ssp=ssp)

    @property
    def is_null(self) -> bool:
        return self.scheme == EidScheme.DTN and self.ssp == "none"

    @property
    def authority(self) -> Optional[str]:
        """Node name of a dtn identifier, None for ipn and dtn:none."""
        if self.scheme != EidScheme.DTN or self.is_null:
            return None
        return self.ssp[2:].split("/", 1)[0]

    def node_id(self) -> "EndpointId":
        """The administrative endpoint of the node this endpoint lives on."""
        if self.scheme == EidScheme.IPN:
            return EndpointId.ipn(self.node, 0)
        if self.is_null:
            return self
        return EndpointId.dtn(f"//{self.authority}/")

    def to_cbor(self) -> list[Any]:
        """CBOR array form: ``[1, ssp | 0]`` or ``[2, [node, service]]``."""
        if self.scheme == EidScheme.IPN:
            return [int(EidScheme.IPN), [self.node, self.service]]
        return [int(EidScheme.DTN), 0 if self.is_null else self.ssp]

    @classmethod
    def from_cbor(cls, value: Any) -> "EndpointId":
        if not isinstance(value, list) or len(value) != 2:
            raise MalformedEid("EID must be a two-element array")
        code, ssp = value
        if isinstance(code, bool) or not isinstance(code, int):
            raise MalformedEid("EID scheme code must be an integer")
        if code == EidScheme.DTN:
            if isinstance(ssp, int) and not isinstance(ssp, bool) and ssp == 0:
                return DTN_NONE
            if not isinstance(ssp, str):
                raise MalformedEid("dtn ssp must be text or 0")
            return cls.dtn(ssp)
        if code == EidScheme.IPN:
            if not isinstance(ssp, list) or len(ssp) != 2:
                raise MalformedEid("ipn ssp must be [node, service]")
            return cls.ipn(ssp[0], ssp[1])
        raise MalformedEid(f"unknown scheme code {code}")

    def __str__(self) -> str:
        if self.scheme == EidScheme.IPN:
            return f"ipn:{self.node}.{self.service}"
        return f"dtn:{self.ssp}"

    def __repr__(self) -> str:
        return f"EndpointId({str(self)!r})"


def _valid_dtn_ssp(ssp: str) -> bool:
    if not isinstance(ssp, str) or not ssp.startswith("//"):
        return False
    authority = ssp[2:].split("/", 1)[0]
    return bool(authority) and ssp.isascii() and ssp.isprintable() and " " not in ssp


DTN_NONE = EndpointId(EidScheme.DTN, ssp="none")


def parse_eid(text: str) -> EndpointId:
    """
    Parse an EID from its URI text.

    Args:
        text: e.g. ``ipn:2.0``, ``dtn://lower3.dtn`` or ``dtn:none``

    Returns:
        EndpointId: Canonical identifier; ``str()`` gives the canonical text

    Raises:
        MalformedEid: Unknown scheme, non-numeric ipn parts, empty dtn authority
    """
    if not isinstance(text, str) or not text:
        raise MalformedEid("EID text must be a non-empty string")
    scheme, sep, ssp = text.partition(":")
    if not sep:
        raise MalformedEid(f"missing scheme separator in {text!r}")
    scheme = scheme.lower()

    if scheme == "ipn":
        node, dot, service = ssp.partition(".")
        if not dot or not _DECIMAL.fullmatch(node) or not _DECIMAL.fullmatch(service):
            raise MalformedEid(f"ipn EID must be ipn:<node>.<service>, got {text!r}")
        return EndpointId.ipn(int(node), int(service))

    if scheme == "dtn":
        if ssp == "none":
            return DTN_NONE
        if not _valid_dtn_ssp(ssp):
            raise MalformedEid(f"dtn EID needs a non-empty //authority, got {text!r}")
        return EndpointId.dtn(ssp)

    raise MalformedEid(f"unknown EID scheme {scheme!r}")


EidLike = Union[str, EndpointId]


def as_eid(value: EidLike) -> EndpointId:
    """Accept either an EndpointId or its text form."""
    return value if isinstance(value, EndpointId) else parse_eid(value)


@dataclass(frozen=True)
class RoutePattern:
    """
    Destination pattern of a routing entry.

    Either an exact EndpointId or every service of one ipn node (``ipn:N.*``).
    """

    exact: Optional[EndpointId] = None
    ipn_node: Optional[int] = None

    @property
    def is_wildcard(self) -> bool:
        return self.exact is None

    def matches(self, eid: EndpointId) -> bool:
        if self.exact is not None:
            return eid == self.exact
        return eid.scheme == EidScheme.IPN and eid.node == self.ipn_node

    def __str__(self) -> str:
        if self.exact is not None:
            return str(self.exact)
        return f"ipn:{self.ipn_node}.*"


def parse_pattern(text: str) -> RoutePattern:
    """Parse ``ipn:N.*`` or any exact EID into a RoutePattern."""
    if isinstance(text, str) and text.lower().startswith("ipn:") and text.endswith(".*"):
        node = text[4:-2]
        if not _DECIMAL.fullmatch(node) or int(node) > UINT64_MAX:
            raise MalformedEid(f"invalid ipn wildcard {text!r}")
        return RoutePattern(ipn_node=int(node))
    return RoutePattern(exact=parse_eid(text))
