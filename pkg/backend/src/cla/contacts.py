"""
Contact plans: when a CLA may talk to which peer.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

from ..bundle import EndpointId, RoutePattern


@dataclass(frozen=True)
class Contact:
    """
    A transmission window toward one peer address.

    Attributes:
        address: Peer CLA address
        start: Scheduler time the window opens
        end: Scheduler time the window closes (inf for open-ended contacts)
        rate: Data rate cap in bytes per second, 0 for unlimited
        reachable: Destinations this contact will eventually lead to
    """

    address: str
    start: float
    end: float = math.inf
    rate: int = 0
    reachable: tuple[RoutePattern, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not self.start < self.end:
            raise ValueError(f"contact to {self.address} must start before it ends")
        if self.rate < 0:
            raise ValueError("contact data rate must not be negative")

    def covers(self, now: float) -> bool:
        return self.start <= now < self.end

    def to_dict(self) -> dict:
        return {
            "address": self.address,
            "start": self.start,
            "end": None if math.isinf(self.end) else self.end,
            "rate": self.rate,
        }


class ContactPlan:
    """Contacts of one CLA, in insertion order."""

    def __init__(self) -> None:
        self._contacts: list[Contact] = []

    def add(self, contact: Contact) -> None:
        self._contacts.append(contact)

    def remove(self, contact: Contact) -> None:
        if contact in self._contacts:
            self._contacts.remove(contact)

    def active(self, address: str, now: float) -> Optional[Contact]:
        for contact in self._contacts:
            if contact.address == address and contact.covers(now):
                return contact
        return None

    def for_address(self, address: str) -> list[Contact]:
        return [contact for contact in self._contacts if contact.address == address]

    def may_reach(self, dest: EndpointId, now: float) -> bool:
        return any(
            contact.end > now and any(pattern.matches(dest) for pattern in contact.reachable)
            for contact in self._contacts
        )

    def __iter__(self):
        return iter(list(self._contacts))

    def __len__(self) -> int:
        return len(self._contacts)
