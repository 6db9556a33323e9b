"""
Exception hierarchy shared by every ScopeStack module.
"""


class ScopeStackError(Exception):
    """Base class for all domain errors."""


class MalformedEid(ScopeStackError, ValueError):
    """Text or CBOR that is not a valid dtn/ipn endpoint identifier."""


class MalformedBundle(ScopeStackError, ValueError):
    """Bytes that are not a well-formed bundle encoding."""


class MalformedBpdu(ScopeStackError, ValueError):
    """Bytes that are not a well-formed BIBE protocol data unit."""


class MalformedBeacon(ScopeStackError, ValueError):
    """A discovery datagram that cannot be decoded."""


class MalformedAapMessage(ScopeStackError, ValueError):
    """An application agent protocol message with invalid content."""


class DuplicateRegistration(ScopeStackError):
    """The endpoint already has an active registration on this instance."""


class NoRoute(ScopeStackError):
    """The routing table has no entry for a destination."""


class UnknownCla(ScopeStackError):
    """A route or contact names a CLA that is not attached to the instance."""


class LinkDown(ScopeStackError):
    """No contact covers the current time, or the peer cannot be reached."""


class PeerRejected(ScopeStackError):
    """The next hop refused the bundle."""


class ChannelUnavailable(ScopeStackError):
    """The discovery broadcast channel cannot send right now."""


class UnknownProfile(ScopeStackError):
    """A multiplexer profile name that is not configured."""


class ExpectationTimeout(ScopeStackError):
    """A scenario expectation was not met before its deadline."""


class ConfigInvalid(ScopeStackError):
    """
    A configuration document failed validation.

    Attributes:
        path: Key path of the offending entry, e.g. ``instances[1].routes[0].cla``
        message: Human readable reason
    """

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)
