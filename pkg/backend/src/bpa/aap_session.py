"""
Server side of the Application Agent Protocol.

One ``AapSession`` serves one connection. Applications and upper-layer BIBE
CLAs get exactly the same treatment.
"""

from typing import TYPE_CHECKING, Optional

from ..bundle import Bundle, parse_eid
from ..transport import Connection, Network
from ..utils.errors import DuplicateRegistration, MalformedAapMessage, MalformedEid
from .aap import AapMessage, AapMessageType, AapStreamDecoder, ack, encode_bundle_id, nack
from .registry import Registration

if TYPE_CHECKING:
    from .instance import ScopeInstance


class AapSession:
    """Handles the messages of one AAP connection on the instance's loop."""

    def __init__(self, instance: "ScopeInstance", connection: Connection):
        self.instance = instance
        self.connection = connection
        self.registrations: list[Registration] = []
        self._decoder = AapStreamDecoder()
        self._send(AapMessage(AapMessageType.WELCOME, eid=str(instance.primary_eid)))

    def _send(self, message: AapMessage) -> None:
        self.connection.write(message.serialize())

    def data_received(self, data: bytes) -> None:
        try:
            for message in self._decoder.feed(data):
                self._handle(message)
        except MalformedAapMessage as exc:
            self.instance.log.warning(f"Closing AAP session after bad message: {exc}")
            self.connection.close()
            self._release()

    def connection_lost(self) -> None:
        self._release()

    def _release(self) -> None:
        for registration in self.registrations:
            registration.release()
        self.registrations.clear()

    def _handle(self, message: AapMessage) -> None:
        if message.msg_type == AapMessageType.REGISTER:
            self._register(message.eid or "")
        elif message.msg_type == AapMessageType.SENDBUNDLE:
            self._send_bundle(message)
        elif message.msg_type == AapMessageType.PING:
            self._send(ack())
        else:
            self.instance.log.warning(f"Unexpected AAP message {message.msg_type.name}")
            self._send(nack())

    def _register(self, text: str) -> None:
        try:
            eid = parse_eid(text)
            registration = self.instance.register(eid, self._deliver)
        except (MalformedEid, DuplicateRegistration) as exc:
            self.instance.log.info(f"Refused AAP registration of {text!r}: {exc}")
            self._send(nack())
            return
        self.registrations.append(registration)
        self._send(ack())

    def _send_bundle(self, message: AapMessage) -> None:
        try:
            destination = parse_eid(message.eid or "")
        except MalformedEid as exc:
            self.instance.log.info(f"Refused AAP send: {exc}")
            self._send(nack())
            return
        # A zero lifetime on the wire asks for the instance default
        bundle = self.instance.create_bundle(
            destination, message.payload or b"", message.lifetime_ms or None
        )
        self._send(
            AapMessage(
                AapMessageType.SENDCONFIRM,
                bundle_id=encode_bundle_id(
                    bundle.creation.time_ms, bundle.creation.sequence
                ),
            )
        )
        self.instance.dispatch(bundle)

    def _deliver(self, bundle: Bundle) -> None:
        if self.connection.closed:
            raise ConnectionResetError("application disconnected")
        self._send(
            AapMessage(
                AapMessageType.RECVBUNDLE, eid=str(bundle.source), payload=bundle.payload
            )
        )


class AapServer:
    """Accepts AAP connections for one instance on one address."""

    def __init__(
        self,
        instance: "ScopeInstance",
        network: Network,
        address: str,
        node: Optional[str] = None,
    ):
        self.instance = instance
        self.network = network
        self.address = address
        self.node = node or instance.node
        self.sessions: list[AapSession] = []

    def _accept(self, connection: Connection) -> AapSession:
        session = AapSession(self.instance, connection)
        self.sessions.append(session)
        return session

    def start(self) -> None:
        self.network.listen(self.address, self._accept, node=self.node)
        self.instance.log.info(f"AAP listening on {self.address}")

    def stop(self) -> None:
        self.network.unlisten(self.address)
        for session in self.sessions:
            session.connection.close()
            session.connection_lost()
        self.sessions.clear()
