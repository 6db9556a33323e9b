"""
Client side of the Application Agent Protocol.

Used by applications, by the CLI and by BIBE CLAs. Responses (ACK, NACK,
SENDCONFIRM) arrive in request order and are matched to callbacks FIFO.
Registrations outlive the connection: a reconnect registers them again
before any other queued request.
"""

from collections import deque
from typing import Callable, Optional

from ..bundle import EndpointId, parse_eid
from ..transport import Connection, Network
from ..utils.errors import MalformedAapMessage, MalformedEid
from ..utils.logger import app_logger
from .aap import AapMessage, AapMessageType, AapStreamDecoder, decode_bundle_id

# Called with the response, or None when the connection failed first
ResponseCallback = Callable[[Optional[AapMessage]], None]
BundleCallback = Callable[[EndpointId, bytes], None]

_RESPONSES = frozenset(
    {AapMessageType.ACK, AapMessageType.NACK, AapMessageType.SENDCONFIRM}
)


class AapClient:
    """
    One AAP connection to a BPA instance.

    Args:
        network: Network to dial on
        address: AAP endpoint of the instance
        origin: Name of the dialing node, for emulated link delays
        on_bundle: Called with (source, payload) for every RECVBUNDLE
        on_welcome: Called with the instance's node EID
        on_closed: Called with the reason when the connection fails or closes
    """

    def __init__(
        self,
        network: Network,
        address: str,
        origin: Optional[str] = None,
        on_bundle: Optional[BundleCallback] = None,
        on_welcome: Optional[Callable[[EndpointId], None]] = None,
        on_closed: Optional[Callable[[Optional[Exception]], None]] = None,
    ):
        self.network = network
        self.address = address
        self.origin = origin
        self.on_bundle = on_bundle
        self.on_welcome = on_welcome
        self.on_closed = on_closed
        self.node_eid: Optional[EndpointId] = None
        self._connection: Optional[Connection] = None
        self._decoder = AapStreamDecoder()
        self._pending: deque[ResponseCallback] = deque()
        self._outbox: list[bytes] = []
        # eid -> callback, replayed on every new connection until NACKed
        self._registrations: dict[str, Optional[ResponseCallback]] = {}
        self._sent_registrations: set[str] = set()
        self._connecting = False
        self._closed = False

    @property
    def connected(self) -> bool:
        return self._connection is not None and not self._connection.closed

    def connect(self) -> None:
        """Dial the instance; requests issued before the dial completes are queued."""
        if self._connecting or self.connected:
            return
        self._connecting = True
        self._closed = False
        self._decoder = AapStreamDecoder()
        self.network.dial(
            self.address, lambda _: self, self._ready, self._failed, origin=self.origin
        )

    def _ready(self, connection: Connection) -> None:
        self._connecting = False
        self._connection = connection
        replay = [
            eid for eid in self._registrations if eid not in self._sent_registrations
        ]
        if replay:
            app_logger.info(f"Re-registering {len(replay)} endpoints at {self.address}")
        self._pending.extendleft(
            reversed([self._registration_callback(eid) for eid in replay])
        )
        self._sent_registrations.update(replay)
        outbox = [
            AapMessage(AapMessageType.REGISTER, eid=eid).serialize() for eid in replay
        ] + self._outbox
        self._outbox = []
        for data in outbox:
            connection.write(data)

    def _failed(self, exc: Exception) -> None:
        self._connecting = False
        app_logger.warning(f"AAP connection to {self.address} failed: {exc}")
        self._shutdown(exc)

    def _request(self, message: AapMessage, callback: Optional[ResponseCallback]) -> None:
        self._pending.append(callback or (lambda _: None))
        data = message.serialize()
        if self.connected:
            self._connection.write(data)  # type: ignore[union-attr]
        else:
            self._outbox.append(data)
            self.connect()

    def register(self, eid: EndpointId | str, callback: Optional[ResponseCallback] = None) -> None:
        """
        Register ``eid`` at the instance, now and after every reconnect.

        ``callback`` receives the response of each (re-)registration.
        """
        text = str(eid)
        self._registrations[text] = callback
        self._sent_registrations.add(text)
        self._request(
            AapMessage(AapMessageType.REGISTER, eid=text), self._registration_callback(text)
        )

    def _registration_callback(self, eid: str) -> ResponseCallback:
        def done(response: Optional[AapMessage]) -> None:
            callback = self._registrations.get(eid)
            if response is not None and response.msg_type == AapMessageType.NACK:
                self._registrations.pop(eid, None)
            if callback is not None:
                callback(response)

        return done

    def send(
        self,
        destination: EndpointId | str,
        payload: bytes,
        lifetime_ms: int = 0,
        callback: Optional[ResponseCallback] = None,
    ) -> None:
        self._request(
            AapMessage(
                AapMessageType.SENDBUNDLE,
                eid=str(destination),
                payload=payload,
                lifetime_ms=lifetime_ms,
            ),
            callback,
        )

    def ping(self, callback: Optional[ResponseCallback] = None) -> None:
        self._request(AapMessage(AapMessageType.PING), callback)

    def bundle_id_text(self, confirm: AapMessage) -> str:
        """Bundle id (``source@time.seq``) of a SENDCONFIRM on this connection."""
        time_ms, sequence = decode_bundle_id(confirm.bundle_id or 0)
        return f"{self.node_eid}@{time_ms}.{sequence}"

    def close(self) -> None:
        if self._connection is not None:
            self._connection.close()
        self._shutdown(None)

    # ConnectionHandler

    def data_received(self, data: bytes) -> None:
        try:
            for message in self._decoder.feed(data):
                self._handle(message)
        except (MalformedAapMessage, MalformedEid) as exc:
            app_logger.warning(f"Bad AAP message from {self.address}: {exc}")
            self.close()

    def connection_lost(self) -> None:
        self._shutdown(ConnectionResetError(f"AAP connection to {self.address} closed"))

    def _shutdown(self, reason: Optional[Exception]) -> None:
        if self._closed:
            return
        self._closed = True
        self._connection = None
        self._outbox.clear()
        self._sent_registrations.clear()
        pending, self._pending = self._pending, deque()
        for callback in pending:
            callback(None)
        if self.on_closed is not None:
            self.on_closed(reason)

    def _handle(self, message: AapMessage) -> None:
        if message.msg_type == AapMessageType.WELCOME:
            self.node_eid = parse_eid(message.eid or "")
            if self.on_welcome is not None:
                self.on_welcome(self.node_eid)
        elif message.msg_type == AapMessageType.RECVBUNDLE:
            if self.on_bundle is not None:
                self.on_bundle(parse_eid(message.eid or ""), message.payload or b"")
        elif message.msg_type in _RESPONSES:
            if not self._pending:
                app_logger.warning(f"Unsolicited {message.msg_type.name} from {self.address}")
                return
            self._pending.popleft()(message)
