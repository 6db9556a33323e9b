"""
Scenario applications. They reach their BPA instance through AAP only, exactly
like an external program would.
"""

from dataclasses import dataclass
from typing import Callable, Optional

from ..bpa import AapClient, AapMessage, AapMessageType
from ..bundle import EndpointId, digest
from ..utils.logger import app_logger
from .assembly import Environment
from .config import ApplicationConfig


@dataclass(frozen=True)
class Delivery:
    """A payload handed to an application."""

    time: float
    source: str
    digest: str
    size: int


@dataclass(frozen=True)
class Submission:
    """A payload an application handed to its instance."""

    time: float
    dest: str
    digest: str
    size: int
    bundle_id: Optional[str] = None


class ScenarioApplication:
    """
    An AAP client that registers one endpoint, sends payloads and records
    what it receives. A responder answers every received payload with a photo
    of seeded pseudo-random bytes sent to ``reply_to``.
    """

    def __init__(
        self,
        config: ApplicationConfig,
        aap_address: str,
        env: Environment,
        on_delivery: Optional[Callable[["ScenarioApplication", Delivery], None]] = None,
    ):
        self.config = config
        self.name = config.name
        self.env = env
        self.on_delivery = on_delivery
        self.client = AapClient(
            env.network,
            aap_address,
            origin=config.node,
            on_bundle=self._received,
        )
        self.deliveries: list[Delivery] = []
        self.submissions: list[Submission] = []
        self.registered = False
        self._photo: Optional[bytes] = None

    @property
    def photo(self) -> Optional[bytes]:
        """The responder's photo, generated on first use."""
        responder = self.config.responder
        if responder is None:
            return None
        if self._photo is None:
            self._photo = self.env.rng("photo", self.name).randbytes(responder.photo_size)
        return self._photo

    def start(self) -> None:
        self.client.connect()
        if self.config.registration:
            self.client.register(self.config.registration, self._registered)

    def stop(self) -> None:
        self.client.close()

    def _registered(self, response: Optional[AapMessage]) -> None:
        self.registered = response is not None and response.msg_type == AapMessageType.ACK
        if not self.registered:
            app_logger.error(f"Application {self.name} could not register {self.config.registration}")

    def send(self, dest: str, payload: bytes, lifetime_ms: int = 0) -> int:
        """Submit ``payload``; returns the index of the new Submission."""
        index = len(self.submissions)
        self.submissions.append(
            Submission(self.env.scheduler.now(), dest, digest(payload), len(payload))
        )
        self.client.send(dest, payload, lifetime_ms, lambda response: self._confirmed(index, response))
        return index

    def _confirmed(self, index: int, response: Optional[AapMessage]) -> None:
        submission = self.submissions[index]
        if response is None or response.msg_type != AapMessageType.SENDCONFIRM:
            app_logger.warning(f"Application {self.name}: send to {submission.dest} refused")
            return
        self.submissions[index] = Submission(
            submission.time,
            submission.dest,
            submission.digest,
            submission.size,
            self.client.bundle_id_text(response),
        )

    def _received(self, source: EndpointId, payload: bytes) -> None:
        delivery = Delivery(self.env.scheduler.now(), str(source), digest(payload), len(payload))
        self.deliveries.append(delivery)
        app_logger.info(f"Application {self.name} received {len(payload)} bytes from {source}")
        responder = self.config.responder
        if responder is not None and payload != self.photo:
            self.send(responder.reply_to, self.photo or b"", responder.lifetime_ms)
        if self.on_delivery is not None:
            self.on_delivery(self, delivery)
