"""
Bundle storage of a BPA instance.

Bundles wait in FIFO queues keyed by the next hop ``(cla, address)``; bundles
without any route wait in the pending queue. A global enqueue sequence keeps
re-dispatch in arrival order across queues.
"""

import itertools
from abc import ABC, abstractmethod
from collections import OrderedDict
from typing import Optional

from sqlalchemy import delete, func, select

from ..bundle import Bundle, decode_bundle, encode_bundle
from ..db.create_tables import create_tables
from ..db.database import open_session
from ..db.models import StoredBundle
from .routing import NextHop

# Queue of bundles that had no route when they were stored
PENDING = NextHop("", "")


class BundleStore(ABC):
    """Interface shared by the memory and the SQL spill backends."""

    @abstractmethod
    def push(self, bundle: Bundle, key: NextHop = PENDING) -> None: ...

    @abstractmethod
    def take(self, key: NextHop) -> list[Bundle]:
        """Remove and return one queue in FIFO order."""

    @abstractmethod
    def take_all(self) -> list[tuple[NextHop, Bundle]]:
        """Remove and return every stored bundle in global enqueue order."""

    @abstractmethod
    def purge_expired(self, now_ms: int) -> list[Bundle]:
        """Remove and return bundles whose lifetime has elapsed."""

    @abstractmethod
    def depths(self) -> dict[str, int]: ...

    @abstractmethod
    def hops(self) -> list[NextHop]:
        """Keys of the non-empty queues."""

    @abstractmethod
    def __len__(self) -> int: ...

    def holds(self, key: NextHop) -> bool:
        return key in self.hops()

    def take_pending(self) -> list[Bundle]:
        return self.take(PENDING)


class MemoryBundleStore(BundleStore):
    """In-memory FIFO queues."""

    def __init__(self) -> None:
        self._queues: "OrderedDict[NextHop, list[tuple[int, Bundle]]]" = OrderedDict()
        self._sequence = itertools.count()

    def push(self, bundle: Bundle, key: NextHop = PENDING) -> None:
        self._queues.setdefault(key, []).append((next(self._sequence), bundle))

    def take(self, key: NextHop) -> list[Bundle]:
        return [bundle for _, bundle in self._queues.pop(key, [])]

    def take_all(self) -> list[tuple[NextHop, Bundle]]:
        items = [
            (seq, key, bundle)
            for key, queue in self._queues.items()
            for seq, bundle in queue
        ]
        self._queues.clear()
        return [(key, bundle) for _, key, bundle in sorted(items, key=lambda i: i[0])]

    def purge_expired(self, now_ms: int) -> list[Bundle]:
        expired: list[Bundle] = []
        for key in list(self._queues):
            kept = []
            for seq, bundle in self._queues[key]:
                (expired if bundle.is_expired(now_ms) else kept).append((seq, bundle))
            if kept:
                self._queues[key] = kept
            else:
                del self._queues[key]
        return [bundle for _, bundle in sorted(expired, key=lambda i: i[0])]

    def depths(self) -> dict[str, int]:
        return {str(key) if key != PENDING else "pending": len(q) for key, q in self._queues.items()}

    def hops(self) -> list[NextHop]:
        return list(self._queues)

    def holds(self, key: NextHop) -> bool:
        return key in self._queues

    def __len__(self) -> int:
        return sum(len(queue) for queue in self._queues.values())


class SqlBundleStore(BundleStore):
    """
    Spill-to-disk store backed by the ``stored_bundles`` table.

    Rows are scoped by (node, scope) so several instances may share one
    database. Stored bytes are the canonical encoding; decoding them again
    records no audit event because they never left this instance.
    """

    def __init__(self, node: str, scope: str, url: Optional[str] = None):
        self.node = node
        self.scope = scope
        self._url = url
        create_tables(url)

    def _rows(self, session, key: Optional[NextHop] = None):
        query = select(StoredBundle).where(
            StoredBundle.node == self.node, StoredBundle.scope == self.scope
        )
        if key is not None:
            query = query.where(
                StoredBundle.cla == key.cla, StoredBundle.address == key.address
            )
        return session.scalars(query.order_by(StoredBundle.id)).all()

    def push(self, bundle: Bundle, key: NextHop = PENDING) -> None:
        with open_session(self._url) as session:
            session.add(
                StoredBundle(
                    node=self.node,
                    scope=self.scope,
                    cla=key.cla,
                    address=key.address,
                    bundle_id=bundle.bundle_id,
                    encoded=encode_bundle(bundle),
                    expires_at_ms=bundle.expires_at_ms,
                )
            )
            session.commit()

    def _take_rows(self, key: Optional[NextHop]) -> list[tuple[NextHop, Bundle]]:
        with open_session(self._url) as session:
            rows = self._rows(session, key)
            taken = [
                (NextHop(row.cla, row.address), decode_bundle(row.encoded)) for row in rows
            ]
            if rows:
                session.execute(
                    delete(StoredBundle).where(StoredBundle.id.in_([row.id for row in rows]))
                )
                session.commit()
        return taken

    def take(self, key: NextHop) -> list[Bundle]:
        return [bundle for _, bundle in self._take_rows(key)]

    def take_all(self) -> list[tuple[NextHop, Bundle]]:
        return self._take_rows(None)

    def purge_expired(self, now_ms: int) -> list[Bundle]:
        with open_session(self._url) as session:
            rows = [row for row in self._rows(session) if row.expires_at_ms <= now_ms]
            expired = [decode_bundle(row.encoded) for row in rows]
            if rows:
                session.execute(
                    delete(StoredBundle).where(StoredBundle.id.in_([row.id for row in rows]))
                )
                session.commit()
        return expired

    def depths(self) -> dict[str, int]:
        with open_session(self._url) as session:
            counts = session.execute(
                select(StoredBundle.cla, StoredBundle.address, func.count())
                .where(StoredBundle.node == self.node, StoredBundle.scope == self.scope)
                .group_by(StoredBundle.cla, StoredBundle.address)
            ).all()
        return {
            "pending" if not cla else f"{cla}:{address}": count
            for cla, address, count in counts
        }

    def hops(self) -> list[NextHop]:
        with open_session(self._url) as session:
            keys = session.execute(
                select(StoredBundle.cla, StoredBundle.address)
                .where(StoredBundle.node == self.node, StoredBundle.scope == self.scope)
                .group_by(StoredBundle.cla, StoredBundle.address)
                .order_by(func.min(StoredBundle.id))
            ).all()
        return [NextHop(cla, address) for cla, address in keys]

    def __len__(self) -> int:
        return sum(self.depths().values())
