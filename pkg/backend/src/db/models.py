"""
Database models for the spill-to-disk bundle store.
"""

from sqlalchemy import BigInteger, Column, DateTime, Integer, LargeBinary, String, func

from .database import Base


class StoredBundle(Base):
    """
    A bundle waiting in a BPA instance's store.

    Attributes:
        id (Integer): Primary key; also the FIFO enqueue order
        node (String): Node name of the owning instance
        scope (String): Scope label of the owning instance
        cla (String): CLA of the queue, empty for the no-route queue
        address (String): Next-hop address of the queue
        bundle_id (String): Bundle id, for diagnostics
        encoded (LargeBinary): Canonical bundle encoding
        expires_at_ms (BigInteger): DTN time at which the bundle expires
        stored_at (DateTime): Wall-clock time of insertion
    """

    __tablename__ = "stored_bundles"

    id = Column(Integer, primary_key=True, autoincrement=True)
    node = Column(String(255), nullable=False, index=True)
    scope = Column(String(255), nullable=False, index=True)
    cla = Column(String(255), nullable=False, default="")
    address = Column(String(1024), nullable=False, default="")
    bundle_id = Column(String(1024), nullable=False)
    encoded = Column(LargeBinary, nullable=False)
    expires_at_ms = Column(BigInteger, nullable=False)
    stored_at = Column(DateTime, nullable=False, default=func.now())
