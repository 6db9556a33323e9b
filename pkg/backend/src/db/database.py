"""
Module for the spill store's database connection and session management.
"""

from typing import Any, Iterator, Optional

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, declarative_base, sessionmaker
from sqlalchemy.pool import StaticPool

from ..utils.config import app_settings

# Global engine instance for connection reuse
_engine: Engine | None = None
Base: Any = declarative_base()


def get_engine(url: Optional[str] = None) -> Engine:
    """
    Create or return the existing database engine.

    Args:
        url: SQLAlchemy URL; defaults to ``STORE_URL``. Passing a URL different
            from the current engine's replaces the engine.

    Returns:
        Engine: SQLAlchemy engine instance
    """
    global _engine
    url = url or app_settings.STORE_URL
    if _engine is not None and str(_engine.url) != url:
        cleanup_database()
    if _engine is None:
        if url in ("sqlite://", "sqlite:///:memory:"):
            # One shared connection, otherwise every session sees an empty database
            _engine = create_engine(
                url,
                poolclass=StaticPool,
                connect_args={"check_same_thread": False},
            )
        else:
            _engine = create_engine(
                url,
                pool_pre_ping=True,  # Connection health check
                connect_args={"check_same_thread": False}
                if url.startswith("sqlite")
                else {},
            )
    return _engine


def setup_database() -> None:
    """Initialize database connection."""
    get_engine()


def cleanup_database() -> None:
    """Clean up database connections."""
    global _engine
    if _engine:
        _engine.dispose()
        _engine = None


SessionLocal = sessionmaker(autocommit=False, autoflush=False)


def open_session(url: Optional[str] = None) -> Session:
    """A new session bound to the (possibly replaced) engine."""
    SessionLocal.configure(bind=get_engine(url))
    return SessionLocal()


def get_db() -> Iterator[Session]:
    """
    Database session dependency for FastAPI.

    Yields:
        Session: SQLAlchemy session object
    """
    session = open_session()
    try:
        yield session
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()


def init_db() -> None:
    """Initialize database for application startup."""
    setup_database()


def cleanup_db() -> None:
    """Cleanup database connections for application shutdown."""
    cleanup_database()
