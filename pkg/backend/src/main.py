"""
Management API of a ScopeStack node daemon.
"""

from contextlib import asynccontextmanager
from typing import AsyncIterator, Optional

from fastapi import FastAPI

from . import __version__
from .bundle import AuditLog
from .db.create_tables import create_tables
from .db.database import cleanup_db, init_db
from .harness.assembly import NodeAssembly
from .routes import api_router
from .utils.config import app_settings
from .utils.logger import app_logger


@asynccontextmanager
async def lifespan(app: FastAPI) -> AsyncIterator[None]:
    """
    Lifespan context manager for handling startup and shutdown events.

    Args:
        app: FastAPI application instance

    Yields:
        None
    """
    # Startup
    app_logger.info("Starting up ScopeStack management API")

    try:
        create_tables()
    except Exception as e:
        app_logger.error(f"Spill store unavailable: {str(e)}")

    init_db()

    yield

    # Shutdown
    app_logger.info("Shutting down ScopeStack management API")
    cleanup_db()


def create_app(
    assembly: Optional[NodeAssembly] = None, audit: Optional[AuditLog] = None
) -> FastAPI:
    """
    Create and configure the FastAPI application.

    Args:
        assembly: The node served by this API
        audit: Audit log of the node's process

    Returns:
        FastAPI: Configured FastAPI application
    """
    app = FastAPI(
        title="ScopeStack node API",
        description="Read-only view of a recursive DTN node",
        version=__version__,
        lifespan=lifespan,
    )
    app.state.assembly = assembly
    app.state.audit = audit

    @app.get("/status")
    async def status_check():
        """Liveness check."""
        return {
            "status": "ok",
            "environment": app_settings.CURRENT_ENV,
            "node": assembly.node if assembly else None,
        }

    # Include the API router with /api prefix
    app.include_router(api_router, prefix="/api")

    return app
