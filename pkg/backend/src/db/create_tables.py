"""
Script for creating the spill store tables.
"""

from typing import Optional

from ..utils.logger import app_logger
from .database import get_engine
from .models import Base


def create_tables(url: Optional[str] = None) -> None:
    """
    Create database tables based on SQLAlchemy models.

    SQLite creates the database file on first connect, so no separate
    database creation step is needed.
    """
    try:
        engine = get_engine(url)
        Base.metadata.create_all(bind=engine)
        app_logger.info("Spill store tables created successfully")

    except Exception as e:
        app_logger.error(f"Error creating tables: {str(e)}")
        raise Exception(f"Error creating tables: {str(e)}") from e


if __name__ == "__main__":
    create_tables()
