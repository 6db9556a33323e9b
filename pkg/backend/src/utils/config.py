"""
Environment variables configuration for the ScopeStack node and harness.
"""

# mypy: ignore-errors
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings."""

    CURRENT_ENV: str = "development"
    LOG_LEVEL: str = (
        "INFO"  # Default to INFO for development change to WARNING for production
    )

    # Application Agent Protocol endpoint used by `send`/`recv` when --aap is absent
    AAP_ADDRESS: str = "127.0.0.1:4242"

    # Management API of the node daemon
    HTTP_HOST: str = "127.0.0.1"
    HTTP_PORT: int = 8420

    # Bundle lifetimes in milliseconds
    DEFAULT_LIFETIME_MS: int = 3_600_000  # 1 hour
    BIBE_LIFETIME_MS: int = 86_400_000  # 24 hours, clamped to the inner bundle

    # Seconds between retries of a lost link or lower instance while bundles wait
    RETRY_INTERVAL: float = 5.0

    # Spill-to-disk bundle store, only used by instances with `spill = true`
    STORE_URL: str = "sqlite:///scopestack-store.db"

    # Scenario harness
    REPORT_DIR: str = "reports"
    SCENARIO_SEED: int = 2022
    LINK_DELAY: float = 0.005  # default one-way delay of emulated links (s)
    SEGMENT_SIZE: int = 65536  # emulated stream segment size (bytes)

    # Neighbor discovery
    BEACON_PERIOD: float = 1.0  # seconds
    BEACON_PORT: int = 3003

    # Upper bound for a single framed bundle on a stream link
    MAX_FRAME_SIZE: int = 64 * 1024 * 1024

    @property
    def IS_TEST(self) -> bool:
        """Whether the process runs under the test suite."""
        return self.CURRENT_ENV.lower() == "test"

    model_config = SettingsConfigDict(
        env_prefix="SCOPESTACK_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="allow",
    )


# Create a singleton instance
app_settings = Settings()
