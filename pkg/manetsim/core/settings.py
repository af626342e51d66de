"""Process-level settings for the simulator service and CLI"""

from functools import lru_cache
from typing import List, Optional

from pydantic_settings import BaseSettings, SettingsConfigDict

from .models import SignerKind


class Settings(BaseSettings):
    """Application settings, read from MANETSIM_* environment variables or .env"""

    model_config = SettingsConfigDict(
        env_file=".env", env_prefix="MANETSIM_", case_sensitive=False, extra="ignore"
    )

    # Server
    host: str = "0.0.0.0"
    port: int = 8000
    dashboard_url: str = "http://localhost:5173"

    # Output
    output_dir: str = "out"
    temp_dir: Optional[str] = None
    max_upload_size: int = 10  # MB

    # Runs
    max_workers: int = 1
    max_stored_runs: int = 32

    # Certificates and introducer replies: hmac or ed25519
    signer: SignerKind = SignerKind.HMAC

    # Logging
    log_level: str = "WARNING"

    environment: str = "production"

    @property
    def cors_origins(self) -> List[str]:
        """Origins allowed by CORS"""
        return [self.dashboard_url, self.dashboard_url.replace("localhost", "127.0.0.1")]

    @property
    def is_development(self) -> bool:
        return self.environment == "development"


@lru_cache()
def get_settings() -> Settings:
    """Settings singleton"""
    return Settings()


settings = get_settings()
