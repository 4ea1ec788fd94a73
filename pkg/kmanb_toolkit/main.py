import sys
from pathlib import Path

from dotenv import find_dotenv, load_dotenv
from loguru import logger
from pydantic import BaseSettings, Field


class Settings(BaseSettings):
    """Run-wide defaults, overridable through `KMANB_*` environment
    variables or a `.env` file."""

    log_dir: Path = Path("logs")
    log_level: str = "INFO"
    log_serialize: bool = True
    seed: int = 42
    split_fraction: float = Field(0.7, gt=0, lt=1)
    suite_timeout: float | None = Field(None, gt=0)

    class Config:
        env_prefix = "KMANB_"


def get_settings() -> Settings:
    load_dotenv(find_dotenv(usecwd=True))
    return Settings()


def configure_logging(settings: Settings):
    """Errors go to `error.log`, warnings as JSON lines to `warnings.log`,
    and everything from `log_level` up to stderr."""
    settings.log_dir.mkdir(parents=True, exist_ok=True)
    logger.configure(
        handlers=[
            {
                "sink": settings.log_dir / "error.log",
                "format": "{message}",
                "level": "ERROR",
            },
            {
                "sink": settings.log_dir / "warnings.log",
                "format": "{message}",
                "level": "WARNING",
                "serialize": True,
            },
            {
                "sink": sys.stderr,
                "format": "{message}",
                "level": settings.log_level,
                "serialize": settings.log_serialize,
            },
        ]
    )
