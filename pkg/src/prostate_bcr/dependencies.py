from pathlib import Path

from dotenv import dotenv_values
from pydantic import ValidationError

from .errors import InvalidConfig, IoError
from .models import Settings, Thresholds
from .services import PatientRunner

settings: Settings | None = None


def get_or_create_settings() -> Settings:
    global settings
    if settings is None:
        settings = Settings()
    return settings


def load_thresholds(base: Thresholds, config_file: Path | None = None) -> Thresholds:
    """Overlay `name=value` lines from the config file on `base`. Names may carry the `threshold.` prefix."""
    if config_file is None:
        return base
    if not config_file.is_file():
        raise IoError(config_file, "no such file")
    overrides: dict[str, str] = {}
    for key, val in dotenv_values(config_file).items():
        name = key.removeprefix("threshold.")
        if val is None:
            raise InvalidConfig(f"{config_file}: {key!r} has no value")
        overrides[name] = val
    try:
        return Thresholds.model_validate(base.model_dump() | overrides)
    except ValidationError as exc:
        raise InvalidConfig(f"{config_file}: {exc}") from exc


def create_runner(settings: Settings, workers: int | None = None) -> PatientRunner:
    return PatientRunner(workers if workers is not None else settings.workers)
