from logging import Filter, LogRecord
from typing import Any

from .context import patient_id


class PatientIdFilter(Filter):
    def __init__(self, name: str = "", max_len: int | None = None) -> None:
        super().__init__(name)
        self._max_len = max_len

    def filter(self, record: LogRecord) -> bool:
        s = patient_id.get() or "-"
        if self._max_len:
            s = s[: self._max_len]
        record.patient_id = s
        return True


DEV_LOG_CFG: dict[str, Any] = {
    "version": 1,
    "disable_existing_loggers": False,
    "filters": {
        "patient_id": {
            "()": "prostate_bcr.logging.PatientIdFilter",
            "max_len": 12,
        },
    },
    "formatters": {
        "default": {
            "format": "%(levelname)-8s %(asctime)s %(message)s",
            "datefmt": "%H:%M:%S",
        },
        "debug": {
            "format": "%(levelname)-8s %(asctime)s %(patient_id)s %(name)s:%(lineno)d %(message)s",
            "datefmt": "%H:%M:%S",
        },
    },
    "handlers": {
        "default": {
            "filters": ["patient_id"],
            "formatter": "default",
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
        },
        "debug": {
            "filters": ["patient_id"],
            "formatter": "debug",
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
        },
    },
    "loggers": {
        "prostate_bcr": {"handlers": ["default"], "level": "INFO", "propagate": False},
        "prostate_bcr.services": {"handlers": ["debug"], "level": "WARNING", "propagate": False},
    },
}


def verbose_log_cfg() -> dict[str, Any]:
    cfg = {**DEV_LOG_CFG, "loggers": {k: dict(v) for k, v in DEV_LOG_CFG["loggers"].items()}}
    cfg["loggers"]["prostate_bcr.services"]["level"] = "DEBUG"
    return cfg
