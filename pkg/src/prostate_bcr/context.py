from collections.abc import Iterator
from contextlib import contextmanager
from contextvars import ContextVar

patient_id: ContextVar[str] = ContextVar("patient_id", default="")


@contextmanager
def patient_scope(pid: str) -> Iterator[None]:
    token = patient_id.set(pid)
    try:
        yield
    finally:
        patient_id.reset(token)
