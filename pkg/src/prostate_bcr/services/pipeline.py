import logging
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from functools import partial

from ..context import patient_scope
from ..models import PatientTimeline

logger = logging.getLogger(__name__)


def _scoped[R](fn: Callable[[PatientTimeline], R], t: PatientTimeline) -> R:
    with patient_scope(t.patient_id):
        return fn(t)


class PatientRunner:
    """Maps a per-patient function over a cohort, keeping results in cohort order."""

    def __init__(self, workers: int = 1, chunksize: int = 64) -> None:
        self._workers = workers
        self._chunksize = chunksize

    @property
    def workers(self) -> int:
        return self._workers

    def map[R](self, fn: Callable[[PatientTimeline], R], cohort: Sequence[PatientTimeline]) -> list[R]:
        started = time.perf_counter()
        if self._workers <= 1 or len(cohort) < 2 * self._chunksize:
            results = [_scoped(fn, t) for t in cohort]
        else:
            # fn must be picklable: a module-level function or a partial of one
            with ProcessPoolExecutor(self._workers) as pool:
                results = list(pool.map(partial(_scoped, fn), cohort, chunksize=self._chunksize))
        logger.debug("mapped %d patients in %.3fs", len(cohort), time.perf_counter() - started)
        return results


SERIAL = PatientRunner()
