import logging
from collections.abc import Sequence
from functools import partial

from pydantic import BaseModel, ConfigDict

from ..models import CURATIVE, DEFAULT_THRESHOLDS, BcrCandidates, BcrEvent, PatientTimeline, Thresholds
from .pipeline import SERIAL, PatientRunner
from .relapse import crp, crt, prp, prt
from .timeline import elapsed_days, first_date, without_imputed

logger = logging.getLogger(__name__)


class BcrOptions(BaseModel):
    model_config = ConfigDict(frozen=True)
    psa_only: bool = False
    include_imputed: bool = True
    crt_clause_d: bool = True


DEFAULT_OPTIONS = BcrOptions()


def timeline_view(t: PatientTimeline, options: BcrOptions) -> PatientTimeline:
    return t if options.include_imputed else without_imputed(t)


def bcr_candidates(
    t: PatientTimeline, options: BcrOptions = DEFAULT_OPTIONS, th: Thresholds = DEFAULT_THRESHOLDS
) -> BcrCandidates:
    t = timeline_view(t, options)
    return BcrCandidates(
        d1=prp(t, th),
        d2=None if options.psa_only else crp(t, th),
        d3=prt(t, th),
        d4=None if options.psa_only else crt(t, th, options.crt_clause_d),
    )


def detect_bcr(
    t: PatientTimeline, options: BcrOptions = DEFAULT_OPTIONS, th: Thresholds = DEFAULT_THRESHOLDS
) -> BcrEvent | None:
    anchor = first_date(timeline_view(t, options), CURATIVE)
    if anchor is None:
        return None
    earliest = bcr_candidates(t, options, th).earliest()
    if earliest is None:
        return None
    bcr_date, source = earliest
    logger.debug("relapse on %s via %s", bcr_date, source.value)
    return BcrEvent(
        patient_id=t.patient_id,
        bcr_date=bcr_date,
        source=source,
        time_to_relapse_days=elapsed_days(anchor, bcr_date),
    )


def detect_bcr_cohort(
    cohort: Sequence[PatientTimeline],
    options: BcrOptions = DEFAULT_OPTIONS,
    th: Thresholds = DEFAULT_THRESHOLDS,
    runner: PatientRunner = SERIAL,
) -> list[BcrEvent]:
    treated = [t for t in cohort if timeline_view(t, options).is_treated()]
    events = [it for it in runner.map(partial(detect_bcr, options=options, th=th), treated) if it is not None]
    logger.info("%d of %d treated patients relapsed (psa_only=%s)", len(events), len(treated), options.psa_only)
    return events
