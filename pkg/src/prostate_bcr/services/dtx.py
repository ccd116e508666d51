import datetime as dt
import logging
from collections.abc import Sequence
from functools import partial
from typing import assert_never

from ..errors import InvalidWindow
from ..models import (
    DEFAULT_THRESHOLDS,
    DetectedTreatment,
    DropMode,
    DtxMode,
    PatientTimeline,
    Provenance,
    PsaMeasurement,
    SignificantDrop,
    Thresholds,
    TreatmentKind,
)
from .pipeline import SERIAL, PatientRunner
from .sigdrop import detect_all_drops, detect_significant_drop
from .timeline import merge_treatments

logger = logging.getLogger(__name__)


def classify_drop(psa_min: float, th: Thresholds = DEFAULT_THRESHOLDS) -> TreatmentKind:
    return TreatmentKind.RP if psa_min < th.rp_nadir_max else TreatmentKind.RT


def curative_treatment_in_window(t: PatientTimeline, d_start: dt.date, d_end: dt.date) -> bool:
    if d_start > d_end:
        raise InvalidWindow(d_start, d_end)
    return any(
        it.kind.is_curative() and it.provenance == Provenance.Recorded and d_start <= it.date <= d_end
        for it in t.treatments
    )


def psa_since_diagnosis(t: PatientTimeline) -> Sequence[PsaMeasurement]:
    if t.diagnosis_date is None:
        return t.psa
    diagnosed = t.diagnosis_date
    return [it for it in t.psa if it.date >= diagnosed]


def _drops(t: PatientTimeline, drop_mode: DropMode, th: Thresholds) -> list[SignificantDrop]:
    psa = psa_since_diagnosis(t)
    match drop_mode:
        case DropMode.First:
            drop = detect_significant_drop(psa, th)
            return [drop] if drop is not None else []
        case DropMode.All:
            return detect_all_drops(psa, th)
        case _:
            assert_never(drop_mode)


def detect_for_patient(
    t: PatientTimeline,
    mode: DtxMode = DtxMode.Impute,
    drop_mode: DropMode = DropMode.First,
    th: Thresholds = DEFAULT_THRESHOLDS,
) -> list[DetectedTreatment]:
    found: list[DetectedTreatment] = []
    for drop in _drops(t, drop_mode, th):
        if mode == DtxMode.Impute and curative_treatment_in_window(t, drop.drop_date, drop.nadir_date):
            logger.debug("drop on %s explained by a recorded treatment", drop.drop_date)
            continue
        kind = classify_drop(drop.psa_min, th)
        found.append(
            DetectedTreatment(
                patient_id=t.patient_id,
                kind=kind,
                date=drop.drop_date,
                nadir_date=drop.nadir_date,
                psa_min=drop.psa_min,
            )
        )
    return found


def detect_missing_treatments(
    cohort: Sequence[PatientTimeline],
    mode: DtxMode = DtxMode.Impute,
    drop_mode: DropMode = DropMode.First,
    th: Thresholds = DEFAULT_THRESHOLDS,
    runner: PatientRunner = SERIAL,
) -> list[DetectedTreatment]:
    per_patient = runner.map(partial(detect_for_patient, mode=mode, drop_mode=drop_mode, th=th), cohort)
    detections = [it for found in per_patient for it in found]
    logger.info("%s mode: %d treatments detected in %d patients", mode.value, len(detections), len(cohort))
    return detections


def impute_cohort(
    cohort: Sequence[PatientTimeline],
    drop_mode: DropMode = DropMode.First,
    th: Thresholds = DEFAULT_THRESHOLDS,
    runner: PatientRunner = SERIAL,
) -> list[PatientTimeline]:
    detections = detect_missing_treatments(cohort, DtxMode.Impute, drop_mode, th, runner)
    by_patient: dict[str, list[DetectedTreatment]] = {}
    for it in detections:
        by_patient.setdefault(it.patient_id, []).append(it)
    return [merge_treatments(t, (d.to_event() for d in by_patient.get(t.patient_id, []))) for t in cohort]
