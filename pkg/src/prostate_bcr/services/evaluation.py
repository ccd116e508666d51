import logging
import math
from collections import Counter
from collections.abc import Sequence

import numpy as np

from ..errors import MissingTruth
from ..models import (
    DEFAULT_THRESHOLDS,
    BcrEvent,
    BcrMetrics,
    BcrSource,
    DetectedTreatment,
    DropMode,
    DtxCounts,
    DtxMetrics,
    DtxMode,
    GroundTruth,
    PatientTimeline,
    Provenance,
    RelapseSummary,
    Thresholds,
    TimeToRelapseReport,
    TreatmentEvent,
    TreatmentKind,
)
from .bcr import DEFAULT_OPTIONS, BcrOptions, detect_bcr_cohort, timeline_view
from .dtx import detect_missing_treatments
from .pipeline import SERIAL, PatientRunner

logger = logging.getLogger(__name__)

BUCKET_DAYS = 183
HORIZON_DAYS = 3650


def _recorded_curative(t: PatientTimeline) -> list[TreatmentEvent]:
    return [it for it in t.treatments if it.kind.is_curative() and it.provenance == Provenance.Recorded]


def match_detection(t: PatientTimeline, detection: DetectedTreatment) -> TreatmentEvent | None:
    """Earliest recorded curative treatment dated inside the detection's drop-to-nadir window."""
    for it in _recorded_curative(t):
        if detection.date <= it.date <= detection.nadir_date:
            return it
    return None


class _DtxTally:
    def __init__(self) -> None:
        self.available: Counter[TreatmentKind] = Counter()
        self.true_class: Counter[TreatmentKind] = Counter()
        self.false_class: Counter[TreatmentKind] = Counter()
        self.new: Counter[TreatmentKind] = Counter()

    def counts(self, kinds: Sequence[TreatmentKind]) -> DtxCounts:
        def total(c: Counter[TreatmentKind]) -> int:
            return sum(c[k] for k in kinds)

        true_class, false_class, new = total(self.true_class), total(self.false_class), total(self.new)
        return DtxCounts(
            available_ctx=total(self.available),
            estimated_ctx=true_class + false_class + new,
            matched=true_class + false_class,
            true_class=true_class,
            false_class=false_class,
            new_estimated=new,
        )


def evaluate_dtx(
    cohort: Sequence[PatientTimeline],
    th: Thresholds = DEFAULT_THRESHOLDS,
    drop_mode: DropMode = DropMode.First,
    runner: PatientRunner = SERIAL,
) -> DtxMetrics:
    """Run detection in evaluate mode and compare with the recorded curative treatments.

    Matched detections are tallied under the recorded treatment's kind, unmatched ones under the
    detected kind.
    """
    tally = _DtxTally()
    by_id = {t.patient_id: t for t in cohort}
    for t in cohort:
        tally.available.update(it.kind for it in _recorded_curative(t))
    for det in detect_missing_treatments(cohort, DtxMode.Evaluate, drop_mode, th, runner):
        recorded = match_detection(by_id[det.patient_id], det)
        if recorded is None:
            tally.new[det.kind] += 1
        elif recorded.kind == det.kind:
            tally.true_class[recorded.kind] += 1
        else:
            tally.false_class[recorded.kind] += 1
    metrics = DtxMetrics(
        overall=tally.counts([TreatmentKind.RP, TreatmentKind.RT]),
        rp=tally.counts([TreatmentKind.RP]),
        rt=tally.counts([TreatmentKind.RT]),
    )
    logger.info(
        "dtx: %d of %d recorded treatments matched, %d new",
        metrics.overall.matched,
        metrics.overall.available_ctx,
        metrics.overall.new_estimated,
    )
    return metrics


def evaluate_recovery(
    cohort: Sequence[PatientTimeline],
    truth: GroundTruth,
    th: Thresholds = DEFAULT_THRESHOLDS,
    drop_mode: DropMode = DropMode.First,
    runner: PatientRunner = SERIAL,
) -> DtxCounts:
    """Score impute-mode detections against the primary treatments that were masked out of the records.

    Each masked truth record can be matched once, by the first detection whose window holds its date.
    """
    records = truth.by_patient()
    pending = {pid: it for pid, it in records.items() if it.masked}
    true_class = false_class = new = 0
    for det in detect_missing_treatments(cohort, DtxMode.Impute, drop_mode, th, runner):
        record = pending.get(det.patient_id)
        if record is None or not det.date <= record.treatment_date <= det.nadir_date:
            new += 1
            continue
        del pending[det.patient_id]
        if record.treatment_kind == det.kind:
            true_class += 1
        else:
            false_class += 1
    counts = DtxCounts(
        available_ctx=sum(1 for it in records.values() if it.masked),
        estimated_ctx=true_class + false_class + new,
        matched=true_class + false_class,
        true_class=true_class,
        false_class=false_class,
        new_estimated=new,
    )
    logger.info("recovered %d of %d masked treatments", counts.matched, counts.available_ctx)
    return counts


def summarize_bcr(events: Sequence[BcrEvent], treated_patients: int) -> BcrMetrics:
    by_source = {it: 0 for it in BcrSource}
    for ev in events:
        by_source[ev.source] += 1
    return BcrMetrics(treated_patients=treated_patients, detected=len(events), by_source=by_source)


def evaluate_bcr(
    cohort: Sequence[PatientTimeline],
    truth: GroundTruth | None = None,
    options: BcrOptions = DEFAULT_OPTIONS,
    th: Thresholds = DEFAULT_THRESHOLDS,
    runner: PatientRunner = SERIAL,
) -> BcrMetrics:
    records = truth.by_patient() if truth is not None else None
    if records is not None:
        for t in cohort:
            if t.patient_id not in records:
                raise MissingTruth(t.patient_id)
    events = detect_bcr_cohort(cohort, options, th, runner)
    summary = summarize_bcr(events, sum(1 for t in cohort if timeline_view(t, options).is_treated()))
    if records is None:
        return summary

    detected = {ev.patient_id: ev for ev in events}
    tp = fp = misses = 0
    errors: list[int] = []
    for t in cohort:
        record = records[t.patient_id]
        ev = detected.get(t.patient_id)
        hit = False
        if ev is not None:
            if record.relapse_date is not None:
                err = abs((ev.bcr_date - record.relapse_date).days)
                errors.append(err)
                hit = err <= th.bcr_tolerance_days
            if hit:
                tp += 1
            else:
                fp += 1
        if record.relapse and not hit:
            misses += 1
    metrics = BcrMetrics(
        treated_patients=summary.treated_patients,
        detected=summary.detected,
        by_source=summary.by_source,
        true_positives=tp,
        false_positives=fp,
        misses=misses,
        median_date_error_days=float(np.median(errors)) if errors else None,
    )
    logger.info("bcr vs truth: tp=%d fp=%d misses=%d", tp, fp, misses)
    return metrics


def _histogram(days: Sequence[int], n_buckets: int, bucket_days: int) -> tuple[int, ...]:
    if not days:
        return (0,) * n_buckets
    idx = np.asarray(days, dtype=np.int64) // bucket_days
    return tuple(int(n) for n in np.bincount(idx, minlength=n_buckets))


def _summary(group: str, days: Sequence[int]) -> RelapseSummary:
    if not days:
        return RelapseSummary(group=group, count=0, median_days=None, q1_days=None, q3_days=None)
    q1, median, q3 = np.percentile(np.asarray(days, dtype=np.float64), [25, 50, 75])
    return RelapseSummary(group=group, count=len(days), median_days=float(median), q1_days=float(q1), q3_days=float(q3))


def time_to_relapse_report(
    events: Sequence[BcrEvent],
    cohort: Sequence[PatientTimeline],
    bucket_days: int = BUCKET_DAYS,
    horizon_days: int = HORIZON_DAYS,
) -> TimeToRelapseReport:
    """Bucketed time-to-relapse counts, overall and per grade group when any relapsing patient has one.

    The histogram covers at least ``horizon_days`` and is extended to hold the longest time to relapse.
    """
    grade = {t.patient_id: t.grade_group for t in cohort}
    days = [ev.time_to_relapse_days for ev in events]
    n_buckets = max(math.ceil(horizon_days / bucket_days), max(days, default=0) // bucket_days + 1, 1)
    overall = _histogram(days, n_buckets, bucket_days)
    summaries = [_summary("all", days)]

    by_grade_group: dict[int, tuple[int, ...]] | None = None
    if any(grade.get(ev.patient_id) is not None for ev in events):
        by_grade_group = {}
        for gg in range(1, 6):
            gg_days = [ev.time_to_relapse_days for ev in events if grade.get(ev.patient_id) == gg]
            by_grade_group[gg] = _histogram(gg_days, n_buckets, bucket_days)
            summaries.append(_summary(f"GG{gg}", gg_days))
    return TimeToRelapseReport(
        bucket_days=bucket_days,
        overall=overall,
        by_grade_group=by_grade_group,
        summaries=tuple(summaries),
    )
