import datetime as dt
import logging
from collections.abc import Iterable
from enum import Enum
from typing import Annotated, Self, assert_never

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..errors import MixedPatient, NegativeValue
from ..models import KindSet, PatientTimeline, Provenance, PsaMeasurement, TreatmentEvent

logger = logging.getLogger(__name__)


def elapsed_days(a: dt.date, b: dt.date) -> int:
    return (b - a).days


def _dedup[T](rows: Iterable[T]) -> tuple[list[T], int]:
    seen: set[T] = set()
    kept: list[T] = []
    dups = 0
    for row in rows:
        if row in seen:
            dups += 1
            continue
        seen.add(row)
        kept.append(row)
    return kept, dups


def build_timeline(
    patient_id: str,
    psa_rows: Iterable[PsaMeasurement],
    tx_rows: Iterable[TreatmentEvent],
    diagnosis_date: dt.date | None = None,
    grade_group: int | None = None,
) -> PatientTimeline:
    psa, psa_dups = _dedup(psa_rows)
    txs, tx_dups = _dedup(tx_rows)
    for row in (*psa, *txs):
        if row.patient_id != patient_id:
            raise MixedPatient(patient_id, row.patient_id)
    for it in psa:
        if it.value < 0:
            raise NegativeValue(patient_id, it.date, it.value)
    # sorted() is stable, same-day rows keep their input order
    psa.sort(key=lambda it: it.date)
    txs.sort(key=lambda it: it.date)
    if psa_dups or tx_dups:
        logger.debug("%s: dropped %d duplicate PSA and %d duplicate treatment rows", patient_id, psa_dups, tx_dups)
    return PatientTimeline(
        patient_id=patient_id,
        psa=tuple(psa),
        treatments=tuple(txs),
        diagnosis_date=diagnosis_date,
        grade_group=grade_group,
        dedup_count=psa_dups + tx_dups,
    )


def merge_treatments(t: PatientTimeline, extra: Iterable[TreatmentEvent]) -> PatientTimeline:
    added = list(extra)
    if not added:
        return t
    merged = sorted((*t.treatments, *added), key=lambda it: it.date)
    return t.model_copy(update={"treatments": tuple(merged)})


def without_imputed(t: PatientTimeline) -> PatientTimeline:
    kept = tuple(it for it in t.treatments if it.provenance == Provenance.Recorded)
    if len(kept) == len(t.treatments):
        return t
    return t.model_copy(update={"treatments": kept})


def dates_of(t: PatientTimeline, kinds: KindSet) -> list[dt.date]:
    return [it.date for it in t.treatments if it.kind in kinds]


def first_date(t: PatientTimeline, kinds: KindSet) -> dt.date | None:
    for it in t.treatments:
        if it.kind in kinds:
            return it.date
    return None


def last_date(t: PatientTimeline, kinds: KindSet) -> dt.date | None:
    for it in reversed(t.treatments):
        if it.kind in kinds:
            return it.date
    return None


def second_date(t: PatientTimeline, kinds: KindSet) -> dt.date | None:
    days = dates_of(t, kinds)
    return days[1] if len(days) >= 2 else None


def first_date_after(
    t: PatientTimeline, kinds: KindSet, anchor: dt.date, min_gap_days: int, strict: bool = True
) -> dt.date | None:
    for it in t.treatments:
        if it.kind not in kinds:
            continue
        gap = elapsed_days(anchor, it.date)
        if (gap > min_gap_days) if strict else (gap >= min_gap_days):
            return it.date
    return None


def exists(t: PatientTimeline, kinds: KindSet) -> bool:
    return any(it.kind in kinds for it in t.treatments)


class QueryKind(Enum):
    FirstDate = "first_date"
    LastDate = "last_date"
    SecondDate = "second_date"
    FirstDateAfter = "first_date_after"
    Exists = "exists"


class TimelineQuery(BaseModel):
    model_config = ConfigDict(frozen=True)
    kind: QueryKind
    kinds: KindSet
    anchor: dt.date | None = None
    min_gap_days: Annotated[int, Field(ge=0)] = 0
    strict: bool = True

    @model_validator(mode="after")
    def check(self) -> Self:
        assert (self.anchor is not None) == (self.kind == QueryKind.FirstDateAfter)
        assert self.kinds
        return self

    @classmethod
    def first(cls, kinds: KindSet) -> "TimelineQuery":
        return cls(kind=QueryKind.FirstDate, kinds=kinds)

    @classmethod
    def last(cls, kinds: KindSet) -> "TimelineQuery":
        return cls(kind=QueryKind.LastDate, kinds=kinds)

    @classmethod
    def second(cls, kinds: KindSet) -> "TimelineQuery":
        return cls(kind=QueryKind.SecondDate, kinds=kinds)

    @classmethod
    def after(cls, kinds: KindSet, anchor: dt.date, min_gap_days: int, strict: bool = True) -> "TimelineQuery":
        return cls(kind=QueryKind.FirstDateAfter, kinds=kinds, anchor=anchor, min_gap_days=min_gap_days, strict=strict)

    @classmethod
    def any_of(cls, kinds: KindSet) -> "TimelineQuery":
        return cls(kind=QueryKind.Exists, kinds=kinds)


def timeline_query(t: PatientTimeline, q: TimelineQuery) -> dt.date | bool | None:
    match q.kind:
        case QueryKind.FirstDate:
            return first_date(t, q.kinds)
        case QueryKind.LastDate:
            return last_date(t, q.kinds)
        case QueryKind.SecondDate:
            return second_date(t, q.kinds)
        case QueryKind.FirstDateAfter:
            assert q.anchor is not None
            return first_date_after(t, q.kinds, q.anchor, q.min_gap_days, q.strict)
        case QueryKind.Exists:
            return exists(t, q.kinds)
        case _:
            assert_never(q.kind)
