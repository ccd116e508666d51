import datetime as dt
import logging
from dataclasses import dataclass
from typing import assert_never

from ..models import DEFAULT_THRESHOLDS, HTCT, RP, RT, Assay, PatientTimeline, Thresholds
from .timeline import elapsed_days, first_date, first_date_after, last_date, second_date

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class RelapseScan:
    threshold: float
    nadir: float = 0.0
    increase: float = 0.0


def psa_threshold(assay: Assay, th: Thresholds = DEFAULT_THRESHOLDS) -> float:
    match assay:
        case Assay.Ultrasensitive:
            return th.prp_threshold_ultrasensitive
        case Assay.Standard:
            return th.prp_threshold
        case _:
            assert_never(assay)


def prp(t: PatientTimeline, th: Thresholds = DEFAULT_THRESHOLDS) -> dt.date | None:
    rp = first_date(t, RP)
    if rp is None:
        return None
    for m in t.psa:
        if m.date <= rp:
            continue
        if m.value > psa_threshold(m.assay, th):
            return m.date
    return None


def prt(t: PatientTimeline, th: Thresholds = DEFAULT_THRESHOLDS) -> dt.date | None:
    rt = first_date(t, RT)
    if rt is None:
        return None
    post = [m for m in t.psa if m.date > rt]
    if not post:
        return None
    scan = RelapseScan(threshold=th.prt_rise, nadir=max(m.value for m in post))
    for m in post:
        if scan.nadir > m.value:
            scan.nadir = m.value
        scan.increase = m.value - scan.nadir
        if scan.increase > scan.threshold:
            return m.date
    return None


def crp(t: PatientTimeline, th: Thresholds = DEFAULT_THRESHOLDS) -> dt.date | None:
    rp = first_date(t, RP)
    if rp is None:
        return None
    found: list[dt.date] = []
    last_rt = last_date(t, RT)
    last_htct = last_date(t, HTCT)
    if last_rt is not None and last_rt > rp:
        if elapsed_days(rp, last_rt) > th.one_year_days:
            if (d := first_date_after(t, RT, rp, th.one_year_days)) is not None:
                found.append(d)
        # guarded on two years, but the candidate is the first HT/CT after one year
        if last_htct is not None and last_htct > rp and elapsed_days(rp, last_htct) >= th.two_years_days:
            if (d := first_date_after(t, HTCT, rp, th.one_year_days)) is not None:
                found.append(d)
    elif last_htct is not None and last_htct > rp:
        if (d := first_date_after(t, HTCT, rp, 0)) is not None:
            found.append(d)
    return min(found, default=None)


def crt(t: PatientTimeline, th: Thresholds = DEFAULT_THRESHOLDS, clause_d: bool = True) -> dt.date | None:
    rt = first_date(t, RT)
    if rt is None:
        return None
    found: list[dt.date] = []
    last_rp = last_date(t, RP)
    if last_rp is not None and last_rp > rt:
        if (d := first_date_after(t, RP, rt, 0)) is not None:
            found.append(d)
    second_rt = second_date(t, RT)
    if second_rt is not None and elapsed_days(rt, second_rt) > th.one_year_days:
        found.append(second_rt)
    first_htct = first_date(t, HTCT)
    if first_htct is not None and elapsed_days(rt, first_htct) >= th.six_months_days:
        found.append(first_htct)
    # subsumed by the clause above with the default gaps
    if clause_d and first_htct is not None and elapsed_days(rt, first_htct) > th.three_years_days:
        found.append(first_htct)
    return min(found, default=None)
