import datetime as dt

import numpy as np
import pytest

from prostate_bcr.errors import MixedPatient, NegativeValue, TimelineError
from prostate_bcr.models import (
    CURATIVE,
    HTCT,
    RP,
    RT,
    PatientTimeline,
    Provenance,
    PsaMeasurement,
    TreatmentEvent,
    TreatmentKind,
)
from prostate_bcr.services import build_timeline, merge_treatments, timeline_query, without_imputed
from prostate_bcr.services.timeline import TimelineQuery, elapsed_days, first_date, last_date, second_date

D = dt.date


def psa(pid: str, date: dt.date, value: float) -> PsaMeasurement:
    return PsaMeasurement(patient_id=pid, date=date, value=value)


def test_build_timeline_sorts_rows():
    rows = [psa("P1", D(2015, 6, 1), 3.0), psa("P1", D(2015, 1, 1), 5.0), psa("P1", D(2015, 3, 1), 4.0)]
    t = build_timeline("P1", rows, [])
    assert [it.date for it in t.psa] == [D(2015, 1, 1), D(2015, 3, 1), D(2015, 6, 1)]
    assert t.dedup_count == 0


def test_build_timeline_drops_exact_duplicates():
    rows = [psa("P1", D(2015, 1, 1), 5.0), psa("P1", D(2015, 1, 1), 5.0)]
    t = build_timeline("P1", rows, [])
    assert len(t.psa) == 1
    assert t.dedup_count == 1


def test_build_timeline_keeps_same_day_values_in_input_order():
    rows = [psa("P1", D(2015, 2, 1), 7.0), psa("P1", D(2015, 1, 1), 5.0), psa("P1", D(2015, 2, 1), 6.0)]
    t = build_timeline("P1", rows, [])
    assert [it.value for it in t.psa] == [5.0, 7.0, 6.0]


def test_build_timeline_rejects_mixed_patients():
    with pytest.raises(MixedPatient):
        build_timeline("P1", [psa("P1", D(2015, 1, 1), 5.0), psa("P2", D(2015, 2, 1), 4.0)], [])
    with pytest.raises(MixedPatient):
        build_timeline("P1", [], [TreatmentEvent(patient_id="P2", date=D(2015, 1, 1), kind=TreatmentKind.RP)])


def test_negative_psa_value():
    with pytest.raises(NegativeValue):
        psa("P1", D(2015, 1, 1), -1.0)


def test_timeline_rejects_unsorted_treatments():
    events = (
        TreatmentEvent(patient_id="P1", date=D(2016, 1, 1), kind=TreatmentKind.RT),
        TreatmentEvent(patient_id="P1", date=D(2015, 1, 1), kind=TreatmentKind.RP),
    )
    with pytest.raises(TimelineError):
        PatientTimeline(patient_id="P1", treatments=events)


def test_build_timeline_is_idempotent(make_timeline):
    t = make_timeline(
        psa=[(D(2015, 3, 1), 4.0), (D(2015, 1, 1), 5.0)],
        txs=[(D(2015, 2, 1), TreatmentKind.RP)],
        diagnosis_date=D(2014, 12, 1),
        grade_group=3,
    )
    again = build_timeline(t.patient_id, t.psa, t.treatments, t.diagnosis_date, t.grade_group)
    assert again == t


def test_equality_ignores_dedup_count():
    rows = [psa("P1", D(2015, 1, 1), 5.0)]
    assert build_timeline("P1", rows * 2, []) == build_timeline("P1", rows, [])


def test_second_date(make_timeline):
    t = make_timeline(txs=[(D(2015, 3, 1), TreatmentKind.RT), (D(2017, 3, 1), TreatmentKind.RT)])
    assert timeline_query(t, TimelineQuery.second(RT)) == D(2017, 3, 1)
    assert second_date(make_timeline(txs=[(D(2015, 3, 1), TreatmentKind.RT)]), RT) is None


def test_first_date_after_is_strict(make_timeline):
    t = make_timeline(txs=[(D(2015, 12, 1), TreatmentKind.HT)])
    assert timeline_query(t, TimelineQuery.after(HTCT, D(2015, 6, 1), 365)) is None
    assert timeline_query(t, TimelineQuery.after(HTCT, D(2015, 6, 1), 183)) is None
    assert timeline_query(t, TimelineQuery.after(HTCT, D(2015, 6, 1), 183, strict=False)) == D(2015, 12, 1)


def test_exists_treats_ht_and_ct_as_one_kind(make_timeline):
    assert timeline_query(make_timeline(), TimelineQuery.any_of(HTCT)) is False
    t = make_timeline(txs=[(D(2016, 1, 1), TreatmentKind.CT)])
    assert timeline_query(t, TimelineQuery.any_of(HTCT)) is True
    assert timeline_query(t, TimelineQuery.first(HTCT)) == D(2016, 1, 1)


def test_query_rejects_negative_gap():
    with pytest.raises(ValueError):
        TimelineQuery.after(RT, D(2015, 1, 1), -1)


def test_first_second_last_are_ordered():
    rng = np.random.default_rng(3)
    kinds = list(TreatmentKind)
    for _ in range(200):
        n = int(rng.integers(0, 6))
        events = [
            TreatmentEvent(
                patient_id="P1",
                date=D(2010, 1, 1) + dt.timedelta(days=int(rng.integers(0, 4000))),
                kind=kinds[int(rng.integers(0, 4))],
            )
            for _ in range(n)
        ]
        t = build_timeline("P1", [], events)
        for ks in (RP, RT, HTCT, CURATIVE):
            first, second, last = first_date(t, ks), second_date(t, ks), last_date(t, ks)
            if second is not None:
                assert first is not None and last is not None
                assert first <= second <= last
            if first is not None:
                assert last is not None and first <= last


def test_elapsed_days():
    assert elapsed_days(D(2015, 1, 1), D(2015, 1, 1)) == 0
    assert elapsed_days(D(2015, 1, 1), D(2016, 1, 1)) == 365
    assert elapsed_days(D(2016, 1, 1), D(2015, 1, 1)) == -365


def test_elapsed_days_is_antisymmetric():
    rng = np.random.default_rng(0)
    base = D(2000, 1, 1)
    for a, b in rng.integers(0, 20_000, size=(10_000, 2)):
        x, y = base + dt.timedelta(days=int(a)), base + dt.timedelta(days=int(b))
        assert elapsed_days(x, y) == -elapsed_days(y, x)


def test_merge_and_strip_imputed(make_timeline):
    t = make_timeline(txs=[(D(2015, 1, 1), TreatmentKind.HT)])
    imputed = TreatmentEvent(patient_id="P1", date=D(2014, 6, 1), kind=TreatmentKind.RP, provenance=Provenance.Imputed)
    merged = merge_treatments(t, [imputed])
    assert [it.date for it in merged.treatments] == [D(2014, 6, 1), D(2015, 1, 1)]
    assert merged.is_treated()
    assert without_imputed(merged) == t
    assert merge_treatments(t, []) is t
