import datetime as dt
import time

import numpy as np
import pytest

from prostate_bcr.errors import UnsortedSeries, ZeroPeak
from prostate_bcr.models import PsaMeasurement
from prostate_bcr.services import detect_all_drops, detect_significant_drop, is_significant
from prostate_bcr.services.sigdrop import SignificanceTest

D = dt.date


def at(d0: dt.date, n: int) -> dt.date:
    return d0 + dt.timedelta(days=n)


def random_series(rng: np.random.Generator, n: int) -> list[PsaMeasurement]:
    days = np.cumsum(rng.integers(1, 200, size=n))
    values = np.round(rng.lognormal(1.0, 1.2, size=n), 3)
    base = D(2010, 1, 1)
    return [
        PsaMeasurement(patient_id="P1", date=base + dt.timedelta(days=int(d)), value=float(v))
        for d, v in zip(days, values)
    ]


def test_is_significant():
    assert is_significant(8.0, 2.0)
    assert not is_significant(6.0, 3.5)
    assert is_significant(10.0, 5.0)
    with pytest.raises(ZeroPeak):
        is_significant(0.0, 0.0)


def test_significance_test_keeps_interval():
    test = SignificanceTest.measure(8.0, 2.0, 30)
    assert (test.beta, test.alpha, test.delta_days, test.gamma_days) == (6.0, 0.75, 30, None)
    assert test.passes()
    assert not test.peak_is_stale()
    assert SignificanceTest.measure(8.0, 7.0, 30, 400).peak_is_stale()
    assert SignificanceTest.measure(8.0, 7.0, 400).peak_is_stale()


def test_drop_after_rise():
    psa = [
        PsaMeasurement(patient_id="P1", date=D(2015, 1, 1), value=5.0),
        PsaMeasurement(patient_id="P1", date=D(2015, 4, 1), value=6.0),
        PsaMeasurement(patient_id="P1", date=D(2015, 6, 1), value=0.05),
    ]
    drop = detect_significant_drop(psa)
    assert drop is not None
    assert drop.drop_date == D(2015, 4, 1)
    assert drop.nadir_date == D(2015, 6, 1)
    assert drop.psa_min == 0.05
    assert drop.peak_value == 6.0


def test_no_drop(d0, make_series):
    assert detect_significant_drop(make_series([(0, 4.0), (90, 5.0), (180, 6.0)])) is None
    assert detect_significant_drop(make_series([(0, 6.0), (60, 3.5)])) is None
    assert detect_significant_drop(make_series([(0, 6.0)])) is None
    assert detect_significant_drop([]) is None


def test_nadir_extends_over_non_increasing_run(d0, make_series):
    drop = detect_significant_drop(make_series([(0, 8.0), (90, 2.0), (150, 1.5)]))
    assert drop is not None
    assert drop.drop_date == d0
    assert drop.nadir_date == at(d0, 150)
    assert drop.psa_min == 1.5


def test_nadir_extension_stops_at_rise_and_window(d0, make_series):
    drop = detect_significant_drop(make_series([(0, 8.0), (90, 2.0), (150, 2.5), (200, 0.5)]))
    assert drop is not None
    assert drop.nadir_date == at(d0, 90)
    drop = detect_significant_drop(make_series([(0, 8.0), (90, 2.0), (300, 1.5), (500, 1.0)]))
    assert drop is not None
    # 500 is more than a year after the triggering measurement
    assert drop.nadir_date == at(d0, 300)


def test_same_day_decrease_is_not_a_drop(make_series):
    assert detect_significant_drop(make_series([(0, 10.0), (0, 1.0)])) is None


def test_stale_peak_resets(d0, make_series):
    drop = detect_significant_drop(make_series([(0, 10.0), (400, 9.0), (500, 2.0)]))
    assert drop is not None
    assert drop.drop_date == at(d0, 400)
    assert drop.peak_value == 9.0


def test_peak_resets_when_next_measurement_is_out_of_window(d0, make_series):
    drop = detect_significant_drop(make_series([(0, 10.0), (100, 8.0), (400, 1.0)]))
    assert drop is not None
    assert drop.drop_date == at(d0, 100)
    assert drop.peak_value == 8.0


def test_unsorted_series():
    psa = [
        PsaMeasurement(patient_id="P1", date=D(2015, 6, 1), value=5.0),
        PsaMeasurement(patient_id="P1", date=D(2015, 1, 1), value=6.0),
    ]
    with pytest.raises(UnsortedSeries):
        detect_significant_drop(psa)
    with pytest.raises(UnsortedSeries):
        detect_all_drops(psa)


def test_all_drops(d0, make_series):
    drops = detect_all_drops(make_series([(0, 8.0), (90, 1.0), (400, 6.0), (500, 0.5)]))
    assert [(it.drop_date, it.nadir_date) for it in drops] == [(d0, at(d0, 90)), (at(d0, 400), at(d0, 500))]
    assert detect_all_drops([]) == []


def test_single_drop_agrees_with_first_mode(make_series):
    psa = make_series([(0, 5.0), (90, 6.0), (150, 0.05), (240, 0.04)])
    assert detect_all_drops(psa) == [detect_significant_drop(psa)]


def test_drops_on_random_series():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        psa = random_series(rng, int(rng.integers(0, 30)))
        drops = detect_all_drops(psa)
        first = detect_significant_drop(psa)
        assert (drops[0] if drops else None) == first
        for drop in drops:
            assert drop.drop_date < drop.nadir_date
            assert is_significant(drop.peak_value, drop.psa_min)
            assert any(m.date == drop.drop_date and m.value == drop.peak_value for m in psa)
            assert any(m.date == drop.nadir_date and m.value == drop.psa_min for m in psa)
        for prev, curr in zip(drops, drops[1:]):
            assert prev.nadir_date < curr.drop_date


def _rising(n: int) -> list[PsaMeasurement]:
    base = D(1900, 1, 1)
    return [PsaMeasurement(patient_id="P1", date=base + dt.timedelta(days=i), value=1.0 + i) for i in range(n)]


def _sawtooth(n: int) -> list[PsaMeasurement]:
    base = D(1900, 1, 1)
    return [
        PsaMeasurement(patient_id="P1", date=base + dt.timedelta(days=30 * i), value=10.0 if i % 2 == 0 else 1.0)
        for i in range(n)
    ]


def _best_of(detect, psa: list[PsaMeasurement], repeat: int = 3) -> float:
    best = float("inf")
    for _ in range(repeat):
        started = time.perf_counter()
        detect(psa)
        best = min(best, time.perf_counter() - started)
    return best


def test_scan_time_is_linear():
    small, large = _rising(2_000), _rising(20_000)
    assert _best_of(detect_significant_drop, large) <= 15 * _best_of(detect_significant_drop, small) + 0.05


def test_repeated_drops_scan_in_linear_time():
    small, large = _sawtooth(2_000), _sawtooth(20_000)
    assert len(detect_all_drops(small)) == 1_000
    assert len(detect_all_drops(large)) == 10_000
    assert _best_of(detect_all_drops, large) <= 15 * _best_of(detect_all_drops, small) + 0.05
