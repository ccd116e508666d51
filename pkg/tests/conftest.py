import datetime as dt
from collections.abc import Callable, Sequence
from pathlib import Path

import numpy as np
import pytest

from prostate_bcr.models import (
    Assay,
    GroundTruth,
    PatientTimeline,
    PsaMeasurement,
    SynthConfig,
    TreatmentEvent,
    TreatmentKind,
)
from prostate_bcr.services import build_timeline, generate_cohort, write_cohort

type PsaSpec = tuple[dt.date, float] | tuple[dt.date, float, Assay]
type TxSpec = tuple[dt.date, TreatmentKind]
type MakeTimeline = Callable[..., PatientTimeline]
type MakeSeries = Callable[[Sequence[tuple[int, float]]], list[PsaMeasurement]]

D0 = dt.date(2015, 1, 1)


def day(n: int) -> dt.date:
    return D0 + dt.timedelta(days=n)


@pytest.fixture
def d0() -> dt.date:
    return D0


@pytest.fixture
def make_timeline() -> MakeTimeline:
    def factory(
        psa: Sequence[PsaSpec] = (),
        txs: Sequence[TxSpec] = (),
        pid: str = "P1",
        diagnosis_date: dt.date | None = None,
        grade_group: int | None = None,
    ) -> PatientTimeline:
        rows = [
            PsaMeasurement(patient_id=pid, date=it[0], value=it[1], assay=it[2] if len(it) == 3 else Assay.Standard)
            for it in psa
        ]
        events = [TreatmentEvent(patient_id=pid, date=d, kind=k) for d, k in txs]
        return build_timeline(pid, rows, events, diagnosis_date, grade_group)

    return factory


@pytest.fixture
def make_series() -> MakeSeries:
    """PSA series from (day offset, value) pairs."""

    def factory(points: Sequence[tuple[int, float]]) -> list[PsaMeasurement]:
        return [PsaMeasurement(patient_id="P1", date=day(n), value=v) for n, v in points]

    return factory


@pytest.fixture(scope="session")
def synth_cohort() -> tuple[list[PatientTimeline], GroundTruth]:
    return generate_cohort(SynthConfig(n_patients=200, seed=11, p_secondary=0.5, p_recurrence=0.5))


@pytest.fixture
def cohort_dir(tmp_path: Path, synth_cohort: tuple[list[PatientTimeline], GroundTruth]) -> Path:
    cohort, truth = synth_cohort
    write_cohort(cohort, truth, tmp_path / "cohort")
    return tmp_path / "cohort"


@pytest.fixture(scope="session")
def fuzz_corpus() -> list[PatientTimeline]:
    """Random timelines: up to 4 treatments of any kind and up to 24 PSA draws of either assay."""
    rng = np.random.default_rng(1234)
    kinds = list(TreatmentKind)
    assays = list(Assay)
    base = dt.date(2012, 1, 1)
    corpus: list[PatientTimeline] = []
    for i in range(1000):
        pid = f"F{i}"
        txs = [
            TreatmentEvent(
                patient_id=pid,
                date=base + dt.timedelta(days=int(rng.integers(0, 2500))),
                kind=kinds[int(rng.integers(0, len(kinds)))],
            )
            for _ in range(int(rng.integers(0, 5)))
        ]
        psa = [
            PsaMeasurement(
                patient_id=pid,
                date=base + dt.timedelta(days=int(rng.integers(0, 3000))),
                value=round(float(rng.lognormal(-0.5, 1.3)), 3),
                assay=assays[int(rng.integers(0, len(assays)))],
            )
            for _ in range(int(rng.integers(0, 25)))
        ]
        corpus.append(build_timeline(pid, psa, txs))
    return corpus
