import datetime as dt
import logging
import math
from collections.abc import Sequence

import numpy as np

from ..models import (
    Assay,
    GroundTruth,
    PatientTimeline,
    PsaMeasurement,
    RelapseMechanism,
    SynthConfig,
    TreatmentEvent,
    TreatmentKind,
    TruthRecord,
)
from .timeline import build_timeline

logger = logging.getLogger(__name__)

EPOCH = dt.date(2008, 1, 1)
GRADE_GROUPS = np.array([1, 2, 3, 4, 5])
GRADE_GROUP_P = np.array([0.30, 0.27, 0.20, 0.10, 0.13])
RELAPSE_DOUBLING_DAYS = 180.0
# guideline thresholds the generated relapse trajectories are built to cross
PRP_THRESHOLD = {Assay.Standard: 0.4, Assay.Ultrasensitive: 0.2}
PRT_RISE = 2.0


def _days(d: dt.date, n: int) -> dt.date:
    return d + dt.timedelta(days=n)


class _PatientBuilder:
    def __init__(self, idx: int, rng: np.random.Generator, cfg: SynthConfig) -> None:
        self._rng = rng
        self._cfg = cfg
        self.pid = f"P{idx + 1:05d}"
        self.draws: list[tuple[dt.date, float, Assay]] = []
        self.treatments: list[TreatmentEvent] = []

    def gap(self) -> int:
        mean = self._cfg.sampling_interval_days
        return max(14, round(mean * self._rng.uniform(0.7, 1.3)))

    def draw(self, day: dt.date, clean: float, assay: Assay = Assay.Standard) -> float:
        value = round(max(clean, 0.001), 3)
        self.draws.append((day, value, assay))
        return value

    def treat(self, day: dt.date, kind: TreatmentKind) -> None:
        self.treatments.append(TreatmentEvent(patient_id=self.pid, date=day, kind=kind))

    def measurements(self) -> list[PsaMeasurement]:
        sd = self._cfg.noise_sd
        rows: list[PsaMeasurement] = []
        for day, value, assay in self.draws:
            if sd > 0:
                value = round(max(value * math.exp(self._rng.normal(0.0, sd)), 0.001), 3)
            rows.append(PsaMeasurement(patient_id=self.pid, date=day, value=value, assay=assay))
        return rows


def _generate_patient(idx: int, rng: np.random.Generator, cfg: SynthConfig) -> tuple[PatientTimeline, TruthRecord]:
    b = _PatientBuilder(idx, rng, cfg)
    diagnosis = _days(EPOCH, int(rng.integers(0, 3650)))
    grade_group = int(rng.choice(GRADE_GROUPS, p=GRADE_GROUP_P))
    kind = TreatmentKind.RP if rng.random() < cfg.p_rp else TreatmentKind.RT
    post_assay = Assay.Standard
    if kind == TreatmentKind.RP and rng.random() < cfg.p_ultrasensitive:
        post_assay = Assay.Ultrasensitive
    if rng.random() < cfg.p_recurrence:
        mechanism = RelapseMechanism.Secondary if rng.random() < cfg.p_secondary else RelapseMechanism.Psa
    else:
        mechanism = RelapseMechanism.Nothing

    # rising PSA from diagnosis to treatment
    tx_offset = int(rng.integers(60, 300))
    tx_date = _days(diagnosis, tx_offset)
    baseline = float(np.clip(rng.lognormal(math.log(6.0), 0.35), 2.0, 40.0))
    doubling = rng.uniform(365.0, 1460.0)
    peak = max(baseline * 2.0 ** (tx_offset / doubling), 8.0)
    pre_days = [0]
    while pre_days[-1] + (g := b.gap()) < tx_offset - 30:
        pre_days.append(pre_days[-1] + g)
    last_pre = tx_offset - int(rng.integers(1, 30))
    if last_pre > pre_days[-1]:
        pre_days.append(last_pre)
    span = pre_days[-1] or 1
    for d in pre_days:
        b.draw(_days(diagnosis, d), baseline * (peak / baseline) ** (d / span))
    b.treat(tx_date, kind)

    # secondary treatment that signals relapse
    relapse_date: dt.date | None = None
    if mechanism == RelapseMechanism.Secondary:
        match kind:
            case TreatmentKind.RP:
                if rng.random() < 0.5:
                    relapse_date, secondary = _days(tx_date, int(rng.integers(400, 1500))), TreatmentKind.RT
                else:
                    relapse_date, secondary = _days(tx_date, int(rng.integers(90, 1500))), TreatmentKind.HT
            case _:
                if rng.random() < 0.6:
                    relapse_date, secondary = _days(tx_date, int(rng.integers(200, 1200))), TreatmentKind.HT
                else:
                    relapse_date, secondary = _days(tx_date, int(rng.integers(400, 1500))), TreatmentKind.RT
        b.treat(relapse_date, secondary)
    elif kind == TreatmentKind.RT and rng.random() < cfg.p_neoadjuvant:
        # hormonal therapy around radiation, inside the window the clinical rule ignores
        b.treat(_days(tx_date, int(rng.integers(-90, 60))), TreatmentKind.HT)

    # post-treatment PSA
    day = _days(tx_date, int(rng.integers(21, 90)))
    end = _days(tx_date, cfg.follow_up_days)
    if kind == TreatmentKind.RP:
        level = rng.uniform(0.02, 0.08)
        onset = _days(tx_date, int(rng.integers(365, cfg.follow_up_days - 900)))
        threshold = PRP_THRESHOLD[post_assay]
        k = 0
        while day <= end or (mechanism == RelapseMechanism.Psa and relapse_date is None):
            if mechanism == RelapseMechanism.Psa and day >= onset:
                value = b.draw(day, 0.05 * 2.0 ** ((day - onset).days / RELAPSE_DOUBLING_DAYS), post_assay)
                if relapse_date is None and value > threshold:
                    relapse_date = day
            else:
                b.draw(day, max(0.01, level * 0.85**k), post_assay)
            if relapse_date is not None and mechanism == RelapseMechanism.Psa and day > _days(relapse_date, 300):
                break
            k += 1
            day = _days(day, b.gap())
    else:
        first = peak * rng.uniform(0.2, 0.4)
        nadir = round(rng.uniform(0.2, 1.5), 3)
        decline_days = rng.uniform(270.0, 540.0)
        rate = math.log(first / nadir) / decline_days
        start = day
        running_min = math.inf
        onset = _days(start, int(decline_days) + int(rng.integers(180, 720)))
        while day <= end or (mechanism == RelapseMechanism.Psa and relapse_date is None):
            elapsed = (day - start).days
            if mechanism == RelapseMechanism.Psa and day >= onset:
                value = b.draw(day, nadir + 0.1 * 2.0 ** ((day - onset).days / RELAPSE_DOUBLING_DAYS))
            else:
                value = b.draw(day, max(nadir, first * math.exp(-rate * elapsed)))
            running_min = min(running_min, value)
            if mechanism == RelapseMechanism.Psa and relapse_date is None and value - running_min > PRT_RISE:
                relapse_date = day
            if relapse_date is not None and mechanism == RelapseMechanism.Psa and day > _days(relapse_date, 300):
                break
            day = _days(day, b.gap())

    timeline = build_timeline(b.pid, b.measurements(), b.treatments, diagnosis, grade_group)
    truth = TruthRecord(
        patient_id=b.pid,
        treatment_kind=kind,
        treatment_date=tx_date,
        relapse=mechanism != RelapseMechanism.Nothing,
        relapse_date=relapse_date,
        mechanism=mechanism,
    )
    return timeline, truth


def generate_cohort(cfg: SynthConfig) -> tuple[list[PatientTimeline], GroundTruth]:
    # one generator per patient so a timeline does not depend on its position in the cohort
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_patients)
    cohort: list[PatientTimeline] = []
    records: list[TruthRecord] = []
    for idx, child in enumerate(children):
        timeline, truth = _generate_patient(idx, np.random.default_rng(child), cfg)
        cohort.append(timeline)
        records.append(truth)
    truth = GroundTruth(records=tuple(records))
    logger.info("generated %d patients, %d relapsing (seed=%d)", len(cohort), truth.relapse_count(), cfg.seed)
    if cfg.p_mask > 0:
        return mask_treatments(cohort, truth, cfg.p_mask, cfg.seed)
    return cohort, truth


def mask_treatments(
    cohort: Sequence[PatientTimeline], truth: GroundTruth, p_mask: float, seed: int
) -> tuple[list[PatientTimeline], GroundTruth]:
    rng = np.random.default_rng(seed)
    primary = {(it.patient_id, it.treatment_date, it.treatment_kind) for it in truth.records}
    masked_ids: set[str] = set()
    masked_cohort: list[PatientTimeline] = []
    n_records = n_masked = 0
    for t in cohort:
        kept: list[TreatmentEvent] = []
        for it in t.treatments:
            if it.kind.is_curative():
                n_records += 1
                if rng.random() < p_mask:
                    n_masked += 1
                    if (t.patient_id, it.date, it.kind) in primary:
                        masked_ids.add(t.patient_id)
                    continue
            kept.append(it)
        masked_cohort.append(t if len(kept) == len(t.treatments) else t.model_copy(update={"treatments": tuple(kept)}))
    records = tuple(
        it.model_copy(update={"masked": True}) if it.patient_id in masked_ids else it for it in truth.records
    )
    logger.info("masked %d of %d curative treatment records", n_masked, n_records)
    return masked_cohort, GroundTruth(records=records)
