import datetime as dt
from enum import Enum
from pathlib import Path
from typing import Annotated, Any, Self, assert_never

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import InvalidConfig, MixedPatient, NegativeValue, TimelineError, UnsortedSeries


class Thresholds(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")
    # significant drop
    sig_alpha_high: float = 0.75
    sig_beta_high: float = 3.0
    sig_alpha_low: float = 0.5
    sig_beta_low: float = 4.0
    peak_window_days: Annotated[int, Field(ge=0)] = 365
    nadir_window_days: Annotated[int, Field(ge=0)] = 365
    # treatment classification
    rp_nadir_max: float = 0.1
    # PSA relapse
    prp_threshold: float = 0.4
    prp_threshold_ultrasensitive: float = 0.2
    prt_rise: float = 2.0
    # clinical relapse
    one_year_days: Annotated[int, Field(ge=0)] = 365
    two_years_days: Annotated[int, Field(ge=0)] = 730
    six_months_days: Annotated[int, Field(ge=0)] = 183
    three_years_days: Annotated[int, Field(ge=0)] = 1095
    # evaluation
    bcr_tolerance_days: Annotated[int, Field(ge=0)] = 60

    def to_report(self) -> dict[str, str]:
        return {f"threshold.{k}": str(v) for k, v in self.model_dump().items()}


DEFAULT_THRESHOLDS = Thresholds()


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="PROSTATE_BCR_", env_nested_delimiter="__")
    thresholds: Thresholds = DEFAULT_THRESHOLDS
    workers: Annotated[int, Field(ge=1)] = 1
    log_config: Path | None = None


class Assay(Enum):
    Standard = "standard"
    Ultrasensitive = "ultrasensitive"


class TreatmentKind(Enum):
    RP = "RP"
    RT = "RT"
    HT = "HT"
    CT = "CT"

    def is_curative(self) -> bool:
        match self:
            case TreatmentKind.RP | TreatmentKind.RT:
                return True
            case TreatmentKind.HT | TreatmentKind.CT:
                return False
            case _:
                assert_never(self)


type KindSet = frozenset[TreatmentKind]

RP: KindSet = frozenset({TreatmentKind.RP})
RT: KindSet = frozenset({TreatmentKind.RT})
HTCT: KindSet = frozenset({TreatmentKind.HT, TreatmentKind.CT})
CURATIVE: KindSet = frozenset({TreatmentKind.RP, TreatmentKind.RT})


class Provenance(Enum):
    Recorded = "recorded"
    Imputed = "imputed"


class BcrSource(Enum):
    # declaration order is the tie-break order
    PRP = "PRP"
    CRP = "CRP"
    PRT = "PRT"
    CRT = "CRT"

    def is_psa_based(self) -> bool:
        match self:
            case BcrSource.PRP | BcrSource.PRT:
                return True
            case BcrSource.CRP | BcrSource.CRT:
                return False
            case _:
                assert_never(self)


class DropMode(Enum):
    First = "first"
    All = "all"


class DtxMode(Enum):
    Impute = "impute"
    Evaluate = "evaluate"


class RelapseMechanism(Enum):
    Nothing = "none"
    Psa = "psa"
    Secondary = "secondary"


class PsaMeasurement(BaseModel):
    model_config = ConfigDict(frozen=True)
    patient_id: str
    date: dt.date
    value: Annotated[float, Field(allow_inf_nan=False)]
    assay: Assay = Assay.Standard

    @model_validator(mode="after")
    def check_value(self) -> Self:
        if self.value < 0:
            raise NegativeValue(self.patient_id, self.date, self.value)
        return self


class TreatmentEvent(BaseModel):
    model_config = ConfigDict(frozen=True)
    patient_id: str
    date: dt.date
    kind: TreatmentKind
    provenance: Provenance = Provenance.Recorded


class PatientTimeline(BaseModel):
    model_config = ConfigDict(frozen=True)
    patient_id: str
    psa: tuple[PsaMeasurement, ...] = ()
    treatments: tuple[TreatmentEvent, ...] = ()
    diagnosis_date: dt.date | None = None
    grade_group: Annotated[int, Field(ge=1, le=5)] | None = None
    # rows dropped as exact duplicates while building; not part of identity
    dedup_count: Annotated[int, Field(ge=0, exclude=True)] = 0

    @model_validator(mode="after")
    def check(self) -> Self:
        for it in (*self.psa, *self.treatments):
            if it.patient_id != self.patient_id:
                raise MixedPatient(self.patient_id, it.patient_id)
        for prev, curr in zip(self.psa, self.psa[1:]):
            if curr.date < prev.date:
                raise UnsortedSeries(prev.date, curr.date)
        for prev, curr in zip(self.treatments, self.treatments[1:]):
            if curr.date < prev.date:
                raise TimelineError(f"treatment dates decrease: {prev.date} then {curr.date}")
        return self

    def _identity(self) -> tuple[Any, ...]:
        return self.patient_id, self.psa, self.treatments, self.diagnosis_date, self.grade_group

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PatientTimeline):
            return NotImplemented
        return self._identity() == other._identity()

    def __hash__(self) -> int:
        return hash(self._identity())

    def is_treated(self) -> bool:
        return any(it.kind.is_curative() for it in self.treatments)


class SignificantDrop(BaseModel):
    model_config = ConfigDict(frozen=True)
    drop_date: dt.date
    nadir_date: dt.date
    psa_min: float
    peak_value: float

    @model_validator(mode="after")
    def check(self) -> Self:
        assert self.drop_date < self.nadir_date
        assert self.psa_min < self.peak_value
        return self


class DetectedTreatment(BaseModel):
    model_config = ConfigDict(frozen=True)
    patient_id: str
    kind: TreatmentKind
    date: dt.date
    nadir_date: dt.date
    psa_min: float

    @field_validator("kind")
    @classmethod
    def validate_kind(cls, val: TreatmentKind) -> TreatmentKind:
        if not val.is_curative():
            raise ValueError("a detected treatment is either RP or RT")
        return val

    def to_event(self) -> TreatmentEvent:
        return TreatmentEvent(patient_id=self.patient_id, date=self.date, kind=self.kind, provenance=Provenance.Imputed)


class BcrCandidates(BaseModel):
    model_config = ConfigDict(frozen=True)
    d1: dt.date | None = None
    d2: dt.date | None = None
    d3: dt.date | None = None
    d4: dt.date | None = None

    def by_source(self) -> list[tuple[BcrSource, dt.date | None]]:
        return [(BcrSource.PRP, self.d1), (BcrSource.CRP, self.d2), (BcrSource.PRT, self.d3), (BcrSource.CRT, self.d4)]

    def earliest(self) -> tuple[dt.date, BcrSource] | None:
        found: tuple[dt.date, BcrSource] | None = None
        for source, day in self.by_source():
            # strict comparison keeps the earlier source on ties
            if day is not None and (found is None or day < found[0]):
                found = (day, source)
        return found


class BcrEvent(BaseModel):
    model_config = ConfigDict(frozen=True)
    patient_id: str
    bcr_date: dt.date
    source: BcrSource
    time_to_relapse_days: Annotated[int, Field(gt=0)]


class SynthConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")
    n_patients: int = 100
    seed: int = 0
    p_rp: float = 0.4
    p_recurrence: float = 0.3
    p_secondary: float = 0.3
    noise_sd: float = 0.0
    sampling_interval_days: float = 90.0
    p_mask: float = 0.0
    p_ultrasensitive: float = 0.3
    p_neoadjuvant: float = 0.2
    follow_up_days: int = 2920

    @model_validator(mode="after")
    def check(self) -> Self:
        for name in ("p_rp", "p_recurrence", "p_secondary", "p_mask", "p_ultrasensitive", "p_neoadjuvant"):
            val: float = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise InvalidConfig(f"{name} must be within [0, 1], got {val!r}")
        if self.n_patients < 1:
            raise InvalidConfig(f"n_patients must be positive, got {self.n_patients}")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.noise_sd < 0:
            raise InvalidConfig(f"noise_sd must be non-negative, got {self.noise_sd!r}")
        if self.sampling_interval_days < 14:
            raise InvalidConfig(f"sampling_interval_days must be at least 14, got {self.sampling_interval_days!r}")
        if self.follow_up_days < 1825:
            raise InvalidConfig(f"follow_up_days must be at least 1825, got {self.follow_up_days}")
        return self


class TruthRecord(BaseModel):
    model_config = ConfigDict(frozen=True)
    patient_id: str
    treatment_kind: TreatmentKind
    treatment_date: dt.date
    relapse: bool = False
    relapse_date: dt.date | None = None
    mechanism: RelapseMechanism = RelapseMechanism.Nothing
    masked: bool = False

    @model_validator(mode="after")
    def check(self) -> Self:
        assert self.relapse == (self.relapse_date is not None)
        assert self.relapse == (self.mechanism != RelapseMechanism.Nothing)
        assert self.treatment_kind.is_curative()
        return self


class GroundTruth(BaseModel):
    model_config = ConfigDict(frozen=True)
    records: tuple[TruthRecord, ...] = ()

    def by_patient(self) -> dict[str, TruthRecord]:
        return {it.patient_id: it for it in self.records}

    def relapse_count(self) -> int:
        return sum(1 for it in self.records if it.relapse)


def _fraction(num: int, den: int) -> float:
    return num / den if den else 0.0


class DtxCounts(BaseModel):
    available_ctx: int = 0
    estimated_ctx: int = 0
    matched: int = 0
    true_class: int = 0
    false_class: int = 0
    new_estimated: int = 0

    @model_validator(mode="after")
    def check(self) -> Self:
        assert self.matched == self.true_class + self.false_class
        assert self.estimated_ctx == self.matched + self.new_estimated
        return self

    @property
    def matched_fraction(self) -> float:
        return _fraction(self.matched, self.available_ctx)

    @property
    def true_class_fraction(self) -> float:
        return _fraction(self.true_class, self.matched)

    @property
    def false_class_fraction(self) -> float:
        return _fraction(self.false_class, self.matched)

    @property
    def new_estimated_fraction(self) -> float:
        return _fraction(self.new_estimated, self.estimated_ctx)

    def to_report(self, prefix: str) -> dict[str, str]:
        return {
            f"{prefix}.available_ctx": str(self.available_ctx),
            f"{prefix}.estimated_ctx": str(self.estimated_ctx),
            f"{prefix}.matched": str(self.matched),
            f"{prefix}.matched_fraction": f"{self.matched_fraction:.4f}",
            f"{prefix}.true_class": str(self.true_class),
            f"{prefix}.true_class_fraction": f"{self.true_class_fraction:.4f}",
            f"{prefix}.false_class": str(self.false_class),
            f"{prefix}.false_class_fraction": f"{self.false_class_fraction:.4f}",
            f"{prefix}.new_estimated": str(self.new_estimated),
            f"{prefix}.new_estimated_fraction": f"{self.new_estimated_fraction:.4f}",
        }


class DtxMetrics(BaseModel):
    overall: DtxCounts
    rp: DtxCounts
    rt: DtxCounts

    def to_report(self) -> dict[str, str]:
        return self.overall.to_report("dtx.overall") | self.rp.to_report("dtx.rp") | self.rt.to_report("dtx.rt")


class BcrMetrics(BaseModel):
    treated_patients: int = 0
    detected: int = 0
    by_source: dict[BcrSource, int] = Field(default_factory=lambda: {it: 0 for it in BcrSource})
    true_positives: int | None = None
    false_positives: int | None = None
    misses: int | None = None
    median_date_error_days: float | None = None

    @model_validator(mode="after")
    def check(self) -> Self:
        assert self.detected == sum(self.by_source.values())
        return self

    @property
    def psa_sourced(self) -> int:
        return sum(n for source, n in self.by_source.items() if source.is_psa_based())

    @property
    def clinical_sourced(self) -> int:
        return self.detected - self.psa_sourced

    @property
    def bcr_rate(self) -> float:
        return _fraction(self.detected, self.treated_patients)

    @property
    def clinical_uplift(self) -> float:
        return _fraction(self.clinical_sourced, self.psa_sourced)

    def to_report(self) -> dict[str, str]:
        lines = {
            "bcr.treated_patients": str(self.treated_patients),
            "bcr.detected": str(self.detected),
            "bcr.bcr_rate": f"{self.bcr_rate:.4f}",
        }
        for source in BcrSource:
            lines[f"bcr.by_source.{source.value}"] = str(self.by_source.get(source, 0))
        lines["bcr.psa_sourced"] = str(self.psa_sourced)
        lines["bcr.clinical_sourced"] = str(self.clinical_sourced)
        lines["bcr.clinical_uplift"] = f"{self.clinical_uplift:.4f}"
        if self.true_positives is not None:
            lines["bcr.truth.true_positives"] = str(self.true_positives)
            lines["bcr.truth.false_positives"] = str(self.false_positives)
            lines["bcr.truth.misses"] = str(self.misses)
            median = self.median_date_error_days
            lines["bcr.truth.median_date_error_days"] = "" if median is None else f"{median:.1f}"
        return lines


class RelapseSummary(BaseModel):
    group: str
    count: int
    median_days: float | None
    q1_days: float | None
    q3_days: float | None


class TimeToRelapseReport(BaseModel):
    bucket_days: Annotated[int, Field(gt=0)]
    overall: tuple[int, ...]
    by_grade_group: dict[int, tuple[int, ...]] | None = None
    summaries: tuple[RelapseSummary, ...] = ()

    @model_validator(mode="after")
    def check(self) -> Self:
        if self.by_grade_group is not None:
            for counts in self.by_grade_group.values():
                assert len(counts) == len(self.overall)
        return self

    def groups(self) -> list[tuple[str, tuple[int, ...]]]:
        pairs = [("all", self.overall)]
        if self.by_grade_group is not None:
            pairs.extend((f"GG{gg}", counts) for gg, counts in sorted(self.by_grade_group.items()))
        return pairs
