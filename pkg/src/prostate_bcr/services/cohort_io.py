import datetime as dt
import logging
import re
from collections.abc import Iterable, Iterator, Sequence
from pathlib import Path
from typing import Annotated, TextIO

import pandas as pd
from natsort import natsort_keygen
from pydantic import BaseModel, BeforeValidator, Field, ValidationError, field_validator

from ..errors import IoError, OrphanRow, ParseError
from ..models import (
    Assay,
    BcrEvent,
    BcrSource,
    DetectedTreatment,
    GroundTruth,
    PatientTimeline,
    Provenance,
    PsaMeasurement,
    RelapseMechanism,
    TimeToRelapseReport,
    TreatmentEvent,
    TreatmentKind,
    TruthRecord,
)
from .timeline import build_timeline

logger = logging.getLogger(__name__)

CHUNK_ROWS = 50_000

PATIENTS_FILE = "patients.csv"
PSA_FILE = "psa.csv"
TREATMENTS_FILE = "treatments.csv"
TRUTH_FILE = "truth.csv"
DETECTIONS_FILE = "detected_treatments.csv"
EVENTS_FILE = "bcr_events.csv"
METRICS_FILE = "metrics.txt"
HISTOGRAM_FILE = "time_to_relapse.csv"
SUMMARY_FILE = "time_to_relapse_summary.csv"

PATIENT_COLUMNS = ["patient_id", "diagnosis_date", "grade_group"]
PSA_COLUMNS = ["patient_id", "date", "value_ng_ml", "assay"]
TREATMENT_COLUMNS = ["patient_id", "date", "kind"]
TRUTH_COLUMNS = [
    "patient_id",
    "treatment_kind",
    "treatment_date",
    "relapse",
    "relapse_date",
    "mechanism",
    "masked",
]
DETECTION_COLUMNS = ["patient_id", "kind", "date", "nadir_date", "psa_min"]
EVENT_COLUMNS = ["patient_id", "bcr_date", "source", "time_to_relapse_days"]
HISTOGRAM_COLUMNS = ["group", "bucket_start_days", "bucket_end_days", "count"]
SUMMARY_COLUMNS = ["group", "count", "median_days", "q1_days", "q3_days"]

_ISO_DATE = re.compile(r"\d{4}-\d{2}-\d{2}")
_natural = natsort_keygen()


def parse_iso_date(val: object) -> object:
    if isinstance(val, str):
        if not _ISO_DATE.fullmatch(val):
            raise ValueError(f"{val!r} is not a YYYY-MM-DD date")
        return dt.date.fromisoformat(val)
    return val


def parse_bool(val: object) -> object:
    match val:
        case "true":
            return True
        case "false":
            return False
        case str():
            raise ValueError(f"{val!r} is neither true nor false")
        case _:
            return val


def empty_to_none(val: object) -> object:
    return None if val == "" else val


IsoDate = Annotated[dt.date, BeforeValidator(parse_iso_date)]
OptionalIsoDate = Annotated[IsoDate | None, BeforeValidator(empty_to_none)]
Flag = Annotated[bool, BeforeValidator(parse_bool)]
PatientId = Annotated[str, Field(min_length=1)]


class PatientRow(BaseModel):
    patient_id: PatientId
    diagnosis_date: OptionalIsoDate = None
    grade_group: Annotated[Annotated[int, Field(ge=1, le=5)] | None, BeforeValidator(empty_to_none)] = None


class PsaRow(BaseModel):
    patient_id: PatientId
    date: IsoDate
    value_ng_ml: Annotated[float, Field(ge=0, allow_inf_nan=False)]
    assay: Assay

    def to_measurement(self) -> PsaMeasurement:
        return PsaMeasurement(patient_id=self.patient_id, date=self.date, value=self.value_ng_ml, assay=self.assay)


class TreatmentRow(BaseModel):
    patient_id: PatientId
    date: IsoDate
    kind: TreatmentKind

    def to_event(self) -> TreatmentEvent:
        return TreatmentEvent(patient_id=self.patient_id, date=self.date, kind=self.kind)


class TruthRow(BaseModel):
    patient_id: PatientId
    treatment_kind: TreatmentKind
    treatment_date: IsoDate
    relapse: Flag
    relapse_date: OptionalIsoDate = None
    mechanism: RelapseMechanism
    masked: Flag


class EventRow(BaseModel):
    patient_id: PatientId
    bcr_date: IsoDate
    source: BcrSource
    time_to_relapse_days: int

    @field_validator("time_to_relapse_days", mode="before")
    @classmethod
    def validate_days(cls, val: object) -> object:
        if isinstance(val, str) and not re.fullmatch(r"-?\d+", val):
            raise ValueError(f"{val!r} is not an integer")
        return val


class CohortFiles(BaseModel):
    patients: Path
    psa: Path
    treatments: Path
    truth: Path | None = None

    @classmethod
    def in_dir(cls, root: str | Path, truth: str | Path | None = None) -> "CohortFiles":
        root = Path(root)
        return cls(
            patients=root / PATIENTS_FILE,
            psa=root / PSA_FILE,
            treatments=root / TREATMENTS_FILE,
            truth=Path(truth) if truth is not None else None,
        )


def _reason(exc: ValidationError) -> str:
    err = exc.errors()[0]
    loc = ".".join(str(it) for it in err["loc"])
    return f"{loc}: {err['msg']}" if loc else err["msg"]


def _first_undecodable_line(path: Path) -> int:
    with path.open("rb") as f:
        for line, raw in enumerate(f, start=1):
            try:
                raw.decode("utf-8")
            except UnicodeDecodeError:
                return line
    return 0


def _iter_rows[M: BaseModel](path: Path, columns: list[str], model: type[M]) -> Iterator[tuple[int, M]]:
    try:
        reader = pd.read_csv(
            path,
            dtype=str,
            encoding="utf-8",
            keep_default_na=False,
            skip_blank_lines=False,
            chunksize=CHUNK_ROWS,
        )
        offset = 2  # line 1 is the header
        for chunk in reader:
            if list(chunk.columns) != columns:
                raise ParseError(path, 1, f"expected header {','.join(columns)}, got {','.join(chunk.columns)}")
            for rec in chunk.to_dict(orient="records"):
                # blank lines come through as rows of missing values
                if not any(isinstance(v, str) and v for v in rec.values()):
                    raise ParseError(path, offset, "blank line")
                try:
                    yield offset, model.model_validate(rec)
                except ValidationError as exc:
                    raise ParseError(path, offset, _reason(exc)) from exc
                offset += 1
    except FileNotFoundError as exc:
        raise IoError(path, "no such file") from exc
    except UnicodeDecodeError as exc:
        raise ParseError(path, _first_undecodable_line(path), "invalid UTF-8") from exc
    except pd.errors.EmptyDataError as exc:
        raise ParseError(path, 1, "missing header row") from exc
    except pd.errors.ParserError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ParseError(path, int(m.group(1)) if m else 0, str(exc).strip()) from exc
    except OSError as exc:
        raise IoError(path, exc.strerror or str(exc)) from exc


def read_truth(path: str | Path) -> GroundTruth:
    path = Path(path)
    records: list[TruthRecord] = []
    for line, row in _iter_rows(path, TRUTH_COLUMNS, TruthRow):
        try:
            records.append(TruthRecord.model_validate(row.model_dump()))
        except ValidationError as exc:
            raise ParseError(path, line, "inconsistent relapse fields") from exc
    return GroundTruth(records=tuple(records))


def read_cohort(files: CohortFiles) -> tuple[list[PatientTimeline], GroundTruth | None]:
    patients: dict[str, PatientRow] = {}
    for line, row in _iter_rows(files.patients, PATIENT_COLUMNS, PatientRow):
        if row.patient_id in patients:
            raise ParseError(files.patients, line, f"duplicate patient_id {row.patient_id!r}")
        patients[row.patient_id] = row
    psa: dict[str, list[PsaMeasurement]] = {pid: [] for pid in patients}
    for line, row in _iter_rows(files.psa, PSA_COLUMNS, PsaRow):
        if row.patient_id not in psa:
            raise OrphanRow(files.psa, line, row.patient_id)
        psa[row.patient_id].append(row.to_measurement())
    txs: dict[str, list[TreatmentEvent]] = {pid: [] for pid in patients}
    for line, row in _iter_rows(files.treatments, TREATMENT_COLUMNS, TreatmentRow):
        if row.patient_id not in txs:
            raise OrphanRow(files.treatments, line, row.patient_id)
        txs[row.patient_id].append(row.to_event())
    cohort = [
        build_timeline(pid, psa[pid], txs[pid], row.diagnosis_date, row.grade_group) for pid, row in patients.items()
    ]
    truth = read_truth(files.truth) if files.truth is not None else None
    logger.info("read %d patients from %s", len(cohort), files.patients.parent)
    return cohort, truth


def read_bcr_events(path: str | Path) -> list[BcrEvent]:
    path = Path(path)
    events: list[BcrEvent] = []
    for line, row in _iter_rows(path, EVENT_COLUMNS, EventRow):
        try:
            events.append(BcrEvent.model_validate(row.model_dump()))
        except ValidationError as exc:
            raise ParseError(path, line, _reason(exc)) from exc
    return events


def _fmt_date(d: dt.date | None) -> str:
    return "" if d is None else d.isoformat()


def _fmt_float(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def _frame(columns: list[str], rows: Iterable[Sequence[str]]) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=columns, dtype=str)


def _write(frame: pd.DataFrame, dest: Path | TextIO) -> None:
    try:
        frame.to_csv(dest, index=False, lineterminator="\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(dest if isinstance(dest, Path) else "<stream>", exc.strerror or str(exc)) from exc


def detections_frame(detections: Iterable[DetectedTreatment]) -> pd.DataFrame:
    ordered = sorted(detections, key=lambda it: (_natural(it.patient_id), it.date))
    return _frame(
        DETECTION_COLUMNS,
        ([it.patient_id, it.kind.value, _fmt_date(it.date), _fmt_date(it.nadir_date), _fmt_float(it.psa_min)]
         for it in ordered),
    )


def events_frame(events: Iterable[BcrEvent]) -> pd.DataFrame:
    ordered = sorted(events, key=lambda it: (_natural(it.patient_id), it.bcr_date))
    return _frame(
        EVENT_COLUMNS,
        ([it.patient_id, _fmt_date(it.bcr_date), it.source.value, str(it.time_to_relapse_days)] for it in ordered),
    )


def write_frame(frame: pd.DataFrame, dest: Path | TextIO) -> None:
    _write(frame, dest)


def _ensure_dir(out_dir: Path) -> None:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(out_dir, exc.strerror or str(exc)) from exc


def write_cohort(cohort: Sequence[PatientTimeline], truth: GroundTruth | None, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    _ensure_dir(out_dir)
    ordered = sorted(cohort, key=lambda it: _natural(it.patient_id))
    patients = _frame(
        PATIENT_COLUMNS,
        ([t.patient_id, _fmt_date(t.diagnosis_date), "" if t.grade_group is None else str(t.grade_group)]
         for t in ordered),
    )
    psa = _frame(
        PSA_COLUMNS,
        ([m.patient_id, _fmt_date(m.date), _fmt_float(m.value), m.assay.value] for t in ordered for m in t.psa),
    )
    # imputed events are derived data and are not written back as records
    txs = _frame(
        TREATMENT_COLUMNS,
        (
            [e.patient_id, _fmt_date(e.date), e.kind.value]
            for t in ordered
            for e in t.treatments
            if e.provenance == Provenance.Recorded
        ),
    )
    written = [out_dir / PATIENTS_FILE, out_dir / PSA_FILE, out_dir / TREATMENTS_FILE]
    for frame, path in zip((patients, psa, txs), written):
        _write(frame, path)
    if truth is not None:
        records = sorted(truth.records, key=lambda it: _natural(it.patient_id))
        frame = _frame(
            TRUTH_COLUMNS,
            (
                [
                    it.patient_id,
                    it.treatment_kind.value,
                    _fmt_date(it.treatment_date),
                    "true" if it.relapse else "false",
                    _fmt_date(it.relapse_date),
                    it.mechanism.value,
                    "true" if it.masked else "false",
                ]
                for it in records
            ),
        )
        _write(frame, out_dir / TRUTH_FILE)
        written.append(out_dir / TRUTH_FILE)
    logger.info("wrote %d patients to %s", len(cohort), out_dir)
    return written


def write_metrics(metrics: dict[str, str], path: Path) -> None:
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fp:
            for key, val in metrics.items():
                fp.write(f"{key}={val}\n")
    except OSError as exc:
        raise IoError(path, exc.strerror or str(exc)) from exc


def _fmt_stat(v: float | None) -> str:
    return "" if v is None else f"{v:.1f}"


def write_report(report: TimeToRelapseReport, out_dir: Path) -> list[Path]:
    rows: list[list[str]] = []
    for group, counts in report.groups():
        for i, n in enumerate(counts):
            rows.append([group, str(i * report.bucket_days), str((i + 1) * report.bucket_days), str(n)])
    summaries = (
        [it.group, str(it.count), _fmt_stat(it.median_days), _fmt_stat(it.q1_days), _fmt_stat(it.q3_days)]
        for it in report.summaries
    )
    _write(_frame(HISTOGRAM_COLUMNS, rows), out_dir / HISTOGRAM_FILE)
    _write(_frame(SUMMARY_COLUMNS, summaries), out_dir / SUMMARY_FILE)
    return [out_dir / HISTOGRAM_FILE, out_dir / SUMMARY_FILE]


def write_outputs(
    out_dir: str | Path,
    detections: Iterable[DetectedTreatment] | None = None,
    events: Iterable[BcrEvent] | None = None,
    metrics: dict[str, str] | None = None,
    report: TimeToRelapseReport | None = None,
) -> list[Path]:
    out_dir = Path(out_dir)
    _ensure_dir(out_dir)
    written: list[Path] = []
    if detections is not None:
        _write(detections_frame(detections), out_dir / DETECTIONS_FILE)
        written.append(out_dir / DETECTIONS_FILE)
    if events is not None:
        _write(events_frame(events), out_dir / EVENTS_FILE)
        written.append(out_dir / EVENTS_FILE)
    if metrics is not None:
        write_metrics(metrics, out_dir / METRICS_FILE)
        written.append(out_dir / METRICS_FILE)
    if report is not None:
        written.extend(write_report(report, out_dir))
    logger.info("wrote %s", ", ".join(it.name for it in written) or "nothing")
    return written

