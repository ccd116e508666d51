from datetime import date
from pathlib import Path


class BcrError(Exception):
    pass


class TimelineError(BcrError):
    pass


class MixedPatient(TimelineError):
    def __init__(self, expected: str, found: str) -> None:
        super().__init__(f"row of patient {found!r} in timeline of {expected!r}")
        self.expected = expected
        self.found = found


class NegativeValue(TimelineError):
    def __init__(self, pid: str, day: date, value: float) -> None:
        super().__init__(f"negative PSA value {value!r} for {pid!r} on {day}")
        self.value = value


class UnsortedSeries(TimelineError):
    def __init__(self, prev: date, curr: date) -> None:
        super().__init__(f"PSA dates decrease: {prev} then {curr}")


class InvalidWindow(TimelineError):
    def __init__(self, start: date, end: date) -> None:
        super().__init__(f"window start {start} is after end {end}")


class ZeroPeak(BcrError):
    def __init__(self) -> None:
        super().__init__("peak PSA value is zero")


class InvalidConfig(BcrError):
    pass


class MissingTruth(BcrError):
    def __init__(self, pid: str) -> None:
        super().__init__(f"no ground-truth record for patient {pid!r}")
        self.patient_id = pid


class CohortFileError(BcrError):
    pass


class ParseError(CohortFileError):
    def __init__(self, file: str | Path, line: int, reason: str) -> None:
        super().__init__(f"{file}:{line}: {reason}")
        self.file = str(file)
        self.line = line
        self.reason = reason


class OrphanRow(CohortFileError):
    def __init__(self, file: str | Path, line: int, pid: str) -> None:
        super().__init__(f"{file}:{line}: unknown patient_id {pid!r}")
        self.file = str(file)
        self.line = line
        self.patient_id = pid


class IoError(CohortFileError):
    def __init__(self, path: str | Path, reason: str) -> None:
        super().__init__(f"{path}: {reason}")
        self.path = str(path)
        self.reason = reason
