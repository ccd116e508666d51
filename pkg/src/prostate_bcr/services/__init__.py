from .bcr import DEFAULT_OPTIONS, BcrOptions, bcr_candidates, detect_bcr, detect_bcr_cohort
from .cohort_io import CohortFiles, read_bcr_events, read_cohort, read_truth, write_cohort, write_outputs
from .dtx import classify_drop, curative_treatment_in_window, detect_missing_treatments, impute_cohort
from .evaluation import evaluate_bcr, evaluate_dtx, evaluate_recovery, summarize_bcr, time_to_relapse_report
from .pipeline import SERIAL, PatientRunner
from .relapse import crp, crt, prp, prt
from .sigdrop import detect_all_drops, detect_significant_drop, is_significant
from .synth import generate_cohort, mask_treatments
from .timeline import build_timeline, merge_treatments, timeline_query, without_imputed

__all__ = [
    "DEFAULT_OPTIONS",
    "SERIAL",
    "BcrOptions",
    "CohortFiles",
    "PatientRunner",
    "bcr_candidates",
    "build_timeline",
    "classify_drop",
    "crp",
    "crt",
    "curative_treatment_in_window",
    "detect_all_drops",
    "detect_bcr",
    "detect_bcr_cohort",
    "detect_missing_treatments",
    "detect_significant_drop",
    "evaluate_bcr",
    "evaluate_dtx",
    "evaluate_recovery",
    "generate_cohort",
    "impute_cohort",
    "is_significant",
    "mask_treatments",
    "merge_treatments",
    "prp",
    "prt",
    "read_bcr_events",
    "read_cohort",
    "read_truth",
    "summarize_bcr",
    "time_to_relapse_report",
    "timeline_query",
    "without_imputed",
    "write_cohort",
    "write_outputs",
]
