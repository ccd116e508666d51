import argparse
import json
import logging
import logging.config
import sys
import time
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import NoReturn

from pydantic import ValidationError

from .dependencies import create_runner, get_or_create_settings, load_thresholds
from .errors import BcrError, InvalidConfig, IoError
from .logging import DEV_LOG_CFG, verbose_log_cfg
from .models import DropMode, DtxMode, SynthConfig, Thresholds
from .services import (
    BcrOptions,
    CohortFiles,
    PatientRunner,
    detect_bcr_cohort,
    detect_missing_treatments,
    evaluate_bcr,
    evaluate_dtx,
    evaluate_recovery,
    generate_cohort,
    impute_cohort,
    read_bcr_events,
    read_cohort,
    read_truth,
    summarize_bcr,
    time_to_relapse_report,
    write_cohort,
    write_outputs,
)
from .services.bcr import timeline_view
from .services.cohort_io import detections_frame, events_frame, write_frame
from .services.evaluation import BUCKET_DAYS, HORIZON_DAYS

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2


class CliParser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True, slots=True)
class CommandContext:
    thresholds: Thresholds
    runner: PatientRunner


def _flag(val: str) -> bool:
    match val:
        case "true":
            return True
        case "false":
            return False
        case _:
            raise argparse.ArgumentTypeError(f"expected true or false, got {val!r}")


def _drop_mode(val: str) -> DropMode:
    try:
        return DropMode(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected first or all, got {val!r}") from None


def build_parser() -> CliParser:
    parser = CliParser(prog="prostate-bcr", description="Treatment imputation and relapse detection from PSA series")
    parser.add_argument("--config", type=Path, help="name=value file overriding rule thresholds")
    parser.add_argument("--log-config", type=Path, help="logging dictConfig as JSON")
    parser.add_argument("--workers", type=int, help="processes for per-patient detection")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-patient rule decisions")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    synth = sub.add_parser("synth", help="generate a synthetic cohort with ground truth")
    synth.add_argument("--patients", type=int, default=100)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--p-mask", type=float, default=0.0)
    synth.add_argument("--noise-sd", type=float, default=0.0)
    synth.add_argument("--p-secondary", type=float, default=0.3)
    synth.add_argument("--p-rp", type=float, default=0.4)
    synth.add_argument("--p-recurrence", type=float, default=0.3)
    synth.add_argument("--sampling-interval", type=float, default=90.0, help="mean days between PSA draws")
    synth.add_argument("--out", type=Path, required=True)

    dtx = sub.add_parser("detect-tx", help="impute curative treatments missing from the records")
    dtx.add_argument("--cohort", type=Path, required=True)
    dtx.add_argument("--mode", type=_drop_mode, default=DropMode.First, help="first|all")
    dtx.add_argument("--out", type=Path)

    bcr = sub.add_parser("detect-bcr", help="detect biochemical recurrence")
    bcr.add_argument("--cohort", type=Path, required=True)
    bcr.add_argument("--include-imputed", type=_flag, default=True, help="true|false")
    bcr.add_argument("--psa-only", action="store_true", help="skip the clinical rules")
    bcr.add_argument("--mode", type=_drop_mode, default=DropMode.First, help="first|all")
    bcr.add_argument("--out", type=Path)

    ev = sub.add_parser("eval", help="score detection against recorded treatments and ground truth")
    ev.add_argument("--cohort", type=Path, required=True)
    ev.add_argument("--truth", type=Path, required=True)
    ev.add_argument("--include-imputed", type=_flag, default=True, help="true|false")
    ev.add_argument("--psa-only", action="store_true")
    ev.add_argument("--mode", type=_drop_mode, default=DropMode.First, help="first|all")
    ev.add_argument("--out", type=Path, required=True)

    report = sub.add_parser("report", help="time-to-relapse histogram")
    report.add_argument("--events", type=Path, required=True)
    report.add_argument("--cohort", type=Path, required=True)
    report.add_argument("--bucket-days", type=int, default=BUCKET_DAYS)
    report.add_argument("--horizon-days", type=int, default=HORIZON_DAYS)
    report.add_argument("--out", type=Path, required=True)
    return parser


def _configure_logging(log_config: Path | None, verbose: bool) -> None:
    if log_config is None:
        logging.config.dictConfig(verbose_log_cfg() if verbose else DEV_LOG_CFG)
        return
    try:
        cfg = json.loads(log_config.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(log_config, exc.strerror or str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{log_config}: {exc}") from exc
    try:
        logging.config.dictConfig(cfg)
    except ValueError as exc:
        raise InvalidConfig(f"{log_config}: {exc}") from exc


def _synth(args: argparse.Namespace, _: CommandContext) -> None:
    cfg = SynthConfig(
        n_patients=args.patients,
        seed=args.seed,
        p_mask=args.p_mask,
        noise_sd=args.noise_sd,
        p_secondary=args.p_secondary,
        p_rp=args.p_rp,
        p_recurrence=args.p_recurrence,
        sampling_interval_days=args.sampling_interval,
    )
    cohort, truth = generate_cohort(cfg)
    write_cohort(cohort, truth, args.out)


def _detect_tx(args: argparse.Namespace, ctx: CommandContext) -> None:
    cohort, _ = read_cohort(CohortFiles.in_dir(args.cohort))
    detections = detect_missing_treatments(cohort, DtxMode.Impute, args.mode, ctx.thresholds, ctx.runner)
    if args.out is None:
        write_frame(detections_frame(detections), sys.stdout)
    else:
        write_outputs(args.out, detections=detections)


def _detect_bcr(args: argparse.Namespace, ctx: CommandContext) -> None:
    options = BcrOptions(psa_only=args.psa_only, include_imputed=args.include_imputed)
    cohort, _ = read_cohort(CohortFiles.in_dir(args.cohort))
    if options.include_imputed:
        cohort = impute_cohort(cohort, args.mode, ctx.thresholds, ctx.runner)
    events = detect_bcr_cohort(cohort, options, ctx.thresholds, ctx.runner)
    if args.out is None:
        write_frame(events_frame(events), sys.stdout)
        return
    treated = sum(1 for t in cohort if timeline_view(t, options).is_treated())
    metrics = summarize_bcr(events, treated).to_report() | ctx.thresholds.to_report()
    write_outputs(args.out, events=events, metrics=metrics)


def _eval(args: argparse.Namespace, ctx: CommandContext) -> None:
    th, runner = ctx.thresholds, ctx.runner
    options = BcrOptions(psa_only=args.psa_only, include_imputed=args.include_imputed)
    cohort, _ = read_cohort(CohortFiles.in_dir(args.cohort))
    truth = read_truth(args.truth)
    metrics = evaluate_dtx(cohort, th, args.mode, runner).to_report()
    if any(it.masked for it in truth.records):
        metrics |= evaluate_recovery(cohort, truth, th, args.mode, runner).to_report("dtx.recovery")
    if options.include_imputed:
        cohort = impute_cohort(cohort, args.mode, th, runner)
    metrics |= evaluate_bcr(cohort, truth, options, th, runner).to_report()
    write_outputs(args.out, metrics=metrics | th.to_report())


def _report(args: argparse.Namespace, _: CommandContext) -> None:
    events = read_bcr_events(args.events)
    cohort, _ = read_cohort(CohortFiles.in_dir(args.cohort))
    report = time_to_relapse_report(events, cohort, args.bucket_days, args.horizon_days)
    write_outputs(args.out, report=report)


COMMANDS = {
    "synth": _synth,
    "detect-tx": _detect_tx,
    "detect-bcr": _detect_bcr,
    "eval": _eval,
    "report": _report,
}


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.workers is not None and args.workers < 1:
            parser.error("--workers must be at least 1")
        if args.command == "report" and args.bucket_days < 1:
            parser.error("--bucket-days must be positive")
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID

    try:
        settings = get_or_create_settings()
        _configure_logging(args.log_config or settings.log_config, args.verbose)
        ctx = CommandContext(
            thresholds=load_thresholds(settings.thresholds, args.config),
            runner=create_runner(settings, args.workers),
        )
        started = time.perf_counter()
        COMMANDS[args.command](args, ctx)
        logger.info("%s done in %.2fs", args.command, time.perf_counter() - started)
    except (IoError, OSError) as exc:
        sys.stderr.write(f"{parser.prog}: {exc}\n")
        return EXIT_IO
    except (BcrError, ValidationError) as exc:
        sys.stderr.write(f"{parser.prog}: {exc}\n")
        return EXIT_INVALID
    return EXIT_OK


def main() -> None:
    sys.exit(run())
