import datetime as dt
import logging
from collections.abc import Sequence
from dataclasses import dataclass

from ..errors import UnsortedSeries, ZeroPeak
from ..models import DEFAULT_THRESHOLDS, PsaMeasurement, SignificantDrop, Thresholds
from .timeline import elapsed_days

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class DropScanState:
    peak_value: float
    peak_date: dt.date

    @classmethod
    def at(cls, m: PsaMeasurement) -> "DropScanState":
        return cls(m.value, m.date)

    def reset(self, m: PsaMeasurement) -> None:
        self.peak_value = m.value
        self.peak_date = m.date


@dataclass(frozen=True, slots=True)
class SignificanceTest:
    beta: float
    alpha: float
    delta_days: int = 0
    gamma_days: int | None = None

    @classmethod
    def measure(
        cls, peak_value: float, candidate_value: float, delta_days: int = 0, gamma_days: int | None = None
    ) -> "SignificanceTest":
        if peak_value == 0:
            raise ZeroPeak()
        beta = peak_value - candidate_value
        return cls(beta=beta, alpha=beta / peak_value, delta_days=delta_days, gamma_days=gamma_days)

    def peak_is_stale(self, th: Thresholds = DEFAULT_THRESHOLDS) -> bool:
        # gamma looks one measurement past the candidate
        if self.delta_days > th.peak_window_days:
            return True
        return self.gamma_days is not None and self.gamma_days > th.peak_window_days

    def passes(self, th: Thresholds = DEFAULT_THRESHOLDS) -> bool:
        return (self.alpha >= th.sig_alpha_high and self.beta >= th.sig_beta_high) or (
            self.alpha >= th.sig_alpha_low and self.beta >= th.sig_beta_low
        )


def is_significant(peak_value: float, candidate_value: float, th: Thresholds = DEFAULT_THRESHOLDS) -> bool:
    return SignificanceTest.measure(peak_value, candidate_value).passes(th)


def check_sorted(psa: Sequence[PsaMeasurement]) -> None:
    for prev, curr in zip(psa, psa[1:]):
        if curr.date < prev.date:
            raise UnsortedSeries(prev.date, curr.date)


def _extend_nadir(psa: Sequence[PsaMeasurement], trigger: int, th: Thresholds) -> tuple[int, PsaMeasurement]:
    lowest_idx = trigger
    lowest = psa[trigger]
    k = trigger
    while k + 1 < len(psa):
        nxt = psa[k + 1]
        if nxt.value > psa[k].value or elapsed_days(psa[trigger].date, nxt.date) > th.nadir_window_days:
            break
        k += 1
        if nxt.value < lowest.value:
            lowest_idx, lowest = k, nxt
    return lowest_idx, lowest


def _scan(psa: Sequence[PsaMeasurement], start: int, th: Thresholds) -> tuple[SignificantDrop, int] | None:
    n = len(psa)
    if n - start < 2:
        return None
    state = DropScanState.at(psa[start])
    for j in range(start, n - 1):
        prev, cand = psa[j], psa[j + 1]
        delta = elapsed_days(state.peak_date, cand.date)
        if cand.value >= prev.value:
            if cand.value > state.peak_value or delta > th.peak_window_days:
                state.reset(cand)
            continue
        gamma = elapsed_days(state.peak_date, psa[j + 2].date) if j + 2 < n else None
        test = SignificanceTest.measure(state.peak_value, cand.value, delta, gamma)
        # a same-day decrease cannot separate a drop date from a nadir date
        if delta > 0 and test.passes(th):
            nadir_idx, nadir = _extend_nadir(psa, j + 1, th)
            drop = SignificantDrop(
                drop_date=state.peak_date, nadir_date=nadir.date, psa_min=nadir.value, peak_value=state.peak_value
            )
            logger.debug(
                "drop %s -> %s after %dd alpha=%.3f beta=%.3f",
                drop.drop_date,
                drop.nadir_date,
                test.delta_days,
                test.alpha,
                test.beta,
            )
            return drop, nadir_idx
        if test.peak_is_stale(th):
            logger.debug("peak %s stale at %s (delta=%d gamma=%s)", state.peak_date, cand.date, delta, gamma)
            state.reset(cand)
    return None


def detect_significant_drop(
    psa: Sequence[PsaMeasurement], th: Thresholds = DEFAULT_THRESHOLDS
) -> SignificantDrop | None:
    check_sorted(psa)
    found = _scan(psa, 0, th)
    return found[0] if found is not None else None


def detect_all_drops(psa: Sequence[PsaMeasurement], th: Thresholds = DEFAULT_THRESHOLDS) -> list[SignificantDrop]:
    check_sorted(psa)
    drops: list[SignificantDrop] = []
    start = 0
    while (found := _scan(psa, start, th)) is not None:
        drop, nadir_idx = found
        drops.append(drop)
        start = nadir_idx + 1
    return drops
