"""Per-utterance checks that judge separation quality from diarization output.

Each check measures one statistic on the separation-based (SSD) result and
flags the utterance as a poor separation when the statistic falls on the
wrong side of its threshold:

1. speaker balance ``min_i d(R_i) / max_i d(R_i)``, flagged when ``<= th1``;
2. overlap ratio ``(sum_i d(R_i) - d(union R_i)) / sum_i d(R_i)``, flagged
   when ``>= th2``;
3. deviation from the clustering-based (CSD) result, i.e. the DER of SSD
   scored with CSD as the reference, flagged when ``>= th3``.

Degenerate inputs (missing streams, no speech, empty CSD) are always
flagged so the selector falls back to CSD.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .der import score_der
from .timeline import Annotation, speaker_durations, total_speaker_time, union_duration


@dataclass(frozen=True)
class Thresholds:
    th1: float = 0.40
    th2: float = 0.20
    th3: float = 0.26

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")

    def for_strategy(self, strategy_id: int) -> float:
        return (self.th1, self.th2, self.th3)[strategy_id - 1]


PAPER_THRESHOLDS = Thresholds()


@dataclass(frozen=True)
class StrategyVerdict:
    recording_id: str
    strategy_id: int
    statistic: float
    threshold_used: float
    flagged_poor: bool
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy_id,
            "statistic": None if math.isnan(self.statistic) else self.statistic,
            "threshold": self.threshold_used,
            "flagged_poor": self.flagged_poor,
            "degenerate": self.degenerate,
        }


def balance_statistic(ssd: Annotation) -> float | None:
    durations = list(speaker_durations(ssd).values())
    if len(durations) < 2 or max(durations) == 0:
        return None
    return min(durations) / max(durations)


def overlap_statistic(ssd: Annotation) -> float | None:
    total = total_speaker_time(ssd)
    if total == 0:
        return None
    return (total - union_duration(ssd)) / total


def deviation_statistic(ssd: Annotation, csd: Annotation) -> float | None:
    result = score_der(ref=csd, hyp=ssd)
    if result.degenerate:
        return None
    return result.der


def flag(strategy_id: int, statistic: float, threshold: float) -> bool:
    """Threshold rule; equality counts as flagged on every check."""
    if strategy_id == 1:
        return not statistic > threshold
    return not statistic < threshold


def _verdict(rid: str, sid: int, stat: float | None, th: float) -> StrategyVerdict:
    if stat is None:
        return StrategyVerdict(rid, sid, 0.0 if sid == 1 else float("nan"), th, True, True)
    return StrategyVerdict(rid, sid, stat, th, flag(sid, stat, th))


def strategy1_balance(ssd: Annotation, th: Thresholds = PAPER_THRESHOLDS) -> StrategyVerdict:
    return _verdict(ssd.recording_id, 1, balance_statistic(ssd), th.th1)


def strategy2_overlap(ssd: Annotation, th: Thresholds = PAPER_THRESHOLDS) -> StrategyVerdict:
    return _verdict(ssd.recording_id, 2, overlap_statistic(ssd), th.th2)


def strategy3_deviation(
    ssd: Annotation, csd: Annotation, th: Thresholds = PAPER_THRESHOLDS
) -> StrategyVerdict:
    return _verdict(ssd.recording_id, 3, deviation_statistic(ssd, csd), th.th3)


def all_verdicts(
    ssd: Annotation, csd: Annotation, th: Thresholds = PAPER_THRESHOLDS
) -> dict[int, StrategyVerdict]:
    return {
        1: strategy1_balance(ssd, th),
        2: strategy2_overlap(ssd, th),
        3: strategy3_deviation(ssd, csd, th),
    }


def rethreshold(v: StrategyVerdict, th: Thresholds) -> StrategyVerdict:
    """Re-apply a new threshold to an already measured verdict."""
    t = th.for_strategy(v.strategy_id)
    if v.degenerate:
        return StrategyVerdict(v.recording_id, v.strategy_id, v.statistic, t, True, True)
    return StrategyVerdict(
        v.recording_id, v.strategy_id, v.statistic, t, flag(v.strategy_id, v.statistic, t)
    )
