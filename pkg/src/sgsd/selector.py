"""Per-utterance selection between clustering- and separation-based results.

For every recording the three separation-quality checks are evaluated on
the SSD/CSD pair, their flags are combined according to a
:class:`CombinationMode`, and the CSD result is kept for flagged
recordings while the SSD result is kept for the rest.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .der import DerBreakdown, pool, score_der
from .strategies import PAPER_THRESHOLDS, StrategyVerdict, Thresholds, all_verdicts
from .timeline import Annotation

logger = logging.getLogger(__name__)


class SelectionError(ValueError):
    pass


class CombinationMode(str, enum.Enum):
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"
    S1_AND_2 = "S1_AND_2"
    VOTE_1_2_3 = "VOTE_1_2_3"
    ORACLE = "ORACLE"

    @classmethod
    def parse(cls, value: "str | CombinationMode") -> "CombinationMode":
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("&", "_AND_").replace("-", "_")
        aliases = {
            "SGSD1": "S1",
            "SGSD2": "S2",
            "SGSD3": "S3",
            "S1_AND_2": "S1_AND_2",
            "SGSD1_AND_2": "S1_AND_2",
            "S12": "S1_AND_2",
            "VOTE": "VOTE_1_2_3",
            "SGSD1_AND_2_AND_3": "VOTE_1_2_3",
        }
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise SelectionError(
                f"unknown mode {value!r}; choose from {', '.join(m.value for m in cls)}"
            ) from None

    @property
    def required_strategies(self) -> tuple[int, ...]:
        return {
            CombinationMode.S1: (1,),
            CombinationMode.S2: (2,),
            CombinationMode.S3: (3,),
            CombinationMode.S1_AND_2: (1, 2),
            CombinationMode.VOTE_1_2_3: (1, 2, 3),
            CombinationMode.ORACLE: (),
        }[self]


TABLE_MODES = (
    CombinationMode.S1,
    CombinationMode.S2,
    CombinationMode.S3,
    CombinationMode.S1_AND_2,
    CombinationMode.VOTE_1_2_3,
)


def combine_flags(
    verdicts: Mapping[int, StrategyVerdict | bool], mode: CombinationMode | str
) -> bool:
    """Combine per-strategy flags of one recording.

    ``S1_AND_2`` is the union of the two detections and ``VOTE_1_2_3`` the
    majority (at least two of three).
    """
    mode = CombinationMode.parse(mode)
    if mode is CombinationMode.ORACLE:
        raise SelectionError("ORACLE selection needs a reference; use oracle_select")
    missing = [s for s in mode.required_strategies if s not in verdicts]
    if missing:
        raise SelectionError(f"mode {mode.value} needs verdicts for strategies {missing}")
    flags = {
        s: (v.flagged_poor if isinstance(v, StrategyVerdict) else bool(v))
        for s, v in verdicts.items()
    }
    if mode is CombinationMode.S1_AND_2:
        return flags[1] or flags[2]
    if mode is CombinationMode.VOTE_1_2_3:
        return flags[1] + flags[2] + flags[3] >= 2
    return flags[mode.required_strategies[0]]


@dataclass(frozen=True)
class RecordingSelection:
    recording_id: str
    verdicts: Mapping[int, StrategyVerdict]
    flagged: bool
    chosen_system: str
    chosen: Annotation
    der_csd: DerBreakdown | None = None
    der_ssd: DerBreakdown | None = None

    def to_dict(self) -> dict:
        out = {
            "recording_id": self.recording_id,
            "verdicts": {str(k): v.to_dict() for k, v in sorted(self.verdicts.items())},
            "flagged_poor": self.flagged,
            "chosen_system": self.chosen_system,
        }
        if self.der_csd is not None:
            out["der_csd"] = self.der_csd.to_dict()
            out["der_ssd"] = self.der_ssd.to_dict()
        return out


@dataclass(frozen=True)
class SelectionReport:
    mode: CombinationMode
    thresholds: Thresholds
    recordings: Mapping[str, RecordingSelection] = field(default_factory=dict)

    @property
    def flags(self) -> dict[str, bool]:
        return {rid: r.flagged for rid, r in self.recordings.items()}

    @property
    def selected(self) -> dict[str, Annotation]:
        return {rid: r.chosen for rid, r in self.recordings.items()}

    @property
    def n_csd(self) -> int:
        return sum(r.chosen_system == "CSD" for r in self.recordings.values())

    @property
    def n_ssd(self) -> int:
        return len(self.recordings) - self.n_csd

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "thresholds": {
                "th1": self.thresholds.th1,
                "th2": self.thresholds.th2,
                "th3": self.thresholds.th3,
            },
            "summary": {
                "recordings": len(self.recordings),
                "flagged": sum(self.flags.values()),
                "chosen_csd": self.n_csd,
                "chosen_ssd": self.n_ssd,
            },
            "recordings": [self.recordings[k].to_dict() for k in sorted(self.recordings)],
        }


def check_same_recordings(ssd: Mapping[str, Annotation], csd: Mapping[str, Annotation], *others):
    names = ["SSD", "CSD", "reference"]
    sets = [set(ssd), set(csd)] + [set(o) for o in others]
    union = set().union(*sets)
    problems = []
    for name, s in zip(names, sets):
        missing = sorted(union - s)
        if missing:
            problems.append(f"missing from {name}: {', '.join(missing)}")
    if problems:
        raise SelectionError("recording sets differ; " + "; ".join(problems))


def select_one(
    ssd: Annotation,
    csd: Annotation,
    thresholds: Thresholds = PAPER_THRESHOLDS,
    mode: CombinationMode | str = CombinationMode.S3,
) -> RecordingSelection:
    rid = ssd.recording_id
    verdicts = {rid: all_verdicts(ssd, csd, thresholds)}
    report = select_from_verdicts(verdicts, {rid: ssd}, {rid: csd}, thresholds, mode)
    return report.recordings[rid]


def select(
    ssd: Mapping[str, Annotation],
    csd: Mapping[str, Annotation],
    thresholds: Thresholds = PAPER_THRESHOLDS,
    mode: CombinationMode | str = CombinationMode.S3,
    reference: Mapping[str, Annotation] | None = None,
) -> SelectionReport:
    """Flag poorly separated recordings and keep CSD for them, SSD elsewhere."""
    mode = CombinationMode.parse(mode)
    if mode is CombinationMode.ORACLE:
        if reference is None:
            raise SelectionError("ORACLE mode requires a reference")
        return oracle_select(ssd, csd, reference, thresholds)
    check_same_recordings(ssd, csd)
    verdicts = {rid: all_verdicts(ssd[rid], csd[rid], thresholds) for rid in sorted(ssd)}
    return select_from_verdicts(verdicts, ssd, csd, thresholds, mode)


def select_from_verdicts(
    verdicts: Mapping[str, Mapping[int, StrategyVerdict]],
    ssd: Mapping[str, Annotation],
    csd: Mapping[str, Annotation],
    thresholds: Thresholds,
    mode: CombinationMode | str,
) -> SelectionReport:
    """Assemble a report from verdicts that were already measured."""
    mode = CombinationMode.parse(mode)
    recs = {}
    for rid in sorted(verdicts):
        v = verdicts[rid]
        for item in v.values():
            if item.degenerate:
                logger.warning(
                    "recording %r: strategy %d input is degenerate; flagged poor",
                    rid,
                    item.strategy_id,
                )
        flagged = combine_flags(v, mode)
        recs[rid] = RecordingSelection(
            rid, v, flagged, "CSD" if flagged else "SSD", csd[rid] if flagged else ssd[rid]
        )
    return SelectionReport(mode, thresholds, recs)


def oracle_choice(der_ssd: DerBreakdown, der_csd: DerBreakdown) -> bool:
    """True when CSD is kept; ties go to CSD."""
    return not _der_key(der_ssd) < _der_key(der_csd)


def _der_key(b: DerBreakdown):
    exact = b.exact_der()
    if exact is not None:
        return exact
    return math.inf if b.der else 0


def oracle_select(
    ssd: Mapping[str, Annotation],
    csd: Mapping[str, Annotation],
    reference: Mapping[str, Annotation],
    thresholds: Thresholds = PAPER_THRESHOLDS,
) -> SelectionReport:
    """Pick whichever system has the lower DER against the reference."""
    check_same_recordings(ssd, csd, reference)
    rids = sorted(ssd)
    return oracle_from_scores(
        {rid: all_verdicts(ssd[rid], csd[rid], thresholds) for rid in rids},
        ssd,
        csd,
        {rid: score_der(reference[rid], ssd[rid]) for rid in rids},
        {rid: score_der(reference[rid], csd[rid]) for rid in rids},
        thresholds,
    )


def oracle_from_scores(
    verdicts: Mapping[str, Mapping[int, StrategyVerdict]],
    ssd: Mapping[str, Annotation],
    csd: Mapping[str, Annotation],
    der_ssd: Mapping[str, DerBreakdown],
    der_csd: Mapping[str, DerBreakdown],
    thresholds: Thresholds = PAPER_THRESHOLDS,
) -> SelectionReport:
    recs = {}
    for rid in sorted(verdicts):
        keep_csd = oracle_choice(der_ssd[rid], der_csd[rid])
        recs[rid] = RecordingSelection(
            rid,
            verdicts[rid],
            keep_csd,
            "CSD" if keep_csd else "SSD",
            csd[rid] if keep_csd else ssd[rid],
            der_csd[rid],
            der_ssd[rid],
        )
    return SelectionReport(CombinationMode.ORACLE, thresholds, recs)


def is_poor_separation(der_ssd: DerBreakdown, der_csd: DerBreakdown) -> bool:
    return _der_key(der_ssd) > _der_key(der_csd)


def poor_separation_labels(
    ssd: Mapping[str, Annotation],
    csd: Mapping[str, Annotation],
    reference: Mapping[str, Annotation],
) -> dict[str, bool]:
    """Ground-truth positives: recordings where SSD is strictly worse than CSD."""
    check_same_recordings(ssd, csd, reference)
    return {
        rid: is_poor_separation(score_der(reference[rid], ssd[rid]), score_der(reference[rid], csd[rid]))
        for rid in sorted(ssd)
    }


@dataclass(frozen=True)
class DetectionMetrics:
    true_positives: int
    false_positives: int
    true_negatives: int
    false_negatives: int

    @property
    def total(self) -> int:
        return self.true_positives + self.false_positives + self.true_negatives + self.false_negatives

    @property
    def recall(self) -> float:
        pos = self.true_positives + self.false_negatives
        return self.true_positives / pos if pos else 1.0

    @property
    def precision(self) -> float:
        flagged = self.true_positives + self.false_positives
        return self.true_positives / flagged if flagged else 1.0

    @property
    def accuracy(self) -> float:
        return (self.true_positives + self.true_negatives) / self.total if self.total else 1.0

    @classmethod
    def from_labels(cls, flags: Iterable[bool], positives: Iterable[bool]) -> "DetectionMetrics":
        tp = fp = tn = fn = 0
        for f, p in zip(flags, positives):
            if f and p:
                tp += 1
            elif f:
                fp += 1
            elif p:
                fn += 1
            else:
                tn += 1
        return cls(tp, fp, tn, fn)

    def to_dict(self) -> dict:
        return {
            "true_positives": self.true_positives,
            "false_positives": self.false_positives,
            "true_negatives": self.true_negatives,
            "false_negatives": self.false_negatives,
            "recall": self.recall,
            "precision": self.precision,
            "accuracy": self.accuracy,
        }


def detection_metrics(flags: Mapping[str, bool], positives: Mapping[str, bool]) -> DetectionMetrics:
    if set(flags) != set(positives):
        raise SelectionError("flags and ground truth cover different recordings")
    keys = sorted(flags)
    metrics = DetectionMetrics.from_labels((flags[k] for k in keys), (positives[k] for k in keys))
    if metrics.true_positives + metrics.false_positives == 0:
        logger.warning("no recordings flagged; precision undefined, reported as 1.0")
    if metrics.true_positives + metrics.false_negatives == 0:
        logger.warning("no positive recordings; recall undefined, reported as 1.0")
    return metrics


def evaluate_detection(
    flags: Mapping[str, bool],
    ssd: Mapping[str, Annotation],
    csd: Mapping[str, Annotation],
    reference: Mapping[str, Annotation],
) -> DetectionMetrics:
    """Recall/precision/accuracy of poor-separation flags against ground truth."""
    return detection_metrics(flags, poor_separation_labels(ssd, csd, reference))


def corpus_der(selected: Mapping[str, Annotation], reference: Mapping[str, Annotation]) -> DerBreakdown:
    return pool(score_der(reference[rid], selected[rid]) for rid in sorted(reference))


def format_detection_table(rows: Iterable[tuple[str, DetectionMetrics]]) -> str:
    header = ("Method", "Recall", "Precision", "Acc")
    body = [(name, f"{m.recall:.2f}", f"{m.precision:.2f}", f"{m.accuracy:.2f}") for name, m in rows]
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(4)]
    lines = [
        "  ".join(r[i].ljust(widths[i]) if i == 0 else r[i].rjust(widths[i]) for i in range(4))
        for r in [header, *body]
    ]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines)
