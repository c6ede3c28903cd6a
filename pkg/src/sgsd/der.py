"""Diarization error rate with an optimal one-to-one speaker mapping.

Scoring follows the usual NIST decomposition: every elementary segment
contributes missed speech, false alarm and speaker error weighted by its
duration, overlap is always scored and the forgiveness collar defaults to
zero.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .timeline import (
    Annotation,
    TimelineError,
    merge_intervals,
    segment_decomposition,
    subtract_intervals,
    to_seconds,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpeakerMapping:
    """Injective map from hypothesis to reference labels.

    Only pairs with positive overlap are kept.  ``matched`` is the total
    overlap of the mapped pairs in ticks.
    """

    pairs: Mapping[str, str] = field(default_factory=dict)
    matched: int = 0

    @property
    def matched_s(self) -> float:
        return to_seconds(self.matched)

    def __getitem__(self, hyp_label: str) -> str:
        return self.pairs[hyp_label]

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class DerBreakdown:
    """Scored error components, all stored in integer ticks.

    Rates are fractions of ``scored`` (total reference speaker time).  An
    empty reference makes the result ``degenerate``: its rates are 0 when
    there is no error and ``inf`` otherwise.
    """

    missed: int
    false_alarm: int
    speaker_error: int
    scored: int
    mapping: SpeakerMapping | None = None

    @property
    def degenerate(self) -> bool:
        return self.scored == 0

    def _rate(self, ticks: int) -> float:
        if self.scored == 0:
            return math.inf if ticks else 0.0
        return ticks / self.scored

    def exact_der(self) -> Fraction | None:
        if self.scored == 0:
            return None
        return Fraction(self.missed + self.false_alarm + self.speaker_error, self.scored)

    @property
    def miss_rate(self) -> float:
        return self._rate(self.missed)

    @property
    def fa_rate(self) -> float:
        return self._rate(self.false_alarm)

    @property
    def spkerr_rate(self) -> float:
        return self._rate(self.speaker_error)

    @property
    def der(self) -> float:
        return self._rate(self.missed + self.false_alarm + self.speaker_error)

    @property
    def missed_speech_s(self) -> float:
        return to_seconds(self.missed)

    @property
    def false_alarm_s(self) -> float:
        return to_seconds(self.false_alarm)

    @property
    def speaker_error_s(self) -> float:
        return to_seconds(self.speaker_error)

    @property
    def scored_speaker_time_s(self) -> float:
        return to_seconds(self.scored)

    def __add__(self, other: "DerBreakdown") -> "DerBreakdown":
        return DerBreakdown(
            self.missed + other.missed,
            self.false_alarm + other.false_alarm,
            self.speaker_error + other.speaker_error,
            self.scored + other.scored,
        )

    def to_dict(self) -> dict:
        out = {
            "missed_speech": self.missed_speech_s,
            "false_alarm": self.false_alarm_s,
            "speaker_error": self.speaker_error_s,
            "scored_speaker_time": self.scored_speaker_time_s,
            "miss_rate": _json_rate(self.miss_rate),
            "fa_rate": _json_rate(self.fa_rate),
            "spkerr_rate": _json_rate(self.spkerr_rate),
            "der": _json_rate(self.der),
            "degenerate": self.degenerate,
        }
        if self.mapping is not None:
            out["mapping"] = dict(sorted(self.mapping.pairs.items()))
        return out


def _json_rate(x: float):
    return "inf" if math.isinf(x) else x


EMPTY_BREAKDOWN = DerBreakdown(0, 0, 0, 0)


def overlap_matrix(ref: Annotation, hyp: Annotation):
    """Pairwise co-activity (ticks) between reference and hypothesis speakers.

    Rows follow ``ref.speakers`` and columns ``hyp.speakers`` (both sorted).
    """
    ref_labels, hyp_labels = list(ref.speakers), list(hyp.speakers)
    ri = {s: i for i, s in enumerate(ref_labels)}
    hi = {s: i for i, s in enumerate(hyp_labels)}
    mat = np.zeros((len(ref_labels), len(hyp_labels)), dtype=np.int64)
    for seg in segment_decomposition(ref, hyp):
        d = seg.interval.duration
        for r in seg.active_a:
            for h in seg.active_b:
                mat[ri[r], hi[h]] += d
    return mat, ref_labels, hyp_labels


def _best_total(mat: np.ndarray) -> int:
    if mat.size == 0:
        return 0
    rows, cols = linear_sum_assignment(mat, maximize=True)
    return int(mat[rows, cols].sum())


def _assign(mat: np.ndarray) -> list[tuple[int, int]]:
    """Maximum-weight assignment with lexicographic tie-breaking.

    Rows (then columns) are visited in label order; each row takes the
    first column that still admits an optimal completion, or stays
    unmatched when that is optimal.
    """
    best = _best_total(mat)
    pairs = []
    fixed = 0
    rows = list(range(mat.shape[0]))
    cols = list(range(mat.shape[1]))
    for r in list(rows):
        rest_rows = [x for x in rows if x != r]
        chosen = None
        for c in cols:
            if mat[r, c] <= 0:
                continue
            rest_cols = [x for x in cols if x != c]
            sub = mat[np.ix_(rest_rows, rest_cols)]
            if fixed + int(mat[r, c]) + _best_total(sub) == best:
                chosen = c
                break
        if chosen is not None:
            pairs.append((r, chosen))
            fixed += int(mat[r, chosen])
            cols.remove(chosen)
        rows.remove(r)
    return pairs


def optimal_mapping(ref: Annotation, hyp: Annotation) -> SpeakerMapping:
    """Hypothesis-to-reference mapping maximising total overlap."""
    if ref.recording_id != hyp.recording_id:
        raise TimelineError(
            f"recording mismatch: {ref.recording_id!r} vs {hyp.recording_id!r}"
        )
    mat, ref_labels, hyp_labels = overlap_matrix(ref, hyp)
    pairs = _assign(mat)
    return SpeakerMapping(
        {hyp_labels[c]: ref_labels[r] for r, c in pairs},
        sum(int(mat[r, c]) for r, c in pairs),
    )


def collar_regions(ref: Annotation, collar: int) -> list[tuple[int, int]]:
    """No-score zones of ``collar`` ticks around every reference boundary."""
    zones = []
    for t in ref.turns:
        for b in (t.onset, t.offset):
            zones.append((max(0, b - collar), b + collar))
    return merge_intervals(zones)


def score_der(
    ref: Annotation,
    hyp: Annotation,
    scoring_regions: Sequence[tuple[int, int]] | None = None,
    collar: int = 0,
) -> DerBreakdown:
    """Score ``hyp`` against ``ref``.

    ``scoring_regions`` (tick pairs) restricts scoring like a UEM file;
    ``collar`` (ticks) removes that much time on each side of every
    reference boundary.
    """
    if ref.recording_id != hyp.recording_id:
        raise TimelineError(
            f"recording mismatch: {ref.recording_id!r} vs {hyp.recording_id!r}"
        )
    if collar < 0:
        raise ValueError("collar must be non-negative")
    if collar:
        zones = collar_regions(ref, collar)
        horizon = max([t.offset for t in ref.turns + hyp.turns], default=0)
        base = merge_intervals(scoring_regions) if scoring_regions is not None else [(0, horizon)]
        scoring_regions = subtract_intervals(base, zones)
    if scoring_regions is not None:
        ref, hyp = ref.crop(scoring_regions), hyp.crop(scoring_regions)

    mapping = optimal_mapping(ref, hyp)
    # mapped pairs keyed by reference label
    ref_to_hyp = {r: h for h, r in mapping.pairs.items()}
    missed = fa = spkerr = scored = 0
    for seg in segment_decomposition(ref, hyp):
        d = seg.interval.duration
        n_ref, n_hyp = len(seg.active_a), len(seg.active_b)
        n_correct = sum(1 for r in seg.active_a if ref_to_hyp.get(r) in seg.active_b)
        scored += d * n_ref
        missed += d * max(n_ref - n_hyp, 0)
        fa += d * max(n_hyp - n_ref, 0)
        spkerr += d * (min(n_ref, n_hyp) - n_correct)
    if scored == 0:
        logger.warning("recording %r has no reference speech; DER is degenerate", ref.recording_id)
    return DerBreakdown(missed, fa, spkerr, scored, mapping)


@dataclass(frozen=True)
class CorpusScore:
    per_recording: Mapping[str, DerBreakdown]
    total: DerBreakdown

    def to_dict(self) -> dict:
        return {
            "recordings": {k: v.to_dict() for k, v in sorted(self.per_recording.items())},
            "corpus": self.total.to_dict(),
        }


def pool(breakdowns: Iterable[DerBreakdown]) -> DerBreakdown:
    """Pool second-counts across recordings (not an average of rates)."""
    total = EMPTY_BREAKDOWN
    for b in breakdowns:
        total = total + b
    return total


def score_corpus(
    refs: Mapping[str, Annotation],
    hyps: Mapping[str, Annotation],
    uem: Mapping[str, Sequence[tuple[int, int]]] | None = None,
    collar: int = 0,
) -> CorpusScore:
    """Score every reference recording and pool the results.

    A recording missing from ``hyps`` is scored against an empty
    hypothesis; hypothesis-only recordings are scored against an empty
    reference (pure false alarm).
    """
    per = {}
    for rid in sorted(set(refs) | set(hyps)):
        ref = refs.get(rid)
        hyp = hyps.get(rid)
        if hyp is None:
            logger.warning("no hypothesis for recording %r; scoring as empty", rid)
            hyp = Annotation(rid)
        if ref is None:
            logger.warning("no reference for recording %r; scoring as empty", rid)
            ref = Annotation(rid)
        regions = uem.get(rid) if uem is not None else None
        per[rid] = score_der(ref, hyp, regions, collar)
    return CorpusScore(per, pool(per.values()))


def format_table(rows: Sequence[tuple[str, DerBreakdown]], label: str = "Recording") -> str:
    """Aligned MISS/FA/SpkErr/DER table in percent with two decimals."""
    def pct(x: float) -> str:
        return "inf" if math.isinf(x) else f"{100 * x:.2f}"

    header = (label, "MISS (%)", "FA (%)", "SpkErr (%)", "DER (%)")
    body = [
        (name, pct(b.miss_rate), pct(b.fa_rate), pct(b.spkerr_rate), pct(b.der))
        for name, b in rows
    ]
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(5)]
    lines = []
    for r in [header, *body]:
        lines.append(
            "  ".join(
                r[i].ljust(widths[i]) if i == 0 else r[i].rjust(widths[i]) for i in range(5)
            )
        )
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines)
