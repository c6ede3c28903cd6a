"""Exact interval algebra for speaker-labelled timelines.

All times are stored as integer centiseconds so that unions, intersections
and durations are exact and reproducible.  Helpers convert to and from
seconds at the boundaries of the library.
"""

from __future__ import annotations

import logging
import operator
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal, InvalidOperation
from typing import Iterable, Mapping, NamedTuple, Sequence

logger = logging.getLogger(__name__)

TICKS_PER_SECOND = 100


class TimelineError(ValueError):
    """Raised on invalid intervals, turns or annotations."""


def to_ticks(seconds, round_=False) -> int:
    """Convert seconds (str, int, float or Decimal) to integer centiseconds.

    Values with sub-centisecond precision are rejected unless ``round_`` is
    true, in which case they are rounded half-to-even.
    """
    if isinstance(seconds, bool):
        raise TimelineError(f"not a time value: {seconds!r}")
    if isinstance(seconds, int):
        return seconds * TICKS_PER_SECOND
    try:
        # repr() keeps floats such as 0.1 at their shortest decimal form
        value = Decimal(repr(seconds) if isinstance(seconds, float) else str(seconds).strip())
    except InvalidOperation:
        raise TimelineError(f"not a time value: {seconds!r}") from None
    if not value.is_finite():
        raise TimelineError(f"non-finite time value: {seconds!r}")
    scaled = value * TICKS_PER_SECOND
    ticks = scaled.to_integral_value(rounding=ROUND_HALF_EVEN)
    if ticks != scaled and not round_:
        raise TimelineError(
            f"time value {seconds!r} is finer than centisecond resolution "
            "(pass round_=True / --round to round it)"
        )
    return int(ticks)


def to_seconds(ticks: int) -> float:
    return ticks / TICKS_PER_SECOND


def format_seconds(ticks: int) -> str:
    """Render ticks as seconds with exactly two decimals."""
    sign = "-" if ticks < 0 else ""
    whole, frac = divmod(abs(ticks), TICKS_PER_SECOND)
    return f"{sign}{whole}.{frac:02d}"


@dataclass(frozen=True, order=True)
class TimeInterval:
    """Half-open interval ``[onset, offset)`` in centiseconds."""

    onset: int
    offset: int

    def __post_init__(self):
        try:
            object.__setattr__(self, "onset", operator.index(self.onset))
            object.__setattr__(self, "offset", operator.index(self.offset))
        except TypeError:
            raise TimelineError("interval bounds must be integer centiseconds") from None
        if self.onset < 0:
            raise TimelineError(f"negative onset: {self.onset}")
        if self.offset <= self.onset:
            raise TimelineError(
                f"interval offset must exceed onset: [{self.onset}, {self.offset})"
            )

    @classmethod
    def from_seconds(cls, onset, offset, round_=False) -> "TimeInterval":
        return cls(to_ticks(onset, round_), to_ticks(offset, round_))

    @property
    def duration(self) -> int:
        return self.offset - self.onset

    @property
    def onset_s(self) -> float:
        return to_seconds(self.onset)

    @property
    def offset_s(self) -> float:
        return to_seconds(self.offset)

    @property
    def duration_s(self) -> float:
        return to_seconds(self.duration)

    def intersection(self, other: "TimeInterval") -> "TimeInterval | None":
        lo, hi = max(self.onset, other.onset), min(self.offset, other.offset)
        return TimeInterval(lo, hi) if hi > lo else None

    def overlaps(self, other: "TimeInterval") -> bool:
        return self.onset < other.offset and other.onset < self.offset


@dataclass(frozen=True)
class Turn:
    interval: TimeInterval
    speaker: str
    recording_id: str
    channel: str = "1"

    def __post_init__(self):
        if not isinstance(self.speaker, str) or not self.speaker:
            raise TimelineError("speaker label must be a non-empty string")

    @property
    def onset(self) -> int:
        return self.interval.onset

    @property
    def offset(self) -> int:
        return self.interval.offset

    @property
    def duration(self) -> int:
        return self.interval.duration


def merge_intervals(pairs: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    """Union of ``(onset, offset)`` pairs as sorted, disjoint, non-touching pairs."""
    merged: list[list[int]] = []
    for on, off in sorted(pairs):
        if off <= on:
            continue
        if merged and on <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], off)
        else:
            merged.append([on, off])
    return [(on, off) for on, off in merged]


def intersect_intervals(
    a: Sequence[tuple[int, int]], b: Sequence[tuple[int, int]]
) -> list[tuple[int, int]]:
    """Intersection of two sorted disjoint interval lists."""
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if hi > lo:
            out.append((lo, hi))
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return out


def subtract_intervals(
    a: Sequence[tuple[int, int]], b: Sequence[tuple[int, int]]
) -> list[tuple[int, int]]:
    """``a`` minus ``b``; both sorted and disjoint."""
    out = []
    j = 0
    for on, off in a:
        cur = on
        while j < len(b) and b[j][1] <= cur:
            j += 1
        k = j
        while k < len(b) and b[k][0] < off:
            if b[k][0] > cur:
                out.append((cur, b[k][0]))
            cur = max(cur, b[k][1])
            k += 1
        if cur < off:
            out.append((cur, off))
    return out


@dataclass(frozen=True)
class Annotation:
    """All speaker turns of one recording.

    Same-speaker turns that overlap are merged on construction (with a
    warning); turns of different speakers may overlap freely.  Turns are
    kept sorted by ``(onset, offset, speaker)``.
    """

    recording_id: str
    turns: tuple[Turn, ...] = ()
    _regions: Mapping[str, tuple[tuple[int, int], ...]] = field(
        default=None, init=False, repr=False, compare=False, hash=False
    )

    def __post_init__(self):
        by_speaker: dict[str, list[Turn]] = {}
        for turn in self.turns:
            if not isinstance(turn, Turn):
                raise TimelineError(f"not a Turn: {turn!r}")
            if turn.recording_id != self.recording_id:
                raise TimelineError(
                    f"turn for recording {turn.recording_id!r} in annotation "
                    f"of {self.recording_id!r}"
                )
            by_speaker.setdefault(turn.speaker, []).append(turn)

        normalized: list[Turn] = []
        for speaker, turns in by_speaker.items():
            turns.sort(key=lambda t: (t.onset, t.offset))
            current = turns[0]
            for turn in turns[1:]:
                if turn.onset < current.offset:
                    logger.warning(
                        "merging overlapping turns of speaker %r in %r at %s-%s",
                        speaker,
                        self.recording_id,
                        format_seconds(turn.onset),
                        format_seconds(current.offset),
                    )
                    current = Turn(
                        TimeInterval(current.onset, max(current.offset, turn.offset)),
                        speaker,
                        self.recording_id,
                        current.channel,
                    )
                else:
                    normalized.append(current)
                    current = turn
            normalized.append(current)
        normalized.sort(key=lambda t: (t.onset, t.offset, t.speaker))
        object.__setattr__(self, "turns", tuple(normalized))

        regions = {
            spk: tuple((t.onset, t.offset) for t in normalized if t.speaker == spk)
            for spk in sorted(by_speaker)
        }
        object.__setattr__(self, "_regions", regions)

    @classmethod
    def from_dict(
        cls,
        recording_id: str,
        segments: Mapping[str, Iterable[tuple]],
        round_: bool = False,
    ) -> "Annotation":
        """Build from ``{speaker: [(onset_s, offset_s), ...]}`` in seconds.

        Zero-length segments are dropped with a warning.
        """
        turns = []
        for speaker, spans in segments.items():
            for onset, offset in spans:
                on, off = to_ticks(onset, round_), to_ticks(offset, round_)
                if on == off:
                    logger.warning(
                        "dropping zero-length turn of %r in %r", speaker, recording_id
                    )
                    continue
                turns.append(Turn(TimeInterval(on, off), speaker, recording_id))
        return cls(recording_id, tuple(turns))

    @classmethod
    def from_ticks(
        cls, recording_id: str, segments: Mapping[str, Iterable[tuple[int, int]]]
    ) -> "Annotation":
        turns = [
            Turn(TimeInterval(on, off), speaker, recording_id)
            for speaker, spans in segments.items()
            for on, off in spans
            if off > on
        ]
        return cls(recording_id, tuple(turns))

    @property
    def speakers(self) -> tuple[str, ...]:
        return tuple(self._regions)

    def regions(self, speaker: str) -> tuple[tuple[int, int], ...]:
        """Disjoint sorted ``(onset, offset)`` tick pairs of one speaker."""
        try:
            return self._regions[speaker]
        except KeyError:
            raise TimelineError(
                f"unknown speaker {speaker!r} in recording {self.recording_id!r}"
            ) from None

    def to_dict(self) -> dict[str, list[tuple[int, int]]]:
        return {spk: list(r) for spk, r in self._regions.items()}

    def support(self) -> list[tuple[int, int]]:
        return merge_intervals((t.onset, t.offset) for t in self.turns)

    def relabel(self, mapping: Mapping[str, str]) -> "Annotation":
        return Annotation(
            self.recording_id,
            tuple(
                Turn(t.interval, mapping.get(t.speaker, t.speaker), t.recording_id, t.channel)
                for t in self.turns
            ),
        )

    def crop(self, regions: Sequence[tuple[int, int]]) -> "Annotation":
        """Restrict every turn to the union of ``regions`` (tick pairs)."""
        regions = merge_intervals(regions)
        turns = []
        for t in self.turns:
            for on, off in intersect_intervals([(t.onset, t.offset)], regions):
                turns.append(Turn(TimeInterval(on, off), t.speaker, t.recording_id, t.channel))
        return Annotation(self.recording_id, tuple(turns))

    def __len__(self) -> int:
        return len(self.turns)


def speaker_duration(a: Annotation, speaker: str) -> int:
    """Total duration of one speaker's regions, in ticks."""
    return sum(off - on for on, off in a.regions(speaker))


def speaker_durations(a: Annotation) -> dict[str, int]:
    return {spk: speaker_duration(a, spk) for spk in a.speakers}


def total_speaker_time(a: Annotation) -> int:
    return sum(t.duration for t in a.turns)


def union_duration(a: Annotation) -> int:
    """Measure of the union of all turns across all speakers, in ticks."""
    return sum(off - on for on, off in a.support())


class Segment(NamedTuple):
    interval: TimeInterval
    active_a: frozenset
    active_b: frozenset


def segment_decomposition(a: Annotation, b: Annotation) -> list[Segment]:
    """Split the joint support of two annotations at every turn boundary.

    Returns sorted, disjoint segments covering exactly the union of both
    supports; within a segment the active speaker sets of ``a`` and ``b``
    are constant.
    """
    if a.recording_id != b.recording_id:
        raise TimelineError(
            f"recording mismatch: {a.recording_id!r} vs {b.recording_id!r}"
        )
    # event: (time, kind, side, speaker); kind 0 = end, 1 = start
    events = []
    for side, ann in ((0, a), (1, b)):
        for t in ann.turns:
            events.append((t.onset, 1, side, t.speaker))
            events.append((t.offset, 0, side, t.speaker))
    events.sort()

    active = ({}, {})
    segments: list[Segment] = []
    prev = None
    i = 0
    while i < len(events):
        time = events[i][0]
        if prev is not None and time > prev and (active[0] or active[1]):
            segments.append(
                Segment(TimeInterval(prev, time), frozenset(active[0]), frozenset(active[1]))
            )
        while i < len(events) and events[i][0] == time:
            _, kind, side, spk = events[i]
            counts = active[side]
            if kind:
                counts[spk] = counts.get(spk, 0) + 1
            else:
                counts[spk] -= 1
                if not counts[spk]:
                    del counts[spk]
            i += 1
        prev = time
    return segments
