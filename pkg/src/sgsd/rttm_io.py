"""RTTM and UEM reading/writing.

RTTM lines look like::

    SPEAKER <file> <chan> <onset> <dur> <NA> <NA> <speaker> <NA> <NA>

UEM lines are ``<file> <chan> <onset> <offset>``.  Lines starting with
``;;`` are comments.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, TextIO

from .timeline import (
    Annotation,
    TimeInterval,
    TimelineError,
    Turn,
    format_seconds,
    merge_intervals,
    to_ticks,
)

logger = logging.getLogger(__name__)


class RttmParseError(ValueError):
    def __init__(self, message: str, line: int, column: int | None = None, source: str = "<rttm>"):
        self.line = line
        self.column = column
        self.source = source
        where = f"{source}:{line}" + (f":{column}" if column is not None else "")
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class RttmRecord:
    segment_type: str
    file_id: str
    channel: str
    onset: int
    duration: int
    speaker_name: str
    ortho: str = "<NA>"
    stype: str = "<NA>"
    confidence: str = "<NA>"
    slat: str = "<NA>"

    def __post_init__(self):
        if self.onset < 0:
            raise ValueError("RTTM onset must be non-negative")
        if self.duration <= 0:
            raise ValueError("RTTM duration must be positive")

    def to_line(self) -> str:
        return " ".join(
            [
                self.segment_type,
                self.file_id,
                self.channel,
                format_seconds(self.onset),
                format_seconds(self.duration),
                self.ortho,
                self.stype,
                self.speaker_name,
                self.confidence,
                self.slat,
            ]
        )


@dataclass(frozen=True)
class UemRegion:
    file_id: str
    channel: str
    onset: int
    offset: int

    def __post_init__(self):
        if self.offset <= self.onset:
            raise ValueError("UEM offset must exceed onset")


def _column_of(line: str, index: int) -> int:
    """1-based column of the ``index``-th whitespace-separated field."""
    pos = 0
    for k, tok in enumerate(line.split()):
        pos = line.index(tok, pos)
        if k == index:
            return pos + 1
        pos += len(tok)
    return 1


def iter_rttm_records(stream: TextIO | str, round_: bool = False, source: str | None = None):
    """Yield ``(line_number, RttmRecord)`` for every SPEAKER line."""
    text = stream if isinstance(stream, str) else stream.read()
    source = source or getattr(stream, "name", "<rttm>")
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.strip()
        if not line or line.startswith(";;"):
            continue
        fields = line.split()
        if len(fields) < 9:
            raise RttmParseError(
                f"expected 10 fields, got {len(fields)}", lineno, 1, source
            )
        if fields[0] != "SPEAKER":
            logger.warning("%s:%d: skipping %s record", source, lineno, fields[0])
            continue
        try:
            onset = to_ticks(fields[3], round_)
        except TimelineError as exc:
            raise RttmParseError(f"bad onset: {exc}", lineno, _column_of(raw, 3), source) from None
        try:
            duration = to_ticks(fields[4], round_)
        except TimelineError as exc:
            raise RttmParseError(f"bad duration: {exc}", lineno, _column_of(raw, 4), source) from None
        if onset < 0:
            raise RttmParseError("negative onset", lineno, _column_of(raw, 3), source)
        if duration < 0:
            raise RttmParseError("negative duration", lineno, _column_of(raw, 4), source)
        if duration == 0:
            logger.warning("%s:%d: dropping zero-length turn", source, lineno)
            continue
        extra = fields[5:] + ["<NA>"] * (10 - len(fields))
        yield lineno, RttmRecord(
            "SPEAKER",
            fields[1],
            fields[2],
            onset,
            duration,
            fields[7],
            ortho=extra[0],
            stype=extra[1],
            confidence=extra[3],
            slat=extra[4],
        )


def parse_rttm(stream: TextIO | str, round_: bool = False, source: str | None = None) -> dict[str, Annotation]:
    """Parse RTTM text (or a text stream) into ``{recording_id: Annotation}``.

    Pass a string containing the file *contents*; use :func:`read_rttm` for
    paths.
    """
    turns: dict[str, list[Turn]] = {}
    for _, rec in iter_rttm_records(stream, round_, source):
        turns.setdefault(rec.file_id, []).append(
            Turn(
                TimeInterval(rec.onset, rec.onset + rec.duration),
                rec.speaker_name,
                rec.file_id,
                rec.channel,
            )
        )
    return {rid: Annotation(rid, tuple(ts)) for rid, ts in sorted(turns.items())}


def read_rttm(path: str | Path, round_: bool = False) -> dict[str, Annotation]:
    path = Path(path)
    return parse_rttm(path.read_text(encoding="utf-8"), round_, str(path))


def annotation_records(a: Annotation) -> list[RttmRecord]:
    return [
        RttmRecord("SPEAKER", a.recording_id, t.channel, t.onset, t.duration, t.speaker)
        for t in a.turns
    ]


def serialize_rttm(annotations: Mapping[str, Annotation] | Iterable[Annotation]) -> str:
    """Render annotations as RTTM sorted by (file_id, onset, speaker)."""
    if isinstance(annotations, Mapping):
        annotations = annotations.values()
    records = [r for a in annotations for r in annotation_records(a)]
    records.sort(key=lambda r: (r.file_id, r.onset, r.speaker_name, r.duration))
    return "".join(r.to_line() + "\n" for r in records)


def write_rttm(path: str | Path, annotations) -> None:
    Path(path).write_text(serialize_rttm(annotations), encoding="utf-8")


def parse_uem(stream: TextIO | str, round_: bool = False, source: str = "<uem>") -> dict[str, list[UemRegion]]:
    text = stream if isinstance(stream, str) else stream.read()
    regions: dict[str, list[UemRegion]] = {}
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.strip()
        if not line or line.startswith(";;"):
            continue
        fields = line.split()
        if len(fields) != 4:
            raise RttmParseError(f"expected 4 UEM fields, got {len(fields)}", lineno, 1, source)
        try:
            onset = to_ticks(fields[2], round_)
            offset = to_ticks(fields[3], round_)
        except TimelineError as exc:
            raise RttmParseError(str(exc), lineno, None, source) from None
        if onset < 0 or offset <= onset:
            raise RttmParseError("UEM region must satisfy 0 <= onset < offset", lineno, None, source)
        regions.setdefault(fields[0], []).append(UemRegion(fields[0], fields[1], onset, offset))
    return regions


def read_uem(path: str | Path, round_: bool = False) -> dict[str, list[UemRegion]]:
    path = Path(path)
    return parse_uem(path.read_text(encoding="utf-8"), round_, str(path))


def apply_uem(a: Annotation, regions: Iterable[UemRegion] | None) -> Annotation:
    """Crop ``a`` to the union of its UEM regions; ``None`` leaves it as is."""
    if regions is None:
        return a
    regions = list(regions)
    for r in regions:
        if r.file_id != a.recording_id:
            raise ValueError(
                f"UEM region for {r.file_id!r} applied to {a.recording_id!r}"
            )
    return a.crop(merge_intervals((r.onset, r.offset) for r in regions))
