"""Synthetic two-party conversations and corrupted system hypotheses.

The generator draws alternating speaker turns with exponential turn and
pause lengths and overlaps a share of the speaker changes so that each
recording reaches a requested overlap ratio.  From the reference it then
derives

* a clustering-style hypothesis that gives every overlapped region to a
  single speaker (missed overlap, no false alarm), and
* a separation-style hypothesis that is either clean, or corrupted over a
  contiguous span by stream merging (``FAIL1``: both talkers land in one
  stream) or stream duplication (``FAIL2``: the same speech appears in both
  streams).

Randomness comes from numpy's PCG64 generator seeded with
``SeedSequence([seed, recording_index])``, so each recording is
reproducible on its own and the corpus does not depend on worker count.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .der import DerBreakdown, pool, score_der
from .parallel import parallel_map
from .rttm_io import write_rttm
from .selector import (
    TABLE_MODES,
    CombinationMode,
    DetectionMetrics,
    SelectionReport,
    detection_metrics,
    is_poor_separation,
    oracle_from_scores,
    select_from_verdicts,
)
from .strategies import PAPER_THRESHOLDS, StrategyVerdict, Thresholds, all_verdicts
from .timeline import (
    Annotation,
    intersect_intervals,
    merge_intervals,
    segment_decomposition,
    subtract_intervals,
    to_ticks,
    total_speaker_time,
    union_duration,
)

logger = logging.getLogger(__name__)

MIN_TURN_TICKS = 20
# largest share of the shorter neighbouring turn an overlap may take; < 0.5
# keeps overlaps pairwise and turns uncontained
OVERLAP_CAP = 0.45
OVERLAP_TOLERANCE = 0.02


class SimulationError(ValueError):
    pass


class InjectedMode(str, enum.Enum):
    CLEAN = "CLEAN"
    FAIL1 = "FAIL1"
    FAIL2 = "FAIL2"


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    num_recordings: int = 20
    recording_length: float = 600.0
    num_speakers: int = 2
    mean_turn: float = 3.0
    mean_pause: float = 0.5
    target_overlap_ratio: float = 0.119
    overlap_transition_frac: float = 0.5
    csd_overlap_miss_prob: float = 0.5
    ssd_failure1_prob: float = 0.25
    ssd_failure2_prob: float = 0.25
    failure_span_frac: float = 0.6
    boundary_jitter_sd: float = 0.05
    max_attempts: int = 50

    def __post_init__(self):
        for name in (
            "overlap_transition_frac",
            "csd_overlap_miss_prob",
            "ssd_failure1_prob",
            "ssd_failure2_prob",
            "failure_span_frac",
        ):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise SimulationError(f"{name} must lie in [0, 1], got {value}")
        if self.ssd_failure1_prob + self.ssd_failure2_prob > 1.0:
            raise SimulationError("failure probabilities must sum to at most 1")
        for name in ("recording_length", "mean_turn", "mean_pause"):
            if not getattr(self, name) > 0:
                raise SimulationError(f"{name} must be positive")
        if not 0.0 <= self.target_overlap_ratio < 0.5:
            raise SimulationError("target_overlap_ratio must lie in [0, 0.5)")
        if self.boundary_jitter_sd < 0:
            raise SimulationError("boundary_jitter_sd must be non-negative")
        if self.num_speakers < 2:
            raise SimulationError("num_speakers must be at least 2")
        if self.num_recordings < 0:
            raise SimulationError("num_recordings must be non-negative")

    @property
    def length_ticks(self) -> int:
        return to_ticks(self.recording_length, round_=True)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def load_config(path: str | Path) -> SimConfig:
    """Read a ``key = value`` text file (``#`` starts a comment)."""
    types = {f.name: f.type for f in dataclasses.fields(SimConfig)}
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":"
        if sep not in line:
            raise SimulationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split(sep, 1))
        if key not in types:
            raise SimulationError(f"{path}:{lineno}: unknown setting {key!r}")
        try:
            values[key] = int(value) if types[key] in ("int", int) else float(value)
        except ValueError:
            raise SimulationError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return SimConfig(**values)


def dump_config(cfg: SimConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in cfg.to_dict().items())


def recording_rng(cfg: SimConfig, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, index])))


def _exp_ticks(rng: np.random.Generator, mean_s: float, size=None):
    return np.rint(rng.exponential(mean_s * 100, size)).astype(np.int64)


def _allocate_overlaps(caps: np.ndarray, weights: np.ndarray, total: int) -> np.ndarray:
    """Split ``total`` ticks over slots proportional to ``weights`` under ``caps``."""
    if total <= 0:
        return np.zeros_like(caps)
    lo, hi = 0.0, float(caps.max() / weights.min()) + 1.0
    for _ in range(100):
        mid = (lo + hi) / 2
        if np.minimum(caps, mid * weights).sum() < total:
            lo = mid
        else:
            hi = mid
    alloc = np.minimum(caps, np.floor(hi * weights)).astype(np.int64)
    # settle rounding so the allocation sums exactly to total
    diff = total - int(alloc.sum())
    order = np.argsort(-weights, kind="stable")
    k = 0
    while diff != 0 and k < 4 * len(order):
        i = order[k % len(order)]
        if diff > 0 and alloc[i] < caps[i]:
            alloc[i] += 1
            diff -= 1
        elif diff < 0 and alloc[i] > 0:
            alloc[i] -= 1
            diff += 1
        k += 1
    return alloc


def overlap_ratio(a: Annotation) -> float:
    total = total_speaker_time(a)
    return (total - union_duration(a)) / total if total else 0.0


def _draw_reference(cfg: SimConfig, rng: np.random.Generator, recording_id: str) -> Annotation:
    length = cfg.length_ticks
    target = cfg.target_overlap_ratio
    # draw enough turns to fill the recording even with overlap shrinkage
    durations: list[int] = []
    covered = 0
    while covered < length * 1.1 + 10 * cfg.mean_turn * 100:
        d = max(MIN_TURN_TICKS, int(_exp_ticks(rng, cfg.mean_turn)))
        durations.append(d)
        covered += int(d * (1 - target))
    dur = np.array(durations, dtype=np.int64)
    n_trans = len(dur) - 1
    gaps = _exp_ticks(rng, cfg.mean_pause, n_trans)
    chosen = rng.random(n_trans) < cfg.overlap_transition_frac
    weights = rng.exponential(1.0, n_trans) + 0.05
    caps = np.floor(OVERLAP_CAP * np.minimum(dur[:-1], dur[1:])).astype(np.int64)

    want = int(round(target * dur.sum()))
    if want and caps[chosen].sum() < want:
        chosen = np.ones(n_trans, dtype=bool)
        if caps.sum() < want:
            raise SimulationError(
                f"overlap ratio {target} is infeasible with mean_turn={cfg.mean_turn}"
            )
    overlaps = np.zeros(n_trans, dtype=np.int64)
    if want:
        overlaps[chosen] = _allocate_overlaps(caps[chosen], weights[chosen], want)

    n_spk = cfg.num_speakers
    speaker = int(rng.integers(n_spk))
    start = int(_exp_ticks(rng, cfg.mean_pause))
    spans: dict[str, list[tuple[int, int]]] = {f"spk{i + 1}": [] for i in range(n_spk)}
    for k, d in enumerate(dur):
        if start >= length:
            break
        spans[f"spk{speaker + 1}"].append((start, min(start + int(d), length)))
        if k < n_trans:
            end = start + int(d)
            start = end - int(overlaps[k]) if overlaps[k] else end + int(gaps[k])
            step = int(rng.integers(1, n_spk))
            speaker = (speaker + step) % n_spk
    return Annotation.from_ticks(recording_id, spans)


def generate_reference(
    cfg: SimConfig, rng: np.random.Generator, recording_id: str = "sim0000"
) -> Annotation:
    """Draw a reference conversation whose overlap ratio is near the target.

    Recordings outside ``target +/- 0.02`` are redrawn; running out of
    attempts raises :class:`SimulationError`.
    """
    for _ in range(cfg.max_attempts):
        ref = _draw_reference(cfg, rng, recording_id)
        if abs(overlap_ratio(ref) - cfg.target_overlap_ratio) <= OVERLAP_TOLERANCE:
            return ref
    raise SimulationError(
        f"could not reach overlap ratio {cfg.target_overlap_ratio} "
        f"within {cfg.max_attempts} attempts"
    )


def _jitter(
    pairs: Sequence[tuple[int, int]], sd: float, rng: np.random.Generator, horizon: int
) -> list[tuple[int, int]]:
    if sd <= 0 or not pairs:
        return list(pairs)
    noise = np.rint(rng.normal(0.0, sd * 100, (len(pairs), 2))).astype(np.int64)
    out = []
    for (on, off), (dn, df) in zip(pairs, noise):
        on, off = max(0, on + int(dn)), min(horizon, off + int(df))
        if off > on:
            out.append((on, off))
    return out


def _containing_turn_length(ref: Annotation, speaker: str, t: int) -> int:
    for on, off in ref.regions(speaker):
        if on <= t < off:
            return off - on
    return 0


def corrupt_csd(ref: Annotation, cfg: SimConfig, rng: np.random.Generator) -> Annotation:
    """Single-speaker-per-region hypothesis: overlap is given to one talker."""
    if len(ref.speakers) < 2:
        raise SimulationError("CSD corruption needs at least two reference speakers")
    owned: dict[str, list[tuple[int, int]]] = {s: [] for s in ref.speakers}
    for seg in segment_decomposition(ref, ref):
        active = sorted(seg.active_a)
        if len(active) == 1:
            owner = active[0]
        elif rng.random() < cfg.csd_overlap_miss_prob:
            owner = max(
                active,
                key=lambda s: (_containing_turn_length(ref, s, seg.interval.onset), s),
            )
        else:
            owner = active[int(rng.integers(len(active)))]
        owned[owner].append((seg.interval.onset, seg.interval.offset))

    horizon = max(cfg.length_ticks, max(t.offset for t in ref.turns))
    turns = []
    for spk in ref.speakers:
        for on, off in _jitter(merge_intervals(owned[spk]), cfg.boundary_jitter_sd, rng, horizon):
            turns.append((on, off, spk))
    # one cluster per region: trim each turn to start after everything earlier
    turns.sort()
    clipped: dict[str, list[tuple[int, int]]] = {}
    last_end = 0
    for on, off, spk in turns:
        on = max(on, last_end)
        if off > on:
            clipped.setdefault(spk, []).append((on, off))
            last_end = off
    order = sorted(clipped, key=lambda s: clipped[s][0][0])
    labels = {spk: f"C{i + 1}" for i, spk in enumerate(order)}
    return Annotation.from_ticks(
        ref.recording_id, {labels[s]: merge_intervals(v) for s, v in clipped.items()}
    )


def corrupt_ssd(
    ref: Annotation,
    cfg: SimConfig,
    rng: np.random.Generator,
    mode: InjectedMode | str | None = None,
    span: tuple[int, int] | None = None,
) -> tuple[Annotation, InjectedMode]:
    """Two-stream hypothesis, optionally corrupted over a contiguous span.

    ``mode`` and ``span`` (ticks) are drawn from ``cfg`` unless given.
    """
    if len(ref.speakers) != 2:
        raise SimulationError("SSD corruption needs exactly two reference speakers")
    u = rng.random()
    if mode is None:
        if u < cfg.ssd_failure1_prob:
            mode = InjectedMode.FAIL1
        elif u < cfg.ssd_failure1_prob + cfg.ssd_failure2_prob:
            mode = InjectedMode.FAIL2
        else:
            mode = InjectedMode.CLEAN
    mode = InjectedMode(mode)

    horizon = max(cfg.length_ticks, max(t.offset for t in ref.turns))
    if span is None:
        width = int(round(cfg.failure_span_frac * horizon))
        lo = int(rng.integers(0, horizon - width + 1))
        span = (lo, lo + width)
    first = int(rng.integers(2))
    order = [ref.speakers[first], ref.speakers[1 - first]]
    streams = {f"stream{i + 1}": list(ref.regions(spk)) for i, spk in enumerate(order)}

    if mode is not InjectedMode.CLEAN:
        inside = intersect_intervals(ref.support(), [span])
        for name in streams:
            streams[name] = subtract_intervals(merge_intervals(streams[name]), [span])
        if mode is InjectedMode.FAIL1:
            target = f"stream{int(rng.integers(2)) + 1}"
            streams[target] = merge_intervals(streams[target] + inside)
        else:
            for name in streams:
                streams[name] = merge_intervals(streams[name] + inside)

    jittered = {
        name: merge_intervals(_jitter(pairs, cfg.boundary_jitter_sd, rng, horizon))
        for name, pairs in streams.items()
    }
    return Annotation.from_ticks(ref.recording_id, jittered), mode


@dataclass(frozen=True)
class SimulatedUtterance:
    reference: Annotation
    csd_hypothesis: Annotation
    ssd_hypothesis: Annotation
    injected_mode: InjectedMode

    @property
    def recording_id(self) -> str:
        return self.reference.recording_id


def recording_id_for(index: int) -> str:
    return f"sim{index:04d}"


def simulate_recording(cfg: SimConfig, index: int) -> SimulatedUtterance:
    rng = recording_rng(cfg, index)
    ref = generate_reference(cfg, rng, recording_id_for(index))
    csd = corrupt_csd(ref, cfg, rng)
    if cfg.num_speakers == 2:
        ssd, mode = corrupt_ssd(ref, cfg, rng)
    else:
        # multi-talker separation failures are not modelled
        ssd, mode = ref.relabel({s: f"stream{i + 1}" for i, s in enumerate(ref.speakers)}), InjectedMode.CLEAN
    return SimulatedUtterance(ref, csd, ssd, mode)


class _SimulateTask:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg

    def __call__(self, index: int) -> SimulatedUtterance:
        return simulate_recording(self.cfg, index)


def generate_corpus(cfg: SimConfig, jobs: int = 1) -> list[SimulatedUtterance]:
    return parallel_map(_SimulateTask(cfg), list(range(cfg.num_recordings)), jobs)


@dataclass(frozen=True)
class _Scored:
    verdicts: dict[int, StrategyVerdict]
    der_csd: DerBreakdown
    der_ssd: DerBreakdown


class _ScoreTask:
    def __init__(self, thresholds: Thresholds):
        self.thresholds = thresholds

    def __call__(self, utt: SimulatedUtterance) -> _Scored:
        return _Scored(
            all_verdicts(utt.ssd_hypothesis, utt.csd_hypothesis, self.thresholds),
            score_der(utt.reference, utt.csd_hypothesis),
            score_der(utt.reference, utt.ssd_hypothesis),
        )


@dataclass(frozen=True)
class BenchmarkResult:
    config: SimConfig
    thresholds: Thresholds
    utterances: list[SimulatedUtterance]
    reports: dict[CombinationMode, SelectionReport]
    detection: dict[CombinationMode, DetectionMetrics]
    corpus_der: dict[str, DerBreakdown]
    positives: dict[str, bool]

    @property
    def references(self) -> dict[str, Annotation]:
        return {u.recording_id: u.reference for u in self.utterances}

    @property
    def csd(self) -> dict[str, Annotation]:
        return {u.recording_id: u.csd_hypothesis for u in self.utterances}

    @property
    def ssd(self) -> dict[str, Annotation]:
        return {u.recording_id: u.ssd_hypothesis for u in self.utterances}

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "thresholds": dataclasses.asdict(self.thresholds),
            "recordings": [
                {
                    "recording_id": u.recording_id,
                    "injected_mode": u.injected_mode.value,
                    "overlap_ratio": overlap_ratio(u.reference),
                    "poor_separation": self.positives[u.recording_id],
                }
                for u in self.utterances
            ],
            "corpus_der": {k: v.to_dict() for k, v in self.corpus_der.items()},
            "detection": {m.value: d.to_dict() for m, d in self.detection.items()},
            "selection": {m.value: r.to_dict() for m, r in self.reports.items()},
        }


def run_benchmark(
    cfg: SimConfig,
    out_dir: str | Path | None = None,
    jobs: int = 1,
    thresholds: Thresholds = PAPER_THRESHOLDS,
    modes: Sequence[CombinationMode] = TABLE_MODES,
) -> BenchmarkResult:
    """Simulate a corpus, run every selection mode and score the outcome.

    When ``out_dir`` is given, reference/CSD/SSD RTTM files (one per
    recording) and ``report.json`` are written there.
    """
    utterances = generate_corpus(cfg, jobs)
    scored = dict(
        zip((u.recording_id for u in utterances), parallel_map(_ScoreTask(thresholds), utterances, jobs))
    )
    csd = {u.recording_id: u.csd_hypothesis for u in utterances}
    ssd = {u.recording_id: u.ssd_hypothesis for u in utterances}
    verdicts = {rid: s.verdicts for rid, s in scored.items()}
    der_csd = {rid: s.der_csd for rid, s in scored.items()}
    der_ssd = {rid: s.der_ssd for rid, s in scored.items()}
    positives = {rid: is_poor_separation(der_ssd[rid], der_csd[rid]) for rid in scored}

    reports: dict[CombinationMode, SelectionReport] = {}
    detection: dict[CombinationMode, DetectionMetrics] = {}
    corpus: dict[str, DerBreakdown] = {
        "CSD": pool(der_csd.values()),
        "SSD": pool(der_ssd.values()),
    }
    for mode in modes:
        mode = CombinationMode.parse(mode)
        if mode is CombinationMode.ORACLE:
            continue
        report = select_from_verdicts(verdicts, ssd, csd, thresholds, mode)
        reports[mode] = report
        detection[mode] = detection_metrics(report.flags, positives)
        corpus[mode.value] = pool(
            der_csd[rid] if r.flagged else der_ssd[rid] for rid, r in report.recordings.items()
        )
    oracle = oracle_from_scores(verdicts, ssd, csd, der_ssd, der_csd, thresholds)
    reports[CombinationMode.ORACLE] = oracle
    detection[CombinationMode.ORACLE] = detection_metrics(oracle.flags, positives)
    corpus["ORACLE"] = pool(
        der_csd[rid] if r.flagged else der_ssd[rid] for rid, r in oracle.recordings.items()
    )

    result = BenchmarkResult(cfg, thresholds, utterances, reports, detection, corpus, positives)
    if out_dir is not None:
        write_benchmark(result, out_dir)
    return result


def write_benchmark(result: BenchmarkResult, out_dir: str | Path) -> None:
    out = Path(out_dir)
    for name, corpus in (("reference", result.references), ("csd", result.csd), ("ssd", result.ssd)):
        sub = out / name
        sub.mkdir(parents=True, exist_ok=True)
        for rid, ann in corpus.items():
            write_rttm(sub / f"{rid}.rttm", [ann])
    (out / "config.txt").write_text(dump_config(result.config), encoding="utf-8")
    (out / "report.json").write_text(
        json.dumps(result.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n",
        encoding="utf-8",
    )
