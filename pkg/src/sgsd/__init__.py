"""Separation-guided speaker diarization: scoring, quality checks and selection."""

__version__ = "0.1.0"

from .der import CorpusScore, DerBreakdown, SpeakerMapping, optimal_mapping, score_corpus, score_der
from .estimator import SGSDSelector
from .rttm_io import apply_uem, parse_rttm, parse_uem, read_rttm, serialize_rttm, write_rttm
from .selector import (
    CombinationMode,
    DetectionMetrics,
    SelectionReport,
    combine_flags,
    evaluate_detection,
    oracle_select,
    select,
)
from .sep_metrics import PERFECT_SISNR, PermutationResult, SampleVector, si_snr, upit_loss
from .simulator import SimConfig, run_benchmark
from .strategies import (
    StrategyVerdict,
    Thresholds,
    strategy1_balance,
    strategy2_overlap,
    strategy3_deviation,
)
from .timeline import (
    Annotation,
    TimeInterval,
    Turn,
    segment_decomposition,
    speaker_duration,
    union_duration,
)

__all__ = [
    "Annotation",
    "CombinationMode",
    "CorpusScore",
    "DerBreakdown",
    "DetectionMetrics",
    "PERFECT_SISNR",
    "PermutationResult",
    "SGSDSelector",
    "SampleVector",
    "SelectionReport",
    "SimConfig",
    "SpeakerMapping",
    "StrategyVerdict",
    "Thresholds",
    "TimeInterval",
    "Turn",
    "apply_uem",
    "combine_flags",
    "evaluate_detection",
    "optimal_mapping",
    "oracle_select",
    "parse_rttm",
    "parse_uem",
    "read_rttm",
    "run_benchmark",
    "score_corpus",
    "score_der",
    "segment_decomposition",
    "select",
    "serialize_rttm",
    "si_snr",
    "speaker_duration",
    "strategy1_balance",
    "strategy2_overlap",
    "strategy3_deviation",
    "union_duration",
    "upit_loss",
    "write_rttm",
]
