"""Separation metrics on raw sample vectors: Si-SNR and the uPIT objective."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

PERFECT_SISNR = math.inf
DEFAULT_MAX_SOURCES = 8


class SeparationMetricError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SampleVector:
    samples: np.ndarray
    sample_rate: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "samples", check_samples(self.samples))

    def __len__(self):
        return len(self.samples)


def check_samples(x) -> np.ndarray:
    """Validate a 1-D, non-empty, finite signal and return it as float64."""
    if isinstance(x, SampleVector):
        return x.samples
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise SeparationMetricError(f"expected a 1-D signal, got shape {arr.shape}")
    if arr.size == 0:
        raise SeparationMetricError("empty signal")
    if not np.all(np.isfinite(arr)):
        raise SeparationMetricError("signal contains non-finite values")
    return arr


def _rate(x) -> int | None:
    return x.sample_rate if isinstance(x, SampleVector) else None


def si_snr(estimate, target, zero_mean: bool = False) -> float:
    """Scale-invariant SNR in dB.

    The estimate is projected onto the target as written, without removing
    the signal means; pass ``zero_mean=True`` for the common variant that
    centres both signals first.  A perfect reconstruction returns
    ``PERFECT_SISNR`` (+inf).
    """
    ra, rb = _rate(estimate), _rate(target)
    if ra is not None and rb is not None and ra != rb:
        raise SeparationMetricError(f"sample rate mismatch: {ra} vs {rb}")
    est, ref = check_samples(estimate), check_samples(target)
    if est.shape != ref.shape:
        raise SeparationMetricError(f"length mismatch: {est.size} vs {ref.size}")
    if zero_mean:
        est = est - est.mean()
        ref = ref - ref.mean()
    ref_energy = float(np.dot(ref, ref))
    if ref_energy == 0.0:
        raise SeparationMetricError("target has zero energy")
    if float(np.dot(est, est)) == 0.0:
        raise SeparationMetricError("estimate has zero energy; Si-SNR is -inf")
    s_target = (np.dot(est, ref) / ref_energy) * ref
    residual = est - s_target
    num = float(np.dot(s_target, s_target))
    den = float(np.dot(residual, residual))
    if den == 0.0:
        return PERFECT_SISNR
    if num == 0.0:
        return -math.inf
    return 10.0 * math.log10(num / den)


@dataclass(frozen=True)
class PermutationResult:
    """Outcome of the permutation search.

    ``permutation[i]`` is the reference index paired with estimate ``i``;
    ``pair_sisnr`` lists the Si-SNR of those pairs and ``loss`` is the mean
    negative Si-SNR.
    """

    loss: float
    permutation: tuple[int, ...]
    pair_sisnr: tuple[float, ...]


def pairwise_sisnr(estimates: Sequence, references: Sequence, zero_mean: bool = False) -> np.ndarray:
    return np.array(
        [[si_snr(e, r, zero_mean) for r in references] for e in estimates], dtype=np.float64
    )


def upit_loss(
    estimates: Sequence,
    references: Sequence,
    zero_mean: bool = False,
    max_sources: int = DEFAULT_MAX_SOURCES,
) -> PermutationResult:
    """Utterance-level permutation invariant loss with negative Si-SNR error."""
    n = len(estimates)
    if n == 0 or n != len(references):
        raise SeparationMetricError(
            f"need equal, non-zero source counts (got {n} and {len(references)})"
        )
    if n > max_sources:
        raise SeparationMetricError(
            f"{n} sources exceed the permutation-search cap of {max_sources}"
        )
    lengths = {len(check_samples(x)) for x in [*estimates, *references]}
    if len(lengths) != 1:
        raise SeparationMetricError("all signals must have the same length")

    table = pairwise_sisnr(estimates, references, zero_mean)
    best = None
    for perm in itertools.permutations(range(n)):
        values = tuple(float(table[i, perm[i]]) for i in range(n))
        loss = -sum(values) / n
        # strict < keeps the first (lexicographically smallest) minimiser
        if best is None or loss < best.loss:
            best = PermutationResult(loss, perm, values)
    return best


def read_wav(path: str | Path) -> SampleVector:
    """Load a mono 16-bit PCM or 32-bit float WAV file."""
    from scipy.io import wavfile

    try:
        rate, data = wavfile.read(str(path))
    except ValueError as exc:
        raise SeparationMetricError(f"{path}: {exc}") from None
    if data.ndim != 1:
        raise SeparationMetricError(f"{path}: expected mono audio, got {data.shape[1]} channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise SeparationMetricError(
            f"{path}: unsupported sample format {data.dtype}; use 16-bit PCM or 32-bit float"
        )
    return SampleVector(samples, int(rate))
