"""Input checks shared by the estimator API and the CLI."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .timeline import Annotation


def check_utterance_pairs(X) -> list[tuple[Annotation, Annotation]]:
    """Normalise ``X`` to a list of ``(csd, ssd)`` annotation pairs.

    Accepts a sequence of pairs or a mapping ``{recording_id: (csd, ssd)}``
    (taken in sorted key order).
    """
    if isinstance(X, Mapping):
        X = [X[k] for k in sorted(X)]
    if isinstance(X, np.ndarray):
        X = X.tolist() if X.ndim == 2 else list(X)
    try:
        pairs = list(X)
    except TypeError:
        raise TypeError(f"expected a sequence of (csd, ssd) pairs, got {type(X).__name__}") from None
    out = []
    for i, pair in enumerate(pairs):
        try:
            csd, ssd = pair
        except (TypeError, ValueError):
            raise ValueError(f"X[{i}] is not a (csd, ssd) pair") from None
        if not isinstance(csd, Annotation) or not isinstance(ssd, Annotation):
            raise TypeError(f"X[{i}] must hold two Annotation objects")
        if csd.recording_id != ssd.recording_id:
            raise ValueError(
                f"X[{i}] pairs recordings {csd.recording_id!r} and {ssd.recording_id!r}"
            )
        out.append((csd, ssd))
    if not out:
        raise ValueError("X is empty")
    return out


def check_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != n:
        raise ValueError(f"y must be 1-D with {n} entries, got shape {y.shape}")
    return y.astype(bool)


def pairs_from_corpora(
    csd: Mapping[str, Annotation], ssd: Mapping[str, Annotation]
) -> tuple[list[str], list[tuple[Annotation, Annotation]]]:
    """Align two corpora by recording id into estimator input."""
    from .selector import check_same_recordings

    check_same_recordings(ssd, csd)
    ids = sorted(csd)
    return ids, [(csd[k], ssd[k]) for k in ids]

