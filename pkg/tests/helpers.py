"""Independent oracles and random instance generators for the test suite.

Nothing here goes through the library's sweep-line decomposition or its
assignment solver: durations and DERs are recomputed by rasterising the
timeline and enumerating every injective speaker mapping.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
from hypothesis import strategies as st

from sgsd.timeline import Annotation, merge_intervals


def raster(a: Annotation, length: int, ms: bool = False) -> dict[str, np.ndarray]:
    """Boolean activity per speaker on a 10 ms (tick) or 1 ms grid."""
    scale = 10 if ms else 1
    out = {}
    for spk in a.speakers:
        arr = np.zeros(length * scale, dtype=bool)
        for t in a.turns:
            if t.speaker == spk:
                arr[t.onset * scale : t.offset * scale] = True
        out[spk] = arr
    return out


def horizon(*anns: Annotation) -> int:
    return max([t.offset for a in anns for t in a.turns], default=0) + 1


def injective_maps(hyp: list[str], ref: list[str]):
    """Every partial injective map from hyp labels to ref labels."""
    for k in range(min(len(hyp), len(ref)) + 1):
        for hs in itertools.combinations(hyp, k):
            for rs in itertools.permutations(ref, k):
                yield dict(zip(hs, rs))


def brute_force_der(ref: Annotation, hyp: Annotation, ms: bool = False):
    """Minimum DER over all injective mappings, as exact Fractions.

    Returns ``(der, miss, fa, spkerr, total)`` in raster units, or ``None``
    for the DER when the reference is empty.
    """
    n = horizon(ref, hyp)
    rr, hr = raster(ref, n, ms), raster(hyp, n, ms)
    size = n * (10 if ms else 1)
    n_ref = sum(rr.values(), np.zeros(size, dtype=np.int64))
    n_hyp = sum(hr.values(), np.zeros(size, dtype=np.int64))
    total = int(n_ref.sum())
    miss = int(np.maximum(n_ref - n_hyp, 0).sum())
    fa = int(np.maximum(n_hyp - n_ref, 0).sum())
    matched_max = int(np.minimum(n_ref, n_hyp).sum())
    overlap = {(h, r): int((hr[h] & rr[r]).sum()) for h in hr for r in rr}
    best = 0
    for m in injective_maps(list(hr), list(rr)):
        best = max(best, sum(overlap[h, r] for h, r in m.items()))
    spkerr = matched_max - best
    der = Fraction(miss + fa + spkerr, total) if total else None
    return der, miss, fa, spkerr, total


def brute_force_best_overlap(ref: Annotation, hyp: Annotation) -> int:
    n = horizon(ref, hyp)
    rr, hr = raster(ref, n), raster(hyp, n)
    overlap = {(h, r): int((hr[h] & rr[r]).sum()) for h in hr for r in rr}
    return max(sum(overlap[h, r] for h, r in m.items()) for m in injective_maps(list(hr), list(rr)))


def raster_balance(a: Annotation):
    n = horizon(a)
    durs = [int(v.sum()) for v in raster(a, n, ms=True).values()]
    if len(durs) < 2 or max(durs) == 0:
        return None
    return min(durs) / max(durs)


def raster_overlap_ratio(a: Annotation):
    n = horizon(a)
    r = raster(a, n, ms=True)
    if not r:
        return None
    stack = np.array(list(r.values()))
    total = int(stack.sum())
    if total == 0:
        return None
    union = int(stack.any(axis=0).sum())
    return (total - union) / total


def random_annotation(
    rng: np.random.Generator,
    rid: str = "rec",
    max_speakers: int = 5,
    max_turns: int = 20,
    length: int = 3000,
    prefix: str = "s",
    min_speakers: int = 0,
) -> Annotation:
    """Random annotation in ticks with disjoint same-speaker turns."""
    n_spk = int(rng.integers(min_speakers, max_speakers + 1))
    if n_spk == 0:
        return Annotation(rid)
    n_turns = int(rng.integers(n_spk, max_turns + 1))
    spans: dict[str, list[tuple[int, int]]] = {f"{prefix}{i}": [] for i in range(n_spk)}
    for k in range(n_turns):
        spk = f"{prefix}{k % n_spk if k < n_spk else int(rng.integers(n_spk))}"
        on = int(rng.integers(0, length - 1))
        off = min(length, on + int(rng.integers(1, length // 4)))
        spans[spk].append((on, off))
    return Annotation.from_ticks(rid, {s: merge_intervals(v) for s, v in spans.items()})


def random_pair(rng: np.random.Generator, **kw) -> tuple[Annotation, Annotation]:
    ref = random_annotation(rng, prefix="r", **kw)
    hyp = random_annotation(rng, prefix="h", **kw)
    return ref, hyp


@st.composite
def annotations(draw, rid="rec", max_speakers=4, max_turns=12, length=2000, min_speakers=0, prefix="s"):
    n_spk = draw(st.integers(min_speakers, max_speakers))
    spans = {}
    for i in range(n_spk):
        pairs = draw(
            st.lists(
                st.tuples(st.integers(0, length - 1), st.integers(1, length // 3)),
                min_size=1,
                max_size=max(1, max_turns // max(n_spk, 1)),
            )
        )
        spans[f"{prefix}{i}"] = merge_intervals((on, min(length, on + d)) for on, d in pairs)
    return Annotation.from_ticks(rid, spans)
