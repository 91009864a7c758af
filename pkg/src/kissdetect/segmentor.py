"""Aggregate per-second binary labels into non-overlapping positive scenes.

Two implementations are provided.  ``find_segments_oracle`` follows the
candidate-enumeration / pairwise-pruning procedure step by step and is kept
deliberately naive; ``find_segments`` produces the same output using a prefix
sum for densities and a greedy longest-first selection.
"""
from bisect import bisect_left
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .validation import check_fraction, check_label_stream, check_nonnegative_int

# Floor on the (start, end) pairs materialised per block in find_segments; the
# block budget is max(4n, this).
_MIN_BLOCK_PAIRS = 4096


@dataclass(frozen=True)
class Segment:
    """Inclusive second interval ``[start, end]`` of a label stream."""

    start: int
    end: int
    positive_count: int
    density: float

    @property
    def length(self):
        return self.end - self.start + 1

    def overlaps(self, other):
        return self.start <= other.end and other.start <= self.end

    def to_dict(self):
        return {"start_s": self.start, "end_s": self.end, "density": self.density}


def _rank(seg):
    # longer first, earlier start wins ties
    return (-seg.length, seg.start)


def segment_density(labels, start, end):
    """Fraction of ones in ``labels[start..end]`` (both ends inclusive)."""
    n = len(labels)
    if not 0 <= start <= end < n:
        raise IndexError(f"window [{start}, {end}] outside stream of length {n}")
    count = sum(1 for s in range(start, end + 1) if labels[s] == 1)
    return count / (end - start + 1)


def prune_overlaps(candidates):
    """Resolve overlapping candidates, keeping the longer one of every clash.

    Candidates are visited in canonical order (length descending, start
    ascending) so the result does not depend on the input order.  Each pair
    of overlapping segments is compared and the smaller is removed until no
    overlaps remain.
    """
    remaining = sorted(set(candidates), key=_rank)
    alive = [True] * len(remaining)
    while True:
        removed_any = False
        for a, s1 in enumerate(remaining):
            if not alive[a]:
                continue
            for b, s2 in enumerate(remaining):
                if a == b or not alive[b] or not s1.overlaps(s2):
                    continue
                # sorted by rank, so the smaller segment is the later index
                loser = max(a, b)
                alive[loser] = False
                removed_any = True
                if loser == a:
                    break
        if not removed_any:
            break
    kept = [s for s, ok in zip(remaining, alive) if ok]
    return sorted(kept, key=lambda s: s.start)


def find_segments_oracle(labels, min_len_s=10, min_density=0.7):
    """Reference segmentor: exhaustive candidate scan plus pairwise pruning."""
    P = [int(v) for v in check_label_stream(labels)]
    m = check_nonnegative_int(min_len_s, "min_len_s")
    t = check_fraction(min_density, "min_density")
    n = len(P)
    candidates = []
    for i in range(n):
        if P[i] != 1:
            continue
        for j in range(i + m + 1, n):
            if P[j] != 1:
                continue
            K = [s for s in range(i, j + 1) if P[s] == 1]
            density = len(K) / (j - i + 1)
            if density >= t:
                candidates.append(Segment(i, j, len(K), density))
    return prune_overlaps(candidates)


def _block_candidates(ones, prefix, n, length_hi, length_lo, t):
    """All qualifying (start, length) pairs with length in [length_lo, length_hi].

    Rows come out ordered by (length desc, start asc).
    """
    lengths = np.arange(length_hi, length_lo - 1, -1)
    counts = n - lengths + 1
    total = int(counts.sum())
    L = np.repeat(lengths, counts)
    offsets = np.repeat(np.cumsum(counts) - counts, counts)
    starts = np.arange(total) - offsets
    ends = starts + L - 1
    mask = (ones[starts] == 1) & (ones[ends] == 1)
    starts, ends, L = starts[mask], ends[mask], L[mask]
    pos = prefix[ends + 1] - prefix[starts]
    density = pos / L
    keep = density >= t
    return starts[keep], ends[keep], pos[keep], density[keep]


def find_segments(labels, min_len_s=10, min_density=0.7):
    """Fast segmentor with output identical to :func:`find_segments_oracle`.

    Candidate windows are generated block by block from the longest length
    down, with O(1) density lookups from a prefix-sum table.  Each block is
    filtered against the segments already kept and the survivors are taken
    greedily, which reproduces the longest-wins / earliest-start-wins pruning.
    Peak memory stays O(n) in the stream length.
    """
    P = check_label_stream(labels)
    m = check_nonnegative_int(min_len_s, "min_len_s")
    t = check_fraction(min_density, "min_density")
    n = P.size
    shortest = m + 2
    if n < shortest:
        return []
    prefix = np.concatenate(([0], np.cumsum(P, dtype=np.int64)))
    covered = np.zeros(n, dtype=np.int64)
    kept_starts, kept_ends, kept = [], [], []
    budget = max(4 * n, _MIN_BLOCK_PAIRS)

    length_hi = n
    while length_hi >= shortest:
        length_lo = length_hi
        pairs = n - length_hi + 1
        while length_lo > shortest and pairs + (n - length_lo + 2) <= budget:
            length_lo -= 1
            pairs += n - length_lo + 1
        starts, ends, pos, dens = _block_candidates(P, prefix, n, length_hi, length_lo, t)
        length_hi = length_lo - 1
        if starts.size == 0:
            continue
        if kept:
            cov = np.concatenate(([0], np.cumsum(covered)))
            free = cov[ends + 1] == cov[starts]
            starts, ends, pos, dens = starts[free], ends[free], pos[free], dens[free]
        for s, e, c, d in zip(starts.tolist(), ends.tolist(), pos.tolist(), dens.tolist()):
            k = bisect_left(kept_starts, s)
            if k > 0 and kept_ends[k - 1] >= s:
                continue
            if k < len(kept_starts) and kept_starts[k] <= e:
                continue
            kept_starts.insert(k, s)
            kept_ends.insert(k, e)
            kept.insert(k, Segment(s, e, c, d))
            covered[s:e + 1] = 1
    return kept


class SceneSegmentor(BaseEstimator):
    """Estimator wrapper turning a label stream into scene segments.

    Parameters
    ----------
    min_len_s : int
        Emitted segments satisfy ``end - start >= min_len_s + 1``, so they
        span at least ``min_len_s + 2`` seconds.
    min_density : float
        Minimum fraction of positive seconds inside a segment.
    method : {"fast", "oracle"}
    """

    def __init__(self, min_len_s=10, min_density=0.7, method="fast"):
        self.min_len_s = min_len_s
        self.min_density = min_density
        self.method = method

    def fit(self, X=None, y=None):
        check_nonnegative_int(self.min_len_s, "min_len_s")
        check_fraction(self.min_density, "min_density")
        if self.method not in ("fast", "oracle"):
            raise ValueError(f"unknown method {self.method!r}")
        return self

    def predict(self, labels):
        """Segments found in a single label stream."""
        self.fit()
        fn = find_segments if self.method == "fast" else find_segments_oracle
        return fn(labels, self.min_len_s, self.min_density)

    def transform(self, streams):
        """Segment every stream in ``streams``."""
        return [self.predict(p) for p in streams]

    def fit_transform(self, streams, y=None):
        return self.fit().transform(streams)
