"""Sign-pattern vocabulary, occurrence counting, and effectiveness scoring.

Patterns are bit-encoded up/down sequences: bit i set means UP at step i,
with the earliest step in the least-significant bit. The default vocabulary
enumerates every pattern for window sizes 4-7, i.e. lengths 3-6
(8 + 16 + 32 + 64 = 120 patterns).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidConfigError, InvalidInputError, TrainingError
from .series import diff_signs

DEFAULT_WINDOW_SIZES = (4, 5, 6, 7)


@dataclass(frozen=True, order=True)
class SignPattern:
    """One up/down pattern: (length, bits) in canonical order."""

    length: int
    bits: int

    def __post_init__(self) -> None:
        if not 1 <= self.length <= 19:
            raise InvalidInputError(f"pattern length must be in [1, 19], got {self.length}")
        if not 0 <= self.bits < (1 << self.length):
            raise InvalidInputError(f"bits {self.bits} out of range for length {self.length}")

    @property
    def signs(self) -> np.ndarray:
        return np.array([(self.bits >> i) & 1 for i in range(self.length)], dtype=bool)

    def binary_string(self) -> str:
        """Earliest step leftmost, '1' = UP (the encoding used in CSV exports)."""
        return "".join("1" if (self.bits >> i) & 1 else "0" for i in range(self.length))


@dataclass(frozen=True)
class PatternVocabulary:
    """Canonically ordered, duplicate-free pattern list for a set of window sizes."""

    window_sizes: tuple[int, ...]
    patterns: tuple[SignPattern, ...]

    @property
    def lengths(self) -> tuple[int, ...]:
        return tuple(s - 1 for s in self.window_sizes)

    @property
    def max_length(self) -> int:
        return max(self.lengths)

    def __len__(self) -> int:
        return len(self.patterns)

    def offset_of(self, length: int) -> int:
        """Start position of the given pattern length in the canonical order."""
        off = 0
        for L in self.lengths:
            if L == length:
                return off
            off += 1 << L
        raise InvalidInputError(f"length {length} not in vocabulary")

    def position(self, pattern: SignPattern) -> int:
        return self.offset_of(pattern.length) + pattern.bits

    def slice_of(self, length: int) -> slice:
        off = self.offset_of(length)
        return slice(off, off + (1 << length))


def enumerate_vocabulary(window_sizes=DEFAULT_WINDOW_SIZES) -> PatternVocabulary:
    """All 2^(s-1) sign patterns for every window size s, ordered (length, bits)."""
    sizes = tuple(sorted(set(int(s) for s in window_sizes)))
    if not sizes:
        raise InvalidConfigError("window_sizes must be non-empty")
    if sizes[0] < 2 or sizes[-1] > 20:
        raise InvalidConfigError(f"window sizes must lie in [2, 20], got {sizes}")
    patterns = tuple(
        SignPattern(length=s - 1, bits=b) for s in sizes for b in range(1 << (s - 1))
    )
    return PatternVocabulary(window_sizes=sizes, patterns=patterns)


@dataclass(frozen=True)
class FeatureVector:
    """Occurrence counts per vocabulary position for one window."""

    counts: np.ndarray
    window_ref: str = ""


@dataclass(frozen=True)
class OccurrenceTable:
    """Per-pattern counts aggregated over positive / negative windows."""

    count_pos: np.ndarray
    count_neg: np.ndarray
    n_pos_windows: int
    n_neg_windows: int
    window_size: int
    lengths: tuple[int, ...]

    @property
    def single_class(self) -> bool:
        return self.n_pos_windows == 0 or self.n_neg_windows == 0

    def length_slices(self) -> list[slice]:
        slices = []
        off = 0
        for L in self.lengths:
            slices.append(slice(off, off + (1 << L)))
            off += 1 << L
        return slices


@dataclass(frozen=True)
class EffectivenessScore:
    """Smoothed log-odds per pattern and the resulting effective flags."""

    log_odds: np.ndarray
    is_effective: np.ndarray
    alpha: float
    tau: float


# ---------------------------------------------------------------------------
# Counting
# ---------------------------------------------------------------------------


def sign_matrix(prices: np.ndarray) -> np.ndarray:
    """Step-sign matrix (n, W-1) for a batch of price windows (n, W)."""
    p = np.asarray(prices, dtype=np.float64)
    if p.ndim == 1:
        p = p[None, :]
    return p[:, 1:] > p[:, :-1]


def count_signs(signs: np.ndarray, vocab: PatternVocabulary) -> np.ndarray:
    """Sliding (overlapping) occurrence counts per pattern for sign rows.

    signs: (n, m) boolean step signs; returns (n, len(vocab)) int64. Every
    contiguous position is counted, so for each length L the counts of all
    length-L patterns in a row sum to m - L + 1.
    """
    s = np.asarray(signs, dtype=bool)
    if s.ndim == 1:
        s = s[None, :]
    n, m = s.shape
    if m < vocab.max_length:
        raise InvalidInputError(
            f"window provides {m} signs but the vocabulary needs {vocab.max_length}"
        )
    out = np.zeros((n, len(vocab)), dtype=np.int64)
    for L in vocab.lengths:
        pw = (1 << np.arange(L)).astype(np.int64)
        codes = sliding_window_view(s, L, axis=1).astype(np.int64) @ pw
        flat = np.arange(n, dtype=np.int64)[:, None] * (1 << L) + codes
        counts = np.bincount(flat.ravel(), minlength=n << L).reshape(n, 1 << L)
        out[:, vocab.slice_of(L)] = counts
    return out


def count_patterns(window, vocab: PatternVocabulary, window_ref: str = "") -> FeatureVector:
    """Occurrence counts of every vocabulary pattern in one price window."""
    p = np.asarray(window, dtype=np.float64)
    if p.ndim != 1:
        raise InvalidInputError("count_patterns expects a single 1-D price window")
    if p.size < vocab.max_length + 1:
        raise InvalidInputError(
            f"window of {p.size} prices is shorter than max pattern length + 1 "
            f"({vocab.max_length + 1})"
        )
    signs = diff_signs(p).signs
    return FeatureVector(counts=count_signs(signs, vocab)[0], window_ref=window_ref)


def occurrence_table(dataset, vocab: PatternVocabulary) -> OccurrenceTable:
    """Aggregate pattern counts over a labeled dataset, split by label."""
    if len(dataset) == 0:
        raise InvalidInputError("dataset is empty")
    signs = sign_matrix(dataset.prices)
    counts = count_signs(signs, vocab)
    pos = dataset.labels.astype(bool)
    return OccurrenceTable(
        count_pos=counts[pos].sum(axis=0),
        count_neg=counts[~pos].sum(axis=0),
        n_pos_windows=int(pos.sum()),
        n_neg_windows=int((~pos).sum()),
        window_size=int(dataset.prices.shape[1]),
        lengths=vocab.lengths,
    )


def effectiveness_scores(
    table: OccurrenceTable, alpha: float = 1.0, tau: float = 0.5
) -> EffectivenessScore:
    """Smoothed log-odds of per-length occurrence rates between the classes.

    log_odds(p) = ln((c_pos + a) / (N_pos + a)) - ln((c_neg + a) / (N_neg + a))
    with N_class the total occurrences of p's length in that class; a pattern
    is effective when |log_odds| >= tau.
    """
    if alpha <= 0:
        raise InvalidConfigError(f"smoothing alpha must be > 0, got {alpha}")
    if tau < 0:
        raise InvalidConfigError(f"threshold tau must be >= 0, got {tau}")
    if table.single_class:
        raise TrainingError("effectiveness undefined: one class has no windows")
    log_odds = np.zeros_like(table.count_pos, dtype=np.float64)
    for sl in table.length_slices():
        cp = table.count_pos[sl].astype(np.float64)
        cn = table.count_neg[sl].astype(np.float64)
        log_odds[sl] = np.log((cp + alpha) / (cp.sum() + alpha)) - np.log(
            (cn + alpha) / (cn.sum() + alpha)
        )
    return EffectivenessScore(
        log_odds=log_odds, is_effective=np.abs(log_odds) >= tau, alpha=alpha, tau=tau
    )


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------


def write_effectiveness_csv(
    path,
    vocab: PatternVocabulary,
    table: OccurrenceTable,
    scores: EffectivenessScore,
) -> None:
    """One row per pattern: length, bits as a binary string, counts, score, flag."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["length", "bits_binary_string", "count_pos", "count_neg", "log_odds", "is_effective"]
        )
        for i, pat in enumerate(vocab.patterns):
            writer.writerow(
                [
                    pat.length,
                    pat.binary_string(),
                    int(table.count_pos[i]),
                    int(table.count_neg[i]),
                    repr(float(scores.log_odds[i])),
                    int(scores.is_effective[i]),
                ]
            )
