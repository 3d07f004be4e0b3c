"""Symbol-type frequencies, prefix-code sizes, and bit-cost arithmetic.

Every mark occurring in a grammar gets a code size in bits, assigned by
the Shannon-Fano-Elias rule from the normalized frequency of the mark:
more frequent marks get shorter codes.  Alignment scores, grammar
scores, and probabilities are all sums or powers of these sizes, so the
scheme built here is threaded through the whole engine.

Two frequency modes are supported: ``per-grammar`` sums, for each mark,
frequency x occurrences over the grammar's patterns; ``per-alignment-set``
takes the maximum occurrence count of the mark in any one alignment of
each subset of a partition, summed over subsets (the counting rule used
by grammar induction).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

from .core import SPPattern

if TYPE_CHECKING:  # pragma: no cover
    from .alignment import Alignment


class UnknownMarkError(KeyError):
    def __init__(self, mark: str):
        super().__init__(mark)
        self.mark = mark

    def __str__(self) -> str:
        return f"mark {self.mark!r} has no code size in this scheme"


@dataclass(frozen=True)
class BitCost:
    bits: float

    def __post_init__(self):
        if self.bits < 0:
            raise ValueError("bit cost must be non-negative")


def sfe_length(probability: float) -> int:
    """Integer Shannon-Fano-Elias codeword length: ceil(log2(1/p)) + 1."""
    return int(math.ceil(math.log2(1.0 / probability) - 1e-12)) + 1


def ideal_length(probability: float) -> float:
    """Fractional (entropy-ideal) codeword length: -log2 p."""
    return -math.log2(probability)


@dataclass(frozen=True)
class CodeScheme:
    """Alphabet of mark types with frequencies and per-type code sizes in bits."""

    freq_of_type: Mapping[str, float]
    code_size: Mapping[str, float]
    alphabet_size_for_matching: int = 2
    mode: str = "sfe"

    def __post_init__(self):
        if self.alphabet_size_for_matching < 1:
            raise ValueError("alphabet size must be positive")

    @property
    def p_1(self) -> float:
        """Null-hypothesis probability of a single-symbol match."""
        return 1.0 / self.alphabet_size_for_matching

    def cost(self, mark: str) -> float:
        try:
            return self.code_size[mark]
        except KeyError:
            raise UnknownMarkError(mark) from None

    def __contains__(self, mark: str) -> bool:
        return mark in self.code_size

    @classmethod
    def from_frequencies(
        cls,
        freq_of_type: Mapping[str, float],
        mode: str = "sfe",
        alphabet_size_for_matching: int = 2,
    ) -> "CodeScheme":
        """Assign code sizes from a mark -> frequency table."""
        if mode not in ("sfe", "ideal"):
            raise ValueError(f"unknown code-size mode {mode!r}")
        kept = {m: f for m, f in freq_of_type.items() if f > 0}
        dropped = sorted(set(freq_of_type) - set(kept))
        if dropped:
            warnings.warn(f"marks with zero frequency excluded from code scheme: {dropped}")
        if not kept:
            raise ValueError("all mark frequencies are zero; cannot build a code scheme")
        total = sum(kept.values())
        length = sfe_length if mode == "sfe" else ideal_length
        sizes = {m: float(length(f / total)) for m, f in kept.items()}
        return cls(dict(kept), sizes, alphabet_size_for_matching, mode)


def grammar_type_frequencies(
    grammar: Iterable[tuple[SPPattern, int]] | Iterable[SPPattern],
) -> dict[str, float]:
    """Per-grammar mark frequencies: sum of frequency x occurrences."""
    freqs: dict[str, float] = {}
    for entry in grammar:
        if isinstance(entry, SPPattern):
            pattern, f = entry, entry.frequency
        else:
            pattern, f = entry
        for mark in pattern.marks:
            freqs[mark] = freqs.get(mark, 0.0) + f
    return freqs


def alignment_set_type_frequencies(
    subsets: Sequence[Sequence["Alignment"]],
) -> dict[str, float]:
    """Per-alignment-set mark frequencies.

    For each subset of alignments, a mark contributes the maximum number
    of times it occurs (over Old rows) in any one alignment of that
    subset; contributions are summed over subsets.
    """
    freqs: dict[str, float] = {}
    for subset in subsets:
        best: dict[str, int] = {}
        for alignment in subset:
            counts: dict[str, int] = {}
            for row in alignment.rows[1:]:
                for mark in row.pattern.marks:
                    counts[mark] = counts.get(mark, 0) + 1
            for mark, c in counts.items():
                if c > best.get(mark, 0):
                    best[mark] = c
        for mark, c in best.items():
            freqs[mark] = freqs.get(mark, 0.0) + c
    return freqs


def build_code_scheme(
    grammar: Iterable[tuple[SPPattern, int]] | Iterable[SPPattern] = (),
    mode: str = "per-grammar",
    subsets: Sequence[Sequence["Alignment"]] | None = None,
    code_mode: str = "sfe",
    alphabet_size_for_matching: int = 2,
) -> CodeScheme:
    """Compile a code scheme from a grammar or a partitioned alignment set."""
    if mode == "per-grammar":
        freqs = grammar_type_frequencies(grammar)
        if not freqs:
            raise ValueError("grammar is empty")
    elif mode == "per-alignment-set":
        if subsets is None:
            raise ValueError("per-alignment-set mode requires subsets")
        freqs = alignment_set_type_frequencies(subsets)
    else:
        raise ValueError(f"unknown frequency mode {mode!r}")
    return CodeScheme.from_frequencies(freqs, code_mode, alphabet_size_for_matching)


def code_size_of_sequence(seq: Iterable[str], scheme: CodeScheme) -> float:
    """Total bits to encode ``seq``: the sum of per-mark code sizes."""
    return sum(scheme.cost(mark) for mark in seq)


def entropy(probabilities: Sequence[float]) -> float:
    """Average bits per symbol of a distribution: -sum p_i log2 p_i."""
    if not probabilities:
        raise ValueError("empty distribution")
    for p in probabilities:
        if not 0.0 < p <= 1.0:
            raise ValueError(f"probability {p} outside (0, 1]")
    if abs(sum(probabilities) - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {sum(probabilities)}, not 1")
    return -sum(p * math.log2(p) for p in probabilities)


def redundancy(patterns: Iterable[tuple[int, float]]) -> float:
    """Redundancy carried by repeating patterns: sum of (f_i - 1) * s_i."""
    total = 0.0
    for f, s in patterns:
        if f < 1:
            raise ValueError("pattern frequency must be >= 1")
        if s <= 0:
            raise ValueError("pattern size must be positive")
        total += (f - 1) * s
    return total


def search_space_stats(n: int) -> tuple[int, int]:
    """Exact search-space sizes for a sequence of ``n`` symbols.

    Returns ``(P, C)`` where P = 2^n - 1 counts the possible
    subsequences and C = P(P-1)/2 counts the possible pairwise
    comparisons between them.  Both are exact big integers.
    """
    if n < 1:
        raise ValueError("sequence length must be >= 1")
    p = (1 << n) - 1
    return p, p * (p - 1) // 2
