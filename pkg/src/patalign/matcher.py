"""Ordered matching between two symbol sequences ("hit sequences").

A hit sequence is an order-preserving, non-crossing chain of equal-mark
positions between two sequences.  Each chain is scored by p_n, the
probability of observing it by chance under the null hypothesis that a
single-symbol match has probability p_1 = 1/|A|.  A *small* p_n means
the chain is unlikely to be chance, so hit sequences are ranked by
ascending p_n: long, tight chains first, short or gappy ones last.

The search is a layered beam expansion over match points; an exhaustive
enumerator over small inputs serves as the test oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .coding import CodeScheme


@dataclass(frozen=True)
class Hit:
    """A single matched position pair; ``gap`` counts symbols skipped in
    both sequences since the previous hit (0 for the first hit)."""

    pos_a: int
    pos_b: int
    gap: int = 0


@dataclass(frozen=True)
class HitSequence:
    hits: tuple[Hit, ...]
    probability: float
    log2_probability: float

    @property
    def n(self) -> int:
        return len(self.hits)

    def gaps(self) -> tuple[int, ...]:
        return tuple(h.gap for h in self.hits)

    def positions(self) -> tuple[tuple[int, int], ...]:
        return tuple((h.pos_a, h.pos_b) for h in self.hits)


@dataclass(frozen=True)
class MatchLimits:
    max_results: int = 12
    min_probability: float = 1e-30
    max_gap: int | None = None
    beam_width: int | None = None

    def effective_beam(self) -> int:
        return self.beam_width if self.beam_width is not None else self.max_results * 4


def _log2_gap_factor(gap: int, p_1: float) -> float:
    """log2 of the per-hit chance factor 1 - (1 - p_1)^(gap + 1)."""
    if p_1 >= 1.0:
        return 0.0
    return math.log2(1.0 - (1.0 - p_1) ** (gap + 1))


def hit_sequence_probability(gaps: Sequence[int], p_1: float) -> float:
    """Chance probability of a hit sequence with the given gap series.

    The first gap must be 0: leading unmatched symbols carry no cost
    because the chain may start anywhere.
    """
    if not 0.0 < p_1 <= 1.0:
        raise ValueError("p_1 must be in (0, 1]")
    if not gaps:
        raise ValueError("a hit sequence has at least one hit")
    if gaps[0] != 0:
        raise ValueError("the first gap must be 0")
    product = 1.0
    for g in gaps:
        if g < 0:
            raise ValueError("gaps must be non-negative")
        product *= 1.0 - (1.0 - p_1) ** (g + 1)
    return product


def _match_points(a: Sequence[str], b: Sequence[str]) -> list[tuple[int, int]]:
    by_mark: dict[str, list[int]] = {}
    for j, mark in enumerate(b):
        by_mark.setdefault(mark, []).append(j)
    points = []
    for i, mark in enumerate(a):
        for j in by_mark.get(mark, ()):
            points.append((i, j))
    points.sort()
    return points


def _is_maximal(positions: tuple[tuple[int, int], ...], points: list[tuple[int, int]]) -> bool:
    """A chain is maximal when no further hit can be prepended, appended,
    or inserted between consecutive hits."""
    first_i, first_j = positions[0]
    last_i, last_j = positions[-1]
    for i, j in points:
        if i < first_i and j < first_j:
            return False
        if i > last_i and j > last_j:
            return False
    for (i1, j1), (i2, j2) in zip(positions, positions[1:]):
        if i2 - i1 > 1 and j2 - j1 > 1:
            for i, j in points:
                if i1 < i < i2 and j1 < j < j2:
                    return False
    return True


def _build_sequence(positions: tuple[tuple[int, int], ...], p_1: float) -> HitSequence:
    hits = []
    log_p = 0.0
    prev = None
    for i, j in positions:
        gap = 0 if prev is None else (i - prev[0] - 1) + (j - prev[1] - 1)
        log_p += _log2_gap_factor(gap, p_1)
        hits.append(Hit(i, j, gap))
        prev = (i, j)
    return HitSequence(tuple(hits), 2.0**log_p, log_p)


def _rank_key(seq: HitSequence):
    # ascending p_n (most significant first), then longer, then leftmost
    return (seq.log2_probability, -seq.n, seq.positions())


def find_matches(
    a: Sequence[str],
    b: Sequence[str],
    scheme: CodeScheme,
    limits: MatchLimits = MatchLimits(),
) -> list[HitSequence]:
    """Find up to ``limits.max_results`` maximal hit sequences, best first.

    Layered beam search: layer L holds chains of L hits; each layer is
    truncated to the beam width by the ranking key before extension.
    Chains that cannot be extended or tightened any further (maximal
    chains) are collected and ranked.  Identical inputs and limits give
    identical output orderings.
    """
    if limits.max_results < 1:
        raise ValueError("max_results must be >= 1")
    if not a or not b:
        return []
    p_1 = scheme.p_1
    points = _match_points(a, b)
    if not points:
        return []

    # max_j_after[i] = largest pos_b among points with pos_a > i, for an O(1)
    # "can this chain still be extended forward?" test
    max_j_after = [-1] * (len(a) + 1)
    for i, j in points:
        if j > max_j_after[i]:
            max_j_after[i] = j
    for i in range(len(a) - 1, -1, -1):
        max_j_after[i] = max(max_j_after[i], max_j_after[i + 1])

    beam_width = limits.effective_beam()
    layer: list[tuple[float, tuple[tuple[int, int], ...]]] = [
        (_log2_gap_factor(0, p_1), ((i, j),)) for (i, j) in points
    ]
    finals: list[tuple[tuple[int, int], ...]] = []
    while layer:
        layer.sort(key=lambda item: (item[0], item[1]))
        layer = layer[:beam_width]
        nxt = []
        for log_p, positions in layer:
            last_i, last_j = positions[-1]
            if max_j_after[last_i + 1] <= last_j:
                finals.append(positions)  # dead end: nothing ahead in both sequences
                continue
            extended = False
            for i, j in points:
                if i <= last_i or j <= last_j:
                    continue
                gap = (i - last_i - 1) + (j - last_j - 1)
                if limits.max_gap is not None and gap > limits.max_gap:
                    continue
                nxt.append((log_p + _log2_gap_factor(gap, p_1), positions + ((i, j),)))
                extended = True
            if not extended:
                finals.append(positions)  # every forward point is gap-capped
        layer = nxt

    results = []
    for positions in finals:
        if not _is_maximal(positions, points):
            continue
        seq = _build_sequence(positions, p_1)
        if seq.probability < limits.min_probability:
            continue
        results.append(seq)
    results.sort(key=_rank_key)
    return results[: limits.max_results]


class OracleBoundError(ValueError):
    pass


def brute_force_matches(
    a: Sequence[str],
    b: Sequence[str],
    scheme: CodeScheme,
    bound: int = 24,
    enumeration_cap: int = 500_000,
) -> list[HitSequence]:
    """Exhaustively enumerate every maximal hit sequence with exact p_n.

    Test oracle for :func:`find_matches`; refuses inputs beyond the
    configured size bound because the chain space grows exponentially.
    """
    if len(a) + len(b) > bound:
        raise OracleBoundError(f"input size {len(a) + len(b)} exceeds oracle bound {bound}")
    p_1 = scheme.p_1
    points = _match_points(a, b)
    chains: list[tuple[tuple[int, int], ...]] = []

    def extend(chain: tuple[tuple[int, int], ...]):
        if len(chains) > enumeration_cap:
            raise OracleBoundError("enumeration cap exceeded")
        last_i, last_j = chain[-1]
        extended = False
        for i, j in points:
            if i > last_i and j > last_j:
                extend(chain + ((i, j),))
                extended = True
        if not extended:
            chains.append(chain)

    for start in points:
        extend((start,))

    unique = set(chains)
    results = [
        _build_sequence(positions, p_1)
        for positions in unique
        if _is_maximal(positions, points)
    ]
    results.sort(key=_rank_key)
    return results
