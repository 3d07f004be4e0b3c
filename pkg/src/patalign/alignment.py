"""Multiple-alignment construction, compression scoring, and inference.

An alignment arranges one New pattern (row 0) and any number of Old
pattern rows into a column structure: every symbol of every row sits in
exactly one column, symbols sharing a column carry the same mark, and
column order is consistent with the left-to-right order of every row.

Alignments are built progressively: the New pattern is first aligned
pairwise with Old patterns, then retained alignments are extended with
further Old patterns (matching their still-unmatched symbols) and merged
with each other, stage by stage, keeping the best by compression score.

The compression score of an alignment compares B_N, the bits of the New
symbols it manages to match, with B_E, the bits of the code pattern it
derives (the unmatched Old symbols left in single columns, which form a
compressed encoding of the New pattern).  CD = B_N - B_E drives the
search; 2^-B_E gives the absolute probability used for reasoning.
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
import json
from dataclasses import dataclass
from typing import Sequence

from .coding import CodeScheme, build_code_scheme
from .core import Role, SPPattern, SymbolKind
from .matcher import MatchLimits, find_matches

NEW_ID = "NEW"


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class RowRef:
    """One row of an alignment: a pattern plus an instance counter that
    disambiguates repeated uses of the same pattern."""

    pattern: SPPattern
    pattern_id: str
    instance: int = 0

    @property
    def key(self) -> tuple[str, int]:
        return (self.pattern_id, self.instance)


# a column is a tuple of (row_index, symbol_position) pairs, sorted by row
Column = tuple[tuple[int, int], ...]


class Alignment:
    """Immutable column-structured arrangement of one New row and Old rows."""

    __slots__ = (
        "rows",
        "columns",
        "parents",
        "uid",
        "uid_num",
        "column_marks",
        "singles",
        "new_hit_positions",
        "pattern_counts",
        "canonical_key",
        "_singles_marks",
        "_hit_columns",
        "_row_sort_key",
    )

    def __init__(
        self,
        rows: tuple[RowRef, ...],
        columns: tuple[Column, ...],
        parents: tuple[str, ...] = (),
        uid: str | None = None,
    ):
        self.rows = rows
        self.columns = columns
        self.parents = parents
        self.uid = uid
        self.column_marks = tuple(
            rows[col[0][0]].pattern.marks[col[0][1]] for col in columns
        )
        singles = []
        new_hits = []
        for ci, col in enumerate(columns):
            if len(col) == 1:
                r, p = col[0]
                singles.append((ci, r, p, self.column_marks[ci]))
            else:
                for r, p in col:
                    if r == 0:
                        new_hits.append(p)
        self.singles = tuple(singles)
        self.new_hit_positions = frozenset(new_hits)
        counts: dict[str, int] = {}
        for row in rows[1:]:
            counts[row.pattern_id] = counts.get(row.pattern_id, 0) + 1
        self.pattern_counts = counts
        self.canonical_key = (
            tuple(sorted(row.key for row in rows[1:])),
            tuple(tuple(col) for col in columns),
        )
        self._singles_marks = frozenset(m for (_, _, _, m) in singles)
        self._hit_columns = sum(1 for col in columns if len(col) >= 2)
        self._row_sort_key = tuple(sorted(row.key for row in rows[1:]))
        self.uid_num = 0

    @property
    def new_pattern(self) -> SPPattern:
        return self.rows[0].pattern

    def singles_marks(self) -> frozenset[str]:
        return self._singles_marks

    def hit_column_count(self) -> int:
        return self._hit_columns

    def row_sort_key(self) -> tuple:
        return self._row_sort_key

    def symbol_at(self, row_index: int, position: int):
        return self.rows[row_index].pattern.symbols[position]

    def validate(self) -> list[str]:
        """Check every structural invariant; returns violations (empty = ok)."""
        problems = []
        seen: set[tuple[int, int]] = set()
        for ci, col in enumerate(self.columns):
            marks = {self.rows[r].pattern.marks[p] for r, p in col}
            if len(marks) != 1:
                problems.append(f"column {ci} mixes marks {sorted(marks)}")
            row_ids = [r for r, _ in col]
            if len(row_ids) != len(set(row_ids)):
                problems.append(f"column {ci} holds two symbols of one row")
            for cell in col:
                if cell in seen:
                    problems.append(f"symbol {cell} appears in two columns")
                seen.add(cell)
        for r, row in enumerate(self.rows):
            positions = [p for col in self.columns for (ri, p) in col if ri == r]
            if sorted(positions) != list(range(len(row.pattern))):
                problems.append(f"row {r} symbols not all placed exactly once")
        order: dict[tuple[int, int], int] = {}
        for ci, col in enumerate(self.columns):
            for cell in col:
                order[cell] = ci
        for r, row in enumerate(self.rows):
            for p in range(len(row.pattern) - 1):
                if order[(r, p)] >= order[(r, p + 1)]:
                    problems.append(f"row {r} order broken at position {p}")
        if self.rows[0].pattern.role is not Role.NEW:
            problems.append("row 0 is not a New pattern")
        return problems


def _tie_key(rows: tuple[RowRef, ...], col: Sequence[tuple[int, int]]):
    # canonical, path-independent preference used to order mutually
    # unconstrained columns: Old-row symbols before New residue
    return max(
        ((0 if r == 0 else 1), rows[r].pattern_id, rows[r].instance, p) for r, p in col
    )


def _assemble(
    rows: tuple[RowRef, ...],
    members: list[list[tuple[int, int]]],
    parents: tuple[str, ...] = (),
) -> Alignment | None:
    """Order columns topologically under every row's left-to-right chain.

    Returns None when the rows cannot interleave consistently (a cycle in
    the precedence relation), which silently discards the candidate.
    """
    col_of: dict[tuple[int, int], int] = {}
    for ci, col in enumerate(members):
        for cell in col:
            col_of[cell] = ci
    n = len(members)
    successors: list[list[int]] = [[] for _ in range(n)]
    indegree = [0] * n
    for r, row in enumerate(rows):
        for p in range(len(row.pattern) - 1):
            a, b = col_of[(r, p)], col_of[(r, p + 1)]
            successors[a].append(b)
            indegree[b] += 1
    # rank columns once by tie key (largest first); the Kahn frontier is
    # then a cheap min-heap over ranks
    by_key = sorted(range(n), key=lambda ci: _tie_key(rows, members[ci]), reverse=True)
    rank = [0] * n
    for pos, ci in enumerate(by_key):
        rank[ci] = pos
    heap = [rank[ci] for ci in range(n) if indegree[ci] == 0]
    heapq.heapify(heap)
    order: list[int] = []
    while heap:
        ci = by_key[heapq.heappop(heap)]
        order.append(ci)
        for nxt in successors[ci]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                heapq.heappush(heap, rank[nxt])
    if len(order) != n:
        return None  # cycle: incompatible interleaving

    # canonical row order: New first, then by first column, id, instance
    first_col: dict[int, int] = {}
    for pos, ci in enumerate(order):
        for r, _ in members[ci]:
            first_col.setdefault(r, pos)
    old_rows = sorted(
        range(1, len(rows)),
        key=lambda r: (first_col[r], rows[r].pattern_id, rows[r].instance),
    )
    remap = {0: 0}
    new_rows = [rows[0]]
    instance_counter: dict[str, int] = {}
    for r in old_rows:
        remap[r] = len(new_rows)
        inst = instance_counter.get(rows[r].pattern_id, 0)
        instance_counter[rows[r].pattern_id] = inst + 1
        new_rows.append(RowRef(rows[r].pattern, rows[r].pattern_id, inst))
    columns = tuple(
        tuple(sorted((remap[r], p) for r, p in members[ci])) for ci in order
    )
    return Alignment(tuple(new_rows), columns, parents)


def trivial_alignment(new: SPPattern) -> Alignment:
    if new.role is not Role.NEW:
        raise ValueError("row 0 must be a New pattern")
    rows = (RowRef(new, NEW_ID, 0),)
    columns = tuple(((0, p),) for p in range(len(new)))
    return Alignment(rows, columns)


@dataclass(frozen=True)
class ComposeLimits:
    hit_sequences: int = 3
    pattern_instance_cap: int = 3
    match_beam: int = 24


def _extend_with_pattern(
    base: Alignment,
    pattern: SPPattern,
    pattern_id: str,
    scheme: CodeScheme,
    limits: ComposeLimits,
    parents: tuple[str, ...],
) -> list[Alignment]:
    """Align an Old pattern against the still-unmatched symbols of ``base``."""
    if base.pattern_counts.get(pattern_id, 0) >= limits.pattern_instance_cap:
        return []
    singles = base.singles
    projected = [m for (_, _, _, m) in singles]
    seqs = find_matches(
        projected,
        list(pattern.marks),
        scheme,
        MatchLimits(max_results=limits.hit_sequences, beam_width=limits.match_beam),
    )
    out = []
    new_row = len(base.rows)
    rows = base.rows + (RowRef(pattern, pattern_id, 0),)
    for seq in seqs:
        # symbols of a pattern never unify with another copy of the same
        # pattern: cross-instance pairing compresses nothing real
        if any(
            singles[hit.pos_a][1] != 0
            and base.rows[singles[hit.pos_a][1]].pattern_id == pattern_id
            for hit in seq.hits
        ):
            continue
        members = [list(col) for col in base.columns]
        matched = set()
        for hit in seq.hits:
            ci = singles[hit.pos_a][0]
            members[ci].append((new_row, hit.pos_b))
            matched.add(hit.pos_b)
        for p in range(len(pattern)):
            if p not in matched:
                members.append([(new_row, p)])
        built = _assemble(rows, members, parents)
        if built is not None:
            out.append(built)
    return out


def _merge_alignments(
    x: Alignment,
    y: Alignment,
    scheme: CodeScheme,
    limits: ComposeLimits,
    parents: tuple[str, ...],
) -> list[Alignment]:
    """Merge two alignments over the same New pattern.

    The shared New row unifies the two column structures; on top of that,
    still-unmatched Old symbols of the two operands may themselves be
    aligned (service symbols pairing up across the operands).
    """
    if x.new_pattern != y.new_pattern:
        raise ValueError("alignments must share the same New pattern")
    for pid, c in y.pattern_counts.items():
        if x.pattern_counts.get(pid, 0) + c > limits.pattern_instance_cap:
            return []
    offset = len(x.rows) - 1
    rows = x.rows + tuple(
        RowRef(r.pattern, r.pattern_id, r.instance) for r in y.rows[1:]
    )

    def base_members() -> tuple[list[list[tuple[int, int]]], dict[int, int]]:
        members = [list(col) for col in x.columns]
        col_of_new = {}
        for ci, col in enumerate(x.columns):
            for r, p in col:
                if r == 0:
                    col_of_new[p] = ci
        y_col_index: dict[int, int] = {}
        for ci, col in enumerate(y.columns):
            new_positions = [p for r, p in col if r == 0]
            rest = [(r + offset, p) for r, p in col if r != 0]
            if new_positions:
                target = col_of_new[new_positions[0]]
                members[target].extend(rest)
                y_col_index[ci] = target
            else:
                y_col_index[ci] = len(members)
                members.append(rest)
        return members, y_col_index

    variants: list[list[list[tuple[int, int]]]] = []
    members, y_col_index = base_members()
    variants.append(members)

    # optional extra unification between the operands' unmatched Old symbols
    x_old = [(ci, m) for (ci, r, _p, m) in x.singles if r != 0]
    y_old = [(ci, m) for (ci, r, _p, m) in y.singles if r != 0]
    if x_old and y_old:
        seqs = find_matches(
            [m for _, m in x_old],
            [m for _, m in y_old],
            scheme,
            MatchLimits(max_results=limits.hit_sequences, beam_width=limits.match_beam),
        )
        for seq in seqs:
            members, y_col_index = base_members()
            for hit in seq.hits:
                xc = x_old[hit.pos_a][0]
                yc = y_col_index[y_old[hit.pos_b][0]]
                members[xc].extend(members[yc])
                members[yc] = []
            variants.append([col for col in members if col])

    out = []
    for members in variants:
        built = _assemble(rows, members, parents)
        if built is not None:
            out.append(built)
    return out


def compose_pair(
    x: Alignment | SPPattern,
    y: Alignment | SPPattern,
    scheme: CodeScheme,
    limits: ComposeLimits = ComposeLimits(),
    pattern_ids: tuple[str, str] | None = None,
) -> list[Alignment]:
    """Compose two operands into candidate alignments.

    One operand must involve the current New pattern (a New pattern or an
    alignment over it); Old patterns extend, alignments merge.  Candidates
    whose rows cannot interleave consistently are discarded silently.
    """
    xid = pattern_ids[0] if pattern_ids else _default_id(x)
    yid = pattern_ids[1] if pattern_ids else _default_id(y)
    if isinstance(x, SPPattern):
        if x.role is Role.NEW:
            x = trivial_alignment(x)
        elif isinstance(y, SPPattern) and y.role is Role.NEW:
            x, y = trivial_alignment(y), x
            xid, yid = yid, xid
        elif isinstance(y, Alignment):
            x, y = y, x
            xid, yid = yid, xid
        else:
            raise ValueError("at least one operand must involve the New pattern")
    if isinstance(y, SPPattern):
        if y.role is Role.NEW:
            y = trivial_alignment(y)
        else:
            return _extend_with_pattern(x, y, yid, scheme, limits, (xid, yid))
    return _merge_alignments(x, y, scheme, limits, (xid, yid))


def _default_id(operand) -> str:
    if isinstance(operand, Alignment):
        return operand.uid or "A?"
    if operand.role is Role.NEW:
        return NEW_ID
    digest = hashlib.blake2s(" ".join(operand.marks).encode()).hexdigest()
    return "p" + digest[:8]


# ---------------------------------------------------------------------------
# scoring


@dataclass(frozen=True)
class CodeDerivation:
    """Code pattern (unmatched Old symbols in single columns, in column
    order) plus the residue of unmatched New symbols."""

    code: tuple[str, ...]
    residue: tuple[str, ...]


def derive_code_pattern(a: Alignment) -> CodeDerivation:
    code = []
    residue = []
    for ci, r, _p, mark in a.singles:
        if r == 0:
            residue.append(mark)
        else:
            code.append(mark)
    return CodeDerivation(tuple(code), tuple(residue))


@dataclass(frozen=True)
class AlignmentScore:
    b_n: float
    b_e: float
    cd: float
    cr: float | None

    def __str__(self) -> str:
        cr = f"{self.cr:.3f}" if self.cr is not None else "undef"
        return f"BN={self.b_n:.2f} BE={self.b_e:.2f} CD={self.cd:.2f} CR={cr}"


def score_alignment(a: Alignment, scheme: CodeScheme) -> AlignmentScore:
    """B_N counts New symbols in hit columns; B_E prices the code pattern."""
    b_n = 0.0
    for col, mark in zip(a.columns, a.column_marks):
        if len(col) >= 2 and any(r == 0 for r, _ in col):
            b_n += scheme.cost(mark)
    code = derive_code_pattern(a).code
    b_e = sum(scheme.cost(m) for m in code)
    cd = b_n - b_e
    cr = (b_n / b_e) if b_e > 0 else None
    return AlignmentScore(b_n, b_e, cd, cr)


# ---------------------------------------------------------------------------
# staged search


@dataclass(frozen=True)
class BuildConfig:
    beam_width: int = 200
    max_stages: int = 12
    max_results: int = 10
    compose: ComposeLimits = ComposeLimits()
    code_mode: str = "sfe"
    alphabet_size: int = 2
    scheme: CodeScheme | None = None


@dataclass
class AuditNode:
    uid: str
    stage: int
    parents: tuple[str, ...]
    score: AlignmentScore
    alignment: Alignment


@dataclass
class BuildResult:
    alignments: list[Alignment]
    pool: list[Alignment]
    scores: dict[str, AlignmentScore]
    audit: dict[str, AuditNode]
    leaves: dict[str, SPPattern]
    scheme: CodeScheme
    stages_run: int

    def score_of(self, a: Alignment) -> AlignmentScore:
        return self.scores[a.uid]


def _rank_key(entry: tuple[Alignment, AlignmentScore]):
    a, s = entry
    return (-s.cd, -a.hit_column_count(), a.row_sort_key(), a.canonical_key)


def build_alignments(
    new: SPPattern,
    grammar,
    config: BuildConfig = BuildConfig(),
) -> BuildResult:
    """Staged, beam-pruned construction of alignments for one New pattern.

    Stage 1 aligns the New pattern with every Old pattern.  Each later
    stage extends the newest retained alignments with Old patterns and
    merges them with previously retained alignments (only pairs with
    disjoint Old rows; overlapping combinations are reachable through
    extension).  After every stage the pool is pruned to the best
    ``beam_width`` by CD (ties: more hit columns, then lexicographic row
    ids).  The search stops when a stage adds no new alignment or the
    stage cap is reached.  All retained alignments, including the
    intermediate ones, stay in the audit map with their provenance.
    """
    patterns = list(getattr(grammar, "patterns", grammar))
    if not patterns:
        raise ValueError("grammar is empty")
    width = len(str(len(patterns)))
    ids = [f"P{idx + 1:0{width}d}" for idx in range(len(patterns))]
    scheme = config.scheme or build_code_scheme(
        patterns,
        code_mode=config.code_mode,
        alphabet_size_for_matching=config.alphabet_size,
    )

    audit: dict[str, AuditNode] = {}
    scores: dict[str, AlignmentScore] = {}
    pool: dict[tuple, Alignment] = {}
    leaves = {NEW_ID: new, **dict(zip(ids, patterns))}
    counter = itertools.count(1)

    def admit(candidate: Alignment, stage: int) -> Alignment | None:
        key = candidate.canonical_key
        if key in pool:
            return None
        num = next(counter)
        uid = f"A{num}"
        candidate.uid = uid
        candidate.uid_num = num
        score = score_alignment(candidate, scheme)
        pool[key] = candidate
        scores[uid] = score
        audit[uid] = AuditNode(uid, stage, candidate.parents, score, candidate)
        return candidate

    base = trivial_alignment(new)
    new_marks = set(new.marks)
    frontier: list[Alignment] = []
    for pid, pattern in zip(ids, patterns):
        if new_marks.isdisjoint(pattern.marks):
            continue
        for cand in _extend_with_pattern(
            base, pattern, pid, scheme, config.compose, (NEW_ID, pid)
        ):
            admitted = admit(cand, 1)
            if admitted is not None:
                frontier.append(admitted)

    def prune() -> list[Alignment]:
        ranked = sorted(
            ((a, scores[a.uid]) for a in pool.values()), key=_rank_key
        )
        return [a for a, _ in ranked[: config.beam_width]]

    active = prune()
    frontier = [a for a in frontier if a in active]
    stage = 1
    while frontier and stage < config.max_stages:
        stage += 1
        fresh: list[Alignment] = []
        frontier_uids = {a.uid for a in frontier}
        for a in frontier:
            for pid, pattern in zip(ids, patterns):
                if a.singles_marks().isdisjoint(pattern.marks):
                    continue
                for cand in _extend_with_pattern(
                    a, pattern, pid, scheme, config.compose, (a.uid, pid)
                ):
                    admitted = admit(cand, stage)
                    if admitted is not None:
                        fresh.append(admitted)
            for b in active:
                if b.uid == a.uid:
                    continue
                if b.uid in frontier_uids and b.uid_num > a.uid_num:
                    continue  # unordered pair, handled once
                if any(
                    b.pattern_counts.get(pid, 0) for pid in a.pattern_counts
                ):
                    continue  # overlapping rows: reachable via extension
                first, second = (b, a) if b.uid_num < a.uid_num else (a, b)
                for cand in _merge_alignments(
                    first, second, scheme, config.compose, (first.uid, second.uid)
                ):
                    admitted = admit(cand, stage)
                    if admitted is not None:
                        fresh.append(admitted)
        if not fresh:
            break
        active = prune()
        active_set = {a.uid for a in active}
        frontier = [a for a in fresh if a.uid in active_set]

    ranked = sorted(((a, scores[a.uid]) for a in active), key=_rank_key)
    pool_ranked = [a for a, _ in ranked]
    return BuildResult(
        alignments=pool_ranked[: config.max_results],
        pool=pool_ranked,
        scores=scores,
        audit=audit,
        leaves=leaves,
        scheme=scheme,
        stages_run=stage,
    )


# ---------------------------------------------------------------------------
# probabilities and inference


@dataclass(frozen=True)
class ProbabilityEntry:
    alignment: Alignment
    p_abs: float
    p_rel: float


@dataclass(frozen=True)
class ProbabilityReport:
    reference: Alignment
    reference_positions: frozenset[int]
    entries: tuple[ProbabilityEntry, ...]
    p_a_sum: float


def _subsequence(needle: Sequence[str], haystack: Sequence[str]) -> bool:
    it = iter(haystack)
    return all(any(m == h for h in it) for m in needle)


def _remove_redundant_rows(a: Alignment) -> Alignment:
    """Drop Old rows whose whole mark sequence also appears, in order,
    within another row of the same alignment."""
    keep = list(range(len(a.rows)))
    removed: set[int] = set()
    for r in range(1, len(a.rows)):
        for r2 in range(1, len(a.rows)):
            if r2 == r or r2 in removed:
                continue
            if _subsequence(a.rows[r].pattern.marks, a.rows[r2].pattern.marks):
                removed.add(r)
                break
    if not removed:
        return a
    kept = [r for r in keep if r not in removed]
    remap = {old: new for new, old in enumerate(kept)}
    rows = tuple(a.rows[r] for r in kept)
    members = []
    for col in a.columns:
        cells = [(remap[r], p) for r, p in col if r in remap]
        if cells:
            members.append(cells)
    rebuilt = _assemble(rows, members, a.parents)
    if rebuilt is None:  # cannot happen: removing rows relaxes constraints
        return a
    rebuilt.uid = a.uid
    return rebuilt


def alignment_probabilities(
    candidates: Sequence[Alignment],
    scheme: CodeScheme,
) -> ProbabilityReport:
    """Relative probabilities over the reference set of alignments.

    The reference alignment is the best-CD candidate; the reference set
    holds every candidate that encodes exactly the same New symbols,
    neither more nor less.  Rows made fully redundant by another row are
    removed, duplicate alignments after that editing are removed, and an
    alignment whose rows form a strict subset of another member's rows is
    removed as well (it encodes nothing the larger member does not).
    Each member then gets p_abs = 2^-B_E and p_rel = p_abs / p_a_sum.
    """
    if not candidates:
        raise ValueError("no candidate alignments")
    scored = [(a, score_alignment(a, scheme)) for a in candidates]
    scored.sort(key=_rank_key)
    reference = scored[0][0]
    positions = reference.new_hit_positions
    members = [a for a, _ in scored if a.new_hit_positions == positions]

    members = [_remove_redundant_rows(a) for a in members]
    unique: dict[tuple, Alignment] = {}
    for a in members:
        unique.setdefault(a.canonical_key, a)
    members = list(unique.values())

    def dominated(a: Alignment) -> bool:
        if a.canonical_key == reference.canonical_key:
            return False
        for other in members:
            if other is a:
                continue
            oc = other.pattern_counts
            ac = a.pattern_counts
            if all(oc.get(pid, 0) >= c for pid, c in ac.items()) and sum(
                oc.values()
            ) > sum(ac.values()):
                return True
        return False

    members = [a for a in members if not dominated(a)]
    entries = []
    for a in members:
        b_e = score_alignment(a, scheme).b_e
        entries.append((a, 2.0 ** (-b_e)))
    p_a_sum = sum(p for _, p in entries)
    report_entries = tuple(
        sorted(
            (ProbabilityEntry(a, p, p / p_a_sum) for a, p in entries),
            key=lambda e: (-e.p_rel, e.alignment.canonical_key),
        )
    )
    return ProbabilityReport(reference, positions, report_entries, p_a_sum)


@dataclass(frozen=True)
class InferredSymbol:
    mark: str
    row_index: int
    pattern_id: str


def extract_inferences(
    a: Alignment,
    exclude_service: bool = True,
) -> list[InferredSymbol]:
    """Old-row symbols not aligned with any New symbol, in column order.

    These are what the alignment adds beyond the New pattern: the
    conclusions it licenses.  Service (identification and boundary)
    symbols are excluded by default.
    """
    out = []
    for col, mark in zip(a.columns, a.column_marks):
        if any(r == 0 for r, _ in col):
            continue
        r, p = col[0]
        symbol = a.rows[r].pattern.symbols[p]
        if exclude_service and symbol.kind is not SymbolKind.CONTENT:
            continue
        out.append(InferredSymbol(mark, r, a.rows[r].pattern_id))
    return out


def decode_code_pattern(
    code: Sequence[str],
    grammar,
    config: BuildConfig = BuildConfig(),
) -> SPPattern:
    """Reconstruct a surface pattern from a code pattern.

    Decoding runs exactly the same alignment machinery with the code in
    the New position: the code's symbols select Old patterns, and the
    content symbols those patterns leave unmatched, read in column
    order, are the decoded surface form.
    """
    new = SPPattern.from_marks(code, role=Role.NEW)
    result = build_alignments(new, grammar, config)
    all_positions = frozenset(range(len(code)))
    for a in result.pool:
        if a.new_hit_positions == all_positions:
            surface = []
            for col, mark in zip(a.columns, a.column_marks):
                if len(col) != 1:
                    continue
                r, p = col[0]
                if r == 0:
                    continue
                if a.rows[r].pattern.symbols[p].kind is SymbolKind.CONTENT:
                    surface.append(mark)
            return SPPattern.from_marks(surface, role=Role.NEW)
    raise DecodeError("code pattern selects no fully matching alignment")


# ---------------------------------------------------------------------------
# audit trail


@dataclass
class AuditTrail:
    nodes: dict[str, AuditNode]
    leaves: dict[str, SPPattern]
    roots: tuple[str, ...]

    def to_text(self) -> str:
        lines = ["# id\tstage\tparents\tB_N\tB_E\tCD"]
        for uid in sorted(self.nodes, key=lambda u: (self.nodes[u].stage, _uid_num(u))):
            node = self.nodes[uid]
            lines.append(
                f"{uid}\t{node.stage}\t{','.join(node.parents)}\t"
                f"{node.score.b_n:.4f}\t{node.score.b_e:.4f}\t{node.score.cd:.4f}"
            )
        for pid in sorted(self.leaves):
            lines.append(f"{pid}\tleaf\t-\t-\t-\t-")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "roots": list(self.roots),
            "nodes": [
                {
                    "id": uid,
                    "stage": node.stage,
                    "parents": list(node.parents),
                    "b_n": node.score.b_n,
                    "b_e": node.score.b_e,
                    "cd": node.score.cd,
                }
                for uid, node in sorted(
                    self.nodes.items(), key=lambda kv: (kv[1].stage, _uid_num(kv[0]))
                )
            ],
            "leaves": {pid: " ".join(p.marks) for pid, p in sorted(self.leaves.items())},
        }
        return json.dumps(payload, indent=2)


def _uid_num(uid: str) -> int:
    digits = "".join(ch for ch in uid if ch.isdigit())
    return int(digits) if digits else 0


def audit_trail(result: BuildResult) -> AuditTrail:
    """Full provenance of a build: every retained alignment with its two
    parents and compression measures; leaves are the input patterns."""
    roots = tuple(a.uid for a in result.alignments)
    return AuditTrail(dict(result.audit), dict(result.leaves), roots)


# ---------------------------------------------------------------------------
# rendering


def render_alignment(a: Alignment, gutter: int = 1) -> str:
    """Render rows of symbols with ``|`` connector lines between matched
    symbols, one text row per alignment row, New pattern on top."""
    n_rows = len(a.rows)
    widths = [len(mark) for mark in a.column_marks]
    col_rows = [sorted(r for r, _ in col) for col in a.columns]
    label_w = len(str(n_rows - 1))

    def cell(ci: int, text: str) -> str:
        return text.center(widths[ci])

    lines = []
    for r in range(n_rows):
        parts = []
        for ci, col in enumerate(a.columns):
            rows_here = col_rows[ci]
            if r in rows_here:
                parts.append(cell(ci, a.column_marks[ci]))
            elif rows_here[0] < r < rows_here[-1]:
                parts.append(cell(ci, "|"))
            else:
                parts.append(cell(ci, ""))
        body = (" " * gutter).join(parts)
        lines.append(f"{r:<{label_w}} {body} {r}")
        if r == n_rows - 1:
            break
        parts = []
        for ci in range(len(a.columns)):
            rows_here = col_rows[ci]
            if rows_here[0] <= r < rows_here[-1]:
                parts.append(cell(ci, "|"))
            else:
                parts.append(cell(ci, ""))
        lines.append(f"{'':<{label_w}} {(' ' * gutter).join(parts)}")
    return "\n".join(line.rstrip() for line in lines) + "\n"
