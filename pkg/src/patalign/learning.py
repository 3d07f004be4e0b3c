"""Unsupervised grammar induction: assimilation plus MDL search.

New patterns are folded one at a time into a growing store of Old
patterns.  A pattern that is fully accounted for bumps the frequencies
of the patterns that cover it; a pattern with no usable partial match is
wrapped in fresh service symbols and stored verbatim; a pattern that
partially matches a stored pattern is split, together with its partner,
into matched segments, slot classes for the differing parts, and an
abstract pattern sequencing references to them.

Candidate grammars are then assembled from the full alignments each
corpus pattern obtains under the final store, and ranked by the two-part
description length T = G + E: G prices the grammar's own symbols and E
prices the per-pattern encodings, both under a Shannon-Fano-Elias scheme
computed from occurrence counts over the alignment sets.  Grammars with
high T are pruned after every corpus pattern.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .alignment import (
    Alignment,
    BuildConfig,
    build_alignments,
    derive_code_pattern,
    score_alignment,
)
from .coding import CodeScheme, build_code_scheme
from .core import Corpus, Role, SPPattern, SymbolKind
from .matcher import MatchLimits, find_matches


@dataclass(frozen=True)
class GrammarScore:
    g: float
    e: float
    t: float

    def __post_init__(self):
        if abs(self.t - (self.g + self.e)) > 1e-9:
            raise ValueError("T must equal G + E")

    @classmethod
    def of(cls, g: float, e: float) -> "GrammarScore":
        return cls(g, e, g + e)


@dataclass
class Grammar:
    """A collection of Old patterns, optionally scored against a corpus."""

    patterns: tuple[SPPattern, ...]
    score: GrammarScore | None = None

    def __post_init__(self):
        for p in self.patterns:
            if p.role is not Role.OLD:
                raise ValueError("grammar members must have role Old")

    def __len__(self) -> int:
        return len(self.patterns)

    def __iter__(self):
        return iter(self.patterns)


@dataclass
class FrequencyTable:
    """Occurrence counts over per-pattern alignment subsets.

    Both tables use the same counting rule: within each subset the
    maximum count in any one alignment, summed over subsets."""

    pattern_freq: dict[str, int]
    type_freq: dict[str, int]
    patterns_by_id: dict[str, SPPattern]
    subset_count: int


def compute_grammar_frequencies(
    subsets: Sequence[Sequence[Alignment]],
) -> FrequencyTable:
    pattern_freq: dict[str, int] = {}
    type_freq: dict[str, int] = {}
    patterns_by_id: dict[str, SPPattern] = {}
    for subset in subsets:
        best_pattern: dict[str, int] = {}
        best_type: dict[str, int] = {}
        for alignment in subset:
            pat_counts: dict[str, int] = {}
            mark_counts: dict[str, int] = {}
            for row in alignment.rows[1:]:
                pat_counts[row.pattern_id] = pat_counts.get(row.pattern_id, 0) + 1
                patterns_by_id[row.pattern_id] = row.pattern
                for mark in row.pattern.marks:
                    mark_counts[mark] = mark_counts.get(mark, 0) + 1
            for pid, c in pat_counts.items():
                if c > best_pattern.get(pid, 0):
                    best_pattern[pid] = c
            for mark, c in mark_counts.items():
                if c > best_type.get(mark, 0):
                    best_type[mark] = c
        for pid, c in best_pattern.items():
            pattern_freq[pid] = pattern_freq.get(pid, 0) + c
        for mark, c in best_type.items():
            type_freq[mark] = type_freq.get(mark, 0) + c
    return FrequencyTable(pattern_freq, type_freq, patterns_by_id, len(subsets))


# ---------------------------------------------------------------------------
# pattern store and assimilation


@dataclass
class StoreEntry:
    marks: tuple[str, ...]
    frequency: int
    class_mark: str | None
    origin: str

    def pattern(self) -> SPPattern:
        return SPPattern.from_marks(self.marks, self.frequency, Role.OLD)

    def content(self) -> tuple[str, ...]:
        return tuple(
            s.mark for s in self.pattern().symbols if s.kind is SymbolKind.CONTENT
        )


class PatternStore:
    """Growing store of Old patterns with fresh service-mark generation."""

    def __init__(self, preload: Iterable[SPPattern] = ()):
        self.entries: list[StoreEntry] = []
        self._by_content: dict[tuple[str, ...], int] = {}
        self._class_counter = 0
        self._disc_counter = 0
        for p in preload:
            self._admit(StoreEntry(p.marks, p.frequency, self._class_of(p), "preload"))

    @staticmethod
    def _class_of(p: SPPattern) -> str | None:
        for s in p.symbols:
            if s.mark.startswith("%"):
                return s.mark
        return None

    def fresh_class(self) -> str:
        self._class_counter += 1
        return f"%{self._class_counter}"

    def fresh_disc(self) -> str:
        self._disc_counter += 1
        return str(self._disc_counter)

    def _admit(self, entry: StoreEntry) -> int:
        idx = len(self.entries)
        self.entries.append(entry)
        self._by_content.setdefault(entry.content(), idx)
        return idx

    def find_by_content(self, marks: tuple[str, ...]) -> int | None:
        return self._by_content.get(tuple(marks))

    def add_wrapped(
        self, content: tuple[str, ...], class_mark: str | None = None, origin: str = "wrap"
    ) -> int:
        cls = class_mark or self.fresh_class()
        marks = ("<", cls, self.fresh_disc()) + tuple(content) + (">",)
        return self._admit(StoreEntry(marks, 1, cls, origin))

    def add_abstract(self, slot_classes: Sequence[str]) -> int:
        marks: tuple[str, ...] = ("<", self.fresh_disc())
        for cls in slot_classes:
            marks += ("<", cls, ">")
        marks += (">",)
        return self._admit(StoreEntry(marks, 1, None, "abstract"))

    def bump(self, idx: int, by: int = 1) -> None:
        self.entries[idx].frequency += by

    def ids(self) -> list[str]:
        width = len(str(len(self.entries)))
        return [f"P{i + 1:0{width}d}" for i in range(len(self.entries))]

    def as_patterns(self) -> list[SPPattern]:
        return [e.pattern() for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class LearnConfig:
    grammar_beam: int = 20
    prune_period: int = 1
    alternatives: int = 6
    match_threshold_fraction: float = 0.25
    min_match_symbols: int = 2
    code_mode: str = "sfe"
    alphabet_size: int = 2
    build: BuildConfig = BuildConfig()

    def build_config(self, scheme: CodeScheme | None = None) -> BuildConfig:
        return BuildConfig(
            beam_width=self.build.beam_width,
            max_stages=self.build.max_stages,
            max_results=self.build.max_results,
            compose=self.build.compose,
            code_mode=self.code_mode,
            alphabet_size=self.alphabet_size,
            scheme=scheme,
        )


@dataclass
class AssimilationEvent:
    item_index: int
    case: int
    driver: str | None
    created: tuple[str, ...]
    bumped: tuple[str, ...]

    def record(self) -> str:
        created = ",".join(self.created) or "-"
        bumped = ",".join(self.bumped) or "-"
        return (
            f"{self.item_index}\tcase{self.case}\t"
            f"driver={self.driver or '-'}\tcreated={created}\tbumped={bumped}"
        )


def _full_coverage(a: Alignment) -> bool:
    return a.new_hit_positions == frozenset(range(len(a.new_pattern)))


def _all_old_content_matched(a: Alignment) -> bool:
    for col in a.columns:
        if len(col) != 1:
            continue
        r, p = col[0]
        if r != 0 and a.rows[r].pattern.symbols[p].kind is SymbolKind.CONTENT:
            return False
    return True


def assimilate_new_pattern(
    new: SPPattern,
    store: PatternStore,
    config: LearnConfig = LearnConfig(),
    item_index: int = 0,
) -> AssimilationEvent:
    """Fold one New pattern into the store (three cases).

    Case 1: some alignment over the store matches every New symbol and
    leaves no stored content symbol unmatched; the participating
    patterns' frequencies are incremented.  Case 3: the best pairwise
    match against a stored pattern's content covers enough of the shorter
    span; both sides are split into matched segments and slot classes,
    plus an abstract pattern sequencing the segments.  Case 2 otherwise:
    the pattern is wrapped in fresh service symbols and stored whole.
    """
    ids = store.ids()
    scheme = None
    if len(store):
        scheme = build_code_scheme(
            store.as_patterns(),
            code_mode=config.code_mode,
            alphabet_size_for_matching=config.alphabet_size,
        )
        result = build_alignments(new, store.as_patterns(), config.build_config(scheme))
        for a in result.pool:
            if _full_coverage(a) and _all_old_content_matched(a):
                bumped = sorted(set(a.pattern_counts))
                for pid in bumped:
                    store.bump(ids.index(pid))
                return AssimilationEvent(item_index, 1, None, (), tuple(bumped))

        # best pairwise partial match against stored content
        best = None  # (log_p, entry_idx, hit_sequence, content)
        for idx, entry in enumerate(store.entries):
            content = entry.content()
            if not content:
                continue
            seqs = find_matches(
                list(new.marks),
                list(content),
                scheme,
                MatchLimits(max_results=1),
            )
            if not seqs:
                continue
            seq = seqs[0]
            key = (seq.log2_probability, idx)
            if best is None or key < best[0]:
                best = (key, idx, seq, content)
        if best is not None:
            _key, idx, seq, content = best
            shorter = min(len(new.marks), len(content))
            if seq.n >= config.min_match_symbols and seq.n >= (
                config.match_threshold_fraction * shorter
            ):
                return _split(new, store, idx, seq, content, item_index, ids)

    pid = f"P{store.add_wrapped(tuple(new.marks)) + 1}"
    return AssimilationEvent(item_index, 2, None, (pid,), ())


def _split(new, store, driver_idx, seq, content, item_index, ids):
    """Case 3: decompose New and the driver's content along the hit runs."""
    hits = [(h.pos_a, h.pos_b) for h in seq.hits]
    runs: list[list[tuple[int, int]]] = []
    for i, j in hits:
        if runs and runs[-1][-1][0] == i - 1 and runs[-1][-1][1] == j - 1:
            runs[-1].append((i, j))
        else:
            runs.append([(i, j)])

    segments: list[tuple[str, tuple[str, ...], tuple[str, ...]]] = []
    prev_i, prev_j = 0, 0
    for run in runs:
        i0, j0 = run[0]
        gap_new = tuple(new.marks[prev_i:i0])
        gap_old = tuple(content[prev_j:j0])
        if gap_new or gap_old:
            segments.append(("slot", gap_new, gap_old))
        segments.append(("match", tuple(new.marks[i] for i, _ in run), ()))
        prev_i, prev_j = run[-1][0] + 1, run[-1][1] + 1
    tail_new = tuple(new.marks[prev_i:])
    tail_old = tuple(content[prev_j:])
    if tail_new or tail_old:
        segments.append(("slot", tail_new, tail_old))

    created: list[str] = []
    bumped: list[str] = []
    slot_classes: list[str] = []

    def reuse_or_create(marks: tuple[str, ...], class_mark: str | None) -> tuple[str, int]:
        existing = store.find_by_content(marks)
        if existing is not None:
            store.bump(existing)
            bumped.append(f"P{existing + 1}")
            return store.entries[existing].class_mark or class_mark or store.fresh_class(), existing
        cls = class_mark or store.fresh_class()
        idx = store.add_wrapped(marks, cls, "segment")
        created.append(f"P{idx + 1}")
        return cls, idx

    for kind, side_new, side_old in segments:
        if kind == "match":
            cls, _ = reuse_or_create(side_new, None)
            slot_classes.append(cls)
        else:
            cls = None
            old_existing = store.find_by_content(side_old) if side_old else None
            if old_existing is not None:
                cls = store.entries[old_existing].class_mark
            if side_old:
                cls, _ = reuse_or_create(side_old, cls)
            if side_new:
                cls, _ = reuse_or_create(side_new, cls)
            slot_classes.append(cls)

    abstract_idx = store.add_abstract(slot_classes)
    created.append(f"P{abstract_idx + 1}")
    return AssimilationEvent(
        item_index, 3, ids[driver_idx], tuple(created), tuple(bumped)
    )


# ---------------------------------------------------------------------------
# grammar scoring


@dataclass
class PatternEncoding:
    item: SPPattern
    code: tuple[str, ...]
    bits: float
    covered: bool
    alignment: Alignment | None


def _uniform_fallback_bits(item: SPPattern, alphabet: set[str]) -> float:
    r = max(2, len(alphabet))
    return len(item.marks) * (math.ceil(math.log2(r)) + 1)


def score_grammar(
    grammar: Grammar | Sequence[SPPattern],
    corpus: Corpus | Sequence[SPPattern],
    code_mode: str = "sfe",
    scheme: CodeScheme | None = None,
    build: BuildConfig | None = None,
) -> tuple[GrammarScore, list[PatternEncoding]]:
    """Two-part description length of a corpus under a grammar.

    G sums the code sizes of every symbol of every grammar pattern; E
    sums, per corpus pattern, the code size of the code pattern derived
    from its best fully covering alignment.  A corpus pattern with no
    fully covering alignment is flagged uncovered and charged its raw
    length under a uniform fallback code, so imperfect grammars score
    badly instead of failing.
    """
    patterns = list(getattr(grammar, "patterns", grammar))
    if not patterns:
        raise ValueError("cannot score an empty grammar")
    items = list(getattr(corpus, "new_patterns", corpus))
    scheme = scheme or build_code_scheme(patterns, code_mode=code_mode)
    g_bits = sum(scheme.cost(m) for p in patterns for m in p.marks)

    base = build or BuildConfig()
    cfg = BuildConfig(
        beam_width=base.beam_width,
        max_stages=base.max_stages,
        max_results=base.max_results,
        compose=base.compose,
        code_mode=code_mode,
        alphabet_size=base.alphabet_size,
        scheme=scheme,
    )
    alphabet = {m for p in patterns for m in p.marks}
    for item in items:
        alphabet.update(item.marks)

    encodings = []
    e_bits = 0.0
    for item in items:
        result = build_alignments(item, patterns, cfg)
        full = next((a for a in result.pool if _full_coverage(a)), None)
        if full is None:
            bits = _uniform_fallback_bits(item, alphabet)
            encodings.append(PatternEncoding(item, tuple(item.marks), bits, False, None))
        else:
            code = derive_code_pattern(full).code
            bits = score_alignment(full, scheme).b_e
            encodings.append(PatternEncoding(item, code, bits, True, full))
        e_bits += encodings[-1].bits
    return GrammarScore.of(g_bits, e_bits), encodings


# ---------------------------------------------------------------------------
# grammar search


@dataclass
class LearnResult:
    grammars: list[Grammar]
    frequency_table: FrequencyTable
    scheme: CodeScheme
    events: list[AssimilationEvent]
    encodings: list[PatternEncoding]
    store_patterns: list[SPPattern]

    @property
    def best(self) -> Grammar:
        return self.grammars[0]

    def provenance_text(self) -> str:
        lines = ["# item\tcase\tdriver\tcreated\tbumped"]
        lines.extend(e.record() for e in self.events)
        return "\n".join(lines) + "\n"


def learn_grammars(
    corpus: Corpus | Sequence[SPPattern],
    config: LearnConfig = LearnConfig(),
    preload: Sequence[SPPattern] = (),
) -> LearnResult:
    """Assimilate a corpus in order, then search grammar space by T.

    Preloaded Old patterns join the store up front and their content
    spans are prepended as virtual corpus items: compression stays
    lossless over old knowledge as well as new, so decompositions that
    split a preloaded pattern keep every branch needed to regenerate it.

    The search keeps one grammar state per distinct pattern subset that
    covers the items processed so far, extending states with each item's
    alternative full alignments and pruning to the ``grammar_beam`` best
    by T after every item.
    """
    items = [
        SPPattern.from_marks(p.content_marks() or p.marks, role=Role.NEW)
        for p in preload
    ]
    items += list(getattr(corpus, "new_patterns", corpus))
    if not items:
        raise ValueError("corpus is empty")
    store = PatternStore(preload)
    events = []
    for index, item in enumerate(items):
        events.append(assimilate_new_pattern(item, store, config, index))

    patterns = store.as_patterns()
    ids = store.ids()
    id_of = dict(zip(ids, range(len(ids))))
    cfg = config.build_config()
    subsets: list[list[Alignment]] = []
    for item in items:
        result = build_alignments(item, patterns, cfg)
        fulls = [a for a in result.pool if _full_coverage(a)]
        subsets.append(fulls[: config.alternatives])

    ftable = compute_grammar_frequencies(subsets)
    scheme = CodeScheme.from_frequencies(
        ftable.type_freq, config.code_mode, config.alphabet_size
    )
    alphabet = set(ftable.type_freq)
    for item in items:
        alphabet.update(item.marks)

    pattern_cost = {
        pid: sum(scheme.cost(m) for m in pat.marks)
        for pid, pat in ftable.patterns_by_id.items()
    }

    # states: pattern-id frozenset -> (e_bits, choices)
    states: dict[frozenset[str], tuple[float, tuple[Alignment | None, ...]]] = {
        frozenset(): (0.0, ())
    }

    def state_t(key: frozenset[str], e_bits: float) -> float:
        return sum(pattern_cost[pid] for pid in key) + e_bits

    for item, fulls in zip(items, subsets):
        choices: list[tuple[Alignment | None, float, frozenset[str]]] = []
        if fulls:
            for a in fulls:
                e = score_alignment(a, scheme).b_e
                choices.append((a, e, frozenset(a.pattern_counts)))
        else:
            choices.append((None, _uniform_fallback_bits(item, alphabet), frozenset()))
        nxt: dict[frozenset[str], tuple[float, tuple[Alignment | None, ...]]] = {}
        for key, (e_bits, chosen) in states.items():
            for a, e, pats in choices:
                nkey = key | pats
                ne = e_bits + e
                if nkey not in nxt or ne < nxt[nkey][0]:
                    nxt[nkey] = (ne, chosen + (a,))
        ranked = sorted(
            nxt.items(), key=lambda kv: (state_t(kv[0], kv[1][0]), sorted(kv[0]))
        )
        states = dict(ranked[: config.grammar_beam])

    final = sorted(states.items(), key=lambda kv: (state_t(kv[0], kv[1][0]), sorted(kv[0])))
    grammars = []
    best_choices: tuple[Alignment | None, ...] = ()
    for key, (e_bits, chosen) in final:
        members = sorted(key, key=lambda pid: id_of[pid])
        pats = tuple(
            ftable.patterns_by_id[pid].with_frequency(
                max(1, ftable.pattern_freq.get(pid, 1))
            )
            for pid in members
        )
        grammars.append(
            Grammar(pats, GrammarScore.of(state_t(key, 0.0), e_bits))
        )
        if not best_choices:
            best_choices = chosen

    encodings = []
    for item, choice in zip(items, best_choices):
        if choice is None:
            encodings.append(
                PatternEncoding(item, tuple(item.marks), _uniform_fallback_bits(item, alphabet), False, None)
            )
        else:
            encodings.append(
                PatternEncoding(
                    item,
                    derive_code_pattern(choice).code,
                    score_alignment(choice, scheme).b_e,
                    True,
                    choice,
                )
            )
    return LearnResult(grammars, ftable, scheme, events, encodings, patterns)


# ---------------------------------------------------------------------------
# canonical form


def _shape_key(p: SPPattern) -> tuple:
    shape = []
    for s in p.symbols:
        if s.mark in ("<", ">"):
            shape.append(s.mark)
        elif s.mark.startswith("%"):
            shape.append("%")
        elif s.mark.isdigit():
            shape.append("#")
        else:
            shape.append(s.mark)
    return (tuple(shape), p.marks)


def canonicalize_grammar(g: Grammar | Sequence[SPPattern]) -> Grammar:
    """Deterministically rename class marks and discriminators.

    Patterns are sorted by a rename-independent shape key; class marks
    (``%``-prefixed) and discriminators (pure digit marks) are renumbered
    by first use in that traversal.  Two grammars are isomorphic exactly
    when their canonical forms list the same mark sequences.  Idempotent.
    """
    patterns = list(getattr(g, "patterns", g))
    ordered = sorted(patterns, key=_shape_key)
    class_map: dict[str, str] = {}
    disc_map: dict[str, str] = {}
    renamed = []
    for p in ordered:
        marks = []
        for s in p.symbols:
            m = s.mark
            if m.startswith("%"):
                m = class_map.setdefault(m, f"%{len(class_map) + 1}")
            elif m.isdigit():
                m = disc_map.setdefault(m, str(len(disc_map) + 1))
            marks.append(m)
        renamed.append(SPPattern.from_marks(marks, p.frequency, Role.OLD))
    return Grammar(tuple(renamed))


def canonical_form(g: Grammar | Sequence[SPPattern]) -> tuple[tuple[str, ...], ...]:
    """Frequency-free canonical fingerprint used for isomorphism checks."""
    return tuple(p.marks for p in canonicalize_grammar(g).patterns)
