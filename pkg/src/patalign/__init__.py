"""patalign: multiple-alignment of symbol patterns driven by compression.

The engine aligns an incoming (New) symbol pattern against stored (Old)
patterns in column structures scored by how many bits of the New pattern
they save, computes probabilities over the competing alignments, and
induces grammars from raw corpora by minimizing the two-part description
length T = G + E.
"""

from .alignment import (
    Alignment,
    AlignmentScore,
    AuditTrail,
    BuildConfig,
    BuildResult,
    CodeDerivation,
    ComposeLimits,
    DecodeError,
    InferredSymbol,
    ProbabilityEntry,
    ProbabilityReport,
    alignment_probabilities,
    audit_trail,
    build_alignments,
    compose_pair,
    decode_code_pattern,
    derive_code_pattern,
    extract_inferences,
    render_alignment,
    score_alignment,
    trivial_alignment,
)
from .coding import (
    BitCost,
    CodeScheme,
    UnknownMarkError,
    build_code_scheme,
    code_size_of_sequence,
    entropy,
    redundancy,
    search_space_stats,
)
from .core import (
    Corpus,
    FormatError,
    Role,
    SPPattern,
    SPSymbol,
    SymbolKind,
    classify_mark,
    parse_pattern_file,
    serialize_pattern_file,
    validate_pattern,
)
from .learning import (
    AssimilationEvent,
    FrequencyTable,
    Grammar,
    GrammarScore,
    LearnConfig,
    LearnResult,
    PatternEncoding,
    PatternStore,
    assimilate_new_pattern,
    canonical_form,
    canonicalize_grammar,
    compute_grammar_frequencies,
    learn_grammars,
    score_grammar,
)
from .matcher import (
    Hit,
    HitSequence,
    MatchLimits,
    OracleBoundError,
    brute_force_matches,
    find_matches,
    hit_sequence_probability,
)

__version__ = "0.1.0"
