"""Pattern data model, text file formats, and validation.

Knowledge is represented as flat sequences of atomic symbols ("marks")
matched purely by string equality.  A pattern is an ordered sequence of
such symbols plus a notional occurrence frequency, and is either New
(incoming data) or Old (stored knowledge).  Everything else in the
engine -- alignment, scoring, learning -- is built on these types.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence


class FormatError(ValueError):
    """Raised for malformed pattern files; carries a 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SymbolKind(enum.Enum):
    CONTENT = "content"
    IDENTIFICATION = "identification"
    BOUNDARY = "boundary"


_DIGITS_RE = re.compile(r"^[0-9]+$")


def classify_mark(mark: str, id_marks: frozenset[str] = frozenset()) -> SymbolKind:
    """Classify a mark from its syntax alone.

    ``<`` and ``>`` are boundary marks.  Marks starting with ``%`` or
    ``#``, marks consisting only of decimal digits, and marks listed in
    the (configurable) ``id_marks`` set are identification marks.
    Everything else is content.  This convention is overridable, not
    canonical: ``id_marks`` lets a knowledge base declare extra service
    marks (e.g. class labels written as plain words).
    """
    if mark in ("<", ">"):
        return SymbolKind.BOUNDARY
    if mark.startswith("%") or mark.startswith("#"):
        return SymbolKind.IDENTIFICATION
    if _DIGITS_RE.match(mark):
        return SymbolKind.IDENTIFICATION
    if mark in id_marks:
        return SymbolKind.IDENTIFICATION
    return SymbolKind.CONTENT


@dataclass(frozen=True)
class SPSymbol:
    """An atomic mark; equality of marks is exact string equality."""

    mark: str
    kind: SymbolKind

    def __post_init__(self):
        if not self.mark or any(ch.isspace() for ch in self.mark):
            raise ValueError(f"invalid mark {self.mark!r}: must be non-empty, no whitespace")

    @classmethod
    def of(cls, mark: str, id_marks: frozenset[str] = frozenset()) -> "SPSymbol":
        return cls(mark, classify_mark(mark, id_marks))


class Role(enum.Enum):
    NEW = "New"
    OLD = "Old"


@dataclass(frozen=True)
class SPPattern:
    """An ordered sequence of symbols with a notional frequency and a role."""

    symbols: tuple[SPSymbol, ...]
    frequency: int = 1
    role: Role = Role.OLD

    def __post_init__(self):
        object.__setattr__(self, "marks", tuple(s.mark for s in self.symbols))

    @classmethod
    def from_marks(
        cls,
        marks: Sequence[str],
        frequency: int = 1,
        role: Role = Role.OLD,
        id_marks: frozenset[str] = frozenset(),
    ) -> "SPPattern":
        return cls(tuple(SPSymbol.of(m, id_marks) for m in marks), frequency, role)

    def content_marks(self) -> tuple[str, ...]:
        """Marks of the content symbols only (service symbols stripped)."""
        return tuple(s.mark for s in self.symbols if s.kind is SymbolKind.CONTENT)

    def with_frequency(self, frequency: int) -> "SPPattern":
        return SPPattern(self.symbols, frequency, self.role)

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self) -> Iterator[SPSymbol]:
        return iter(self.symbols)


@dataclass(frozen=True)
class Corpus:
    """An ordered collection of New patterns (the data to be encoded)."""

    new_patterns: tuple[SPPattern, ...] = field(default_factory=tuple)

    def __post_init__(self):
        for p in self.new_patterns:
            if p.role is not Role.NEW:
                raise ValueError("corpus members must have role New")

    def __len__(self) -> int:
        return len(self.new_patterns)

    def __iter__(self) -> Iterator[SPPattern]:
        return iter(self.new_patterns)


def validate_pattern(p: SPPattern) -> list[str]:
    """Return every invariant violation of ``p``; empty list means ok."""
    violations = []
    if len(p.symbols) == 0:
        violations.append("empty pattern")
    if p.frequency < 1:
        violations.append("non-positive frequency")
    for s in p.symbols:
        if not s.mark or any(ch.isspace() for ch in s.mark):
            violations.append(f"invalid mark {s.mark!r}")
    return violations


_FREQ_RE = re.compile(r"^@(\d+)$")


def parse_pattern_file(
    text: str,
    role: Role,
    id_marks: frozenset[str] = frozenset(),
) -> list[SPPattern]:
    """Parse a pattern document: one pattern per non-comment line.

    Tokens are split on runs of spaces/tabs.  Lines starting with ``;``
    and blank lines are ignored.  A leading ``@N`` token (N a positive
    decimal) sets the pattern frequency; the default is 1.  Line order
    is preserved.
    """
    patterns = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith(";"):
            continue
        tokens = line.split()
        frequency = 1
        m = _FREQ_RE.match(tokens[0])
        if m:
            frequency = int(m.group(1))
            if frequency < 1:
                raise FormatError(f"non-positive frequency {tokens[0]!r}", lineno)
            tokens = tokens[1:]
        elif tokens[0].startswith("@"):
            raise FormatError(f"malformed frequency token {tokens[0]!r}", lineno)
        if not tokens:
            raise FormatError("empty pattern after frequency prefix", lineno)
        patterns.append(SPPattern.from_marks(tokens, frequency, role, id_marks))
    return patterns


def serialize_pattern_file(patterns: Iterable[SPPattern]) -> str:
    """Inverse of :func:`parse_pattern_file`: round-trips all valid patterns."""
    lines = []
    for p in patterns:
        prefix = f"@{p.frequency} " if p.frequency > 1 else ""
        lines.append(prefix + " ".join(p.marks))
    return "".join(line + "\n" for line in lines)
