"""Tokenization and the two segmentation strategies.

``split_logical_units`` breaks text at punctuation and at connectives
(connectives are consumed); ``split_sentence_nodes`` breaks at punctuation
only and keeps connectives inside the node text.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .lexicon import ConnectiveEntry, LexiconSet, classify_token_span

# punctuation that terminates a fragment in both segmentations
PUNCTUATION = frozenset(".,;:!?")
# punctuation that ends a sentence; condition-after connectives never pair
# backwards across these (see logic_graph)
STRONG_PUNCTUATION = frozenset(".;!?")


@dataclass(frozen=True)
class Token:
    surface: str
    lower: str
    char_span: tuple[int, int]
    index: int


@dataclass(frozen=True)
class LogicalUnit:
    """A contiguous text fragment carrying one event or argument."""

    id: int  # 1-based within its segmentation
    token_range: tuple[int, int]  # half-open over the source token list
    text: str
    negated: bool
    introducing_connective: Optional[ConnectiveEntry] = None


@dataclass(frozen=True)
class SegmentationResult:
    units: tuple[LogicalUnit, ...]
    consumed_connectives: tuple[tuple[ConnectiveEntry, int], ...]
    source_tokens: tuple[Token, ...]


def tokenize(text: str) -> list[Token]:
    """Whitespace tokenization with {. , ; : ! ?} split off as single tokens."""
    tokens: list[Token] = []
    start: Optional[int] = None

    def flush(end: int) -> None:
        nonlocal start
        if start is not None:
            surface = text[start:end]
            tokens.append(Token(surface, surface.lower(), (start, end), len(tokens)))
            start = None

    for i, ch in enumerate(text):
        if ch.isspace():
            flush(i)
        elif ch in PUNCTUATION:
            flush(i)
            tokens.append(Token(ch, ch, (i, i + 1), len(tokens)))
        elif start is None:
            start = i
    flush(len(text))
    return tokens


def is_negated(token_lowers: list[str], lexicon: LexiconSet) -> bool:
    return any(t in lexicon.negation_words or t.endswith("n't") for t in token_lowers)


def _make_unit(
    text: str,
    tokens: list[Token],
    frag: tuple[int, int],
    unit_id: int,
    lexicon: LexiconSet,
    connective: Optional[ConnectiveEntry],
) -> LogicalUnit:
    a, b = frag
    surface = text[tokens[a].char_span[0]:tokens[b - 1].char_span[1]]
    lowers = [tokens[i].lower for i in range(a, b)]
    return LogicalUnit(
        id=unit_id,
        token_range=(a, b),
        text=surface,
        negated=is_negated(lowers, lexicon),
        introducing_connective=connective,
    )


def split_logical_units(text: str, lexicon: LexiconSet) -> SegmentationResult:
    """Segment at punctuation and connectives; connectives are consumed."""
    tokens = tokenize(text)
    lowers = [t.lower for t in tokens]
    units: list[LogicalUnit] = []
    consumed: list[tuple[ConnectiveEntry, int]] = []
    frag_start: Optional[int] = None
    pending: Optional[ConnectiveEntry] = None  # connective that introduces the next unit

    def close(end: int) -> None:
        nonlocal frag_start, pending
        if frag_start is not None and end > frag_start:
            units.append(_make_unit(text, tokens, (frag_start, end), len(units) + 1, lexicon, pending))
            pending = None
        frag_start = None

    i = 0
    while i < len(tokens):
        if tokens[i].lower in PUNCTUATION:
            close(i)
            pending = None
            i += 1
            continue
        match = classify_token_span(lowers, i, lexicon)
        if match is not None:
            entry, span = match
            close(i)
            consumed.append((entry, i))
            pending = entry
            i += span
            continue
        if frag_start is None:
            frag_start = i
        i += 1
    close(len(tokens))
    return SegmentationResult(
        units=tuple(units),
        consumed_connectives=tuple(consumed),
        source_tokens=tuple(tokens),
    )


def _carries_semantics(lowers: list[str], lexicon: LexiconSet, start: int, stop: int) -> bool:
    """True if the fragment has at least one token outside connective phrases."""
    i = start
    while i < stop:
        match = classify_token_span(lowers, i, lexicon)
        if match is None:
            return True
        i += match[1]
    return False


def split_sentence_nodes(
    text: str,
    lexicon: LexiconSet,
    punctuation: frozenset[str] = PUNCTUATION,
) -> list[LogicalUnit]:
    """Segment at punctuation only; connectives stay inside the node text.

    Fragments made solely of connectives are dropped, mirroring the logical
    split's rule that a unit must carry semantics.
    """
    tokens = tokenize(text)
    lowers = [t.lower for t in tokens]
    nodes: list[LogicalUnit] = []
    frag_start: Optional[int] = None

    def close(end: int) -> None:
        nonlocal frag_start
        if frag_start is not None and _carries_semantics(lowers, lexicon, frag_start, end):
            nodes.append(_make_unit(text, tokens, (frag_start, end), len(nodes) + 1, lexicon, None))
        frag_start = None

    for i, tok in enumerate(tokens):
        if tok.lower in punctuation:
            close(i)
        elif frag_start is None:
            frag_start = i
    close(len(tokens))
    return nodes
