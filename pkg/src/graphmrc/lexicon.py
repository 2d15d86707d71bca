"""Word resources used by the parsers: connectives, negation words, stop words.

The default resources ship with the package as a versioned data file and can
be overridden or extended with a user file in the same format (one entry per
line, ``<role>\\t<surface>\\t[direction]``, ``#`` comments).
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Optional

CONDITION_AFTER = "condition-after"
CONDITION_BEFORE = "condition-before"

_DIRECTIONS = (CONDITION_AFTER, CONDITION_BEFORE)
_ROLES = ("connective", "negation", "stopword")


class LexiconError(ValueError):
    """Malformed lexicon file or an empty collection after loading."""


@dataclass(frozen=True)
class ConnectiveEntry:
    """One connective surface plus the side of it that holds the condition."""

    surface: str
    direction: str

    def __post_init__(self) -> None:
        if not self.surface or self.surface != self.surface.strip().lower():
            raise LexiconError(f"connective surface must be lowercase and trimmed: {self.surface!r}")
        if self.direction not in _DIRECTIONS:
            raise LexiconError(f"unknown direction {self.direction!r} for {self.surface!r}")

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(self.surface.split())


@dataclass(frozen=True)
class LexiconSet:
    connectives: tuple[ConnectiveEntry, ...]
    negation_words: frozenset[str]
    stop_words: frozenset[str]

    def __post_init__(self) -> None:
        surfaces = [c.surface for c in self.connectives]
        if len(surfaces) != len(set(surfaces)):
            dupes = sorted({s for s in surfaces if surfaces.count(s) > 1})
            raise LexiconError(f"duplicate connective surfaces: {dupes}")
        overlap = set(surfaces) & self.negation_words
        if overlap:
            raise LexiconError(f"words cannot be both connective and negation: {sorted(overlap)}")
        for name, coll in (("connectives", surfaces),
                           ("negation words", self.negation_words),
                           ("stop words", self.stop_words)):
            if not coll:
                raise LexiconError(f"lexicon has no {name}")

    @cached_property
    def _by_first_token(self) -> dict[str, tuple[ConnectiveEntry, ...]]:
        # longest phrases first so multiword connectives win over their prefixes
        index: dict[str, list[ConnectiveEntry]] = {}
        for entry in self.connectives:
            index.setdefault(entry.tokens[0], []).append(entry)
        return {
            first: tuple(sorted(entries, key=lambda e: -len(e.tokens)))
            for first, entries in index.items()
        }

    def find_connective(self, surface: str) -> Optional[ConnectiveEntry]:
        for entry in self.connectives:
            if entry.surface == surface:
                return entry
        return None


def classify_token_span(
    tokens: list[str], position: int, lexicon: LexiconSet
) -> Optional[tuple[ConnectiveEntry, int]]:
    """Longest connective phrase starting at ``position``, or None.

    ``tokens`` are lowercase; matching is case-insensitive by construction.
    Returns the entry and the number of tokens it spans.
    """
    if not 0 <= position < len(tokens):
        raise IndexError(f"position {position} out of bounds for {len(tokens)} tokens")
    first = tokens[position].lower()
    for entry in lexicon._by_first_token.get(first, ()):
        span = entry.tokens
        if position + len(span) <= len(tokens):
            window = tuple(t.lower() for t in tokens[position:position + len(span)])
            if window == span:
                return entry, len(span)
    return None


def _parse_lexicon_file(path: Path) -> tuple[list[ConnectiveEntry], set[str], set[str]]:
    connectives: list[ConnectiveEntry] = []
    negations: set[str] = set()
    stops: set[str] = set()
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split("\t")]
        if len(parts) < 2 or not parts[1]:
            raise LexiconError(f"{path}:{lineno}: expected <role>\\t<surface>\\t[direction]")
        role, surface = parts[0], parts[1].lower()
        if role == "connective":
            if len(parts) < 3 or parts[2] not in _DIRECTIONS:
                raise LexiconError(
                    f"{path}:{lineno}: connective needs a direction in {_DIRECTIONS}"
                )
            connectives.append(ConnectiveEntry(surface, parts[2]))
        elif role == "negation":
            negations.add(surface)
        elif role == "stopword":
            stops.add(surface)
        else:
            raise LexiconError(f"{path}:{lineno}: unknown role {role!r} (expected one of {_ROLES})")
    return connectives, negations, stops


def _default_path() -> Path:
    return Path(importlib.resources.files("graphmrc")) / "resources" / "default_lexicon.tsv"


def load_lexicon(path: Optional[str | Path] = None, *, merge_defaults: bool = True) -> LexiconSet:
    """Load the default lexicon, optionally merged with a user file.

    With a path, user entries are added to the defaults and a user connective
    replaces a default one with the same surface. ``merge_defaults=False``
    loads the file standalone.
    """
    connectives: dict[str, ConnectiveEntry] = {}
    negations: set[str] = set()
    stops: set[str] = set()
    if path is None or merge_defaults:
        base_conn, negations, stops = _parse_lexicon_file(_default_path())
        connectives = {c.surface: c for c in base_conn}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise LexiconError(f"lexicon file not found: {p}")
        user_conn, user_neg, user_stop = _parse_lexicon_file(p)
        for entry in user_conn:
            connectives[entry.surface] = entry
        negations |= user_neg
        stops |= user_stop
    return LexiconSet(
        connectives=tuple(sorted(connectives.values(), key=lambda e: e.surface)),
        negation_words=frozenset(negations),
        stop_words=frozenset(stops),
    )
