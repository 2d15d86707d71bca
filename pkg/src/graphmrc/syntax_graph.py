"""Symmetric co-occurrence graph over sentence nodes.

Two nodes are connected when the overlap ratio of their stop-word-filtered
token sets strictly exceeds the threshold ``delta``; the ratio denominator is
the smaller set size.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .segmenter import PUNCTUATION, LogicalUnit, tokenize


@dataclass(frozen=True)
class SyntaxGraph:
    nodes: tuple[LogicalUnit, ...]
    adjacency: np.ndarray  # (K, K) binary, symmetric, zero diagonal
    delta: float

    @property
    def size(self) -> int:
        return len(self.nodes)

    def edges(self) -> list[tuple[int, int]]:
        k = self.size
        return [(i + 1, j + 1) for i in range(k) for j in range(i + 1, k) if self.adjacency[i, j]]

    def to_dot(self, name: str = "syntax") -> str:
        lines = [f"graph {name} {{"]
        for node in self.nodes:
            label = f"S{node.id}: " + node.text.replace('"', "'")
            lines.append(f'  S{node.id} [label="{label}"];')
        for i, j in self.edges():
            lines.append(f"  S{i} -- S{j};")
        lines.append("}")
        return "\n".join(lines)


def token_set(unit: LogicalUnit, stop_words: Iterable[str]) -> frozenset[str]:
    """Deduplicated lowercase tokens of the unit, minus stop words and punctuation."""
    stops = frozenset(stop_words)
    return frozenset(
        tok.lower
        for tok in tokenize(unit.text)
        if tok.lower not in PUNCTUATION and tok.lower not in stops
    )


def overlap_ratio(a: frozenset[str], b: frozenset[str]) -> float:
    if not a or not b:
        raise ValueError("overlap_ratio requires non-empty token sets (caller must guard)")
    return len(a & b) / min(len(a), len(b))


def build_syntax_graph(
    nodes: Sequence[LogicalUnit],
    stop_words: Iterable[str],
    delta: float = 0.5,
) -> SyntaxGraph:
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    stops = frozenset(stop_words)
    nodes = tuple(nodes)
    sets = [token_set(u, stops) for u in nodes]
    k = len(nodes)
    adjacency = np.zeros((k, k), dtype=np.int64)
    for i in range(k):
        for j in range(i + 1, k):
            if sets[i] and sets[j] and overlap_ratio(sets[i], sets[j]) > delta:
                adjacency[i, j] = 1
                adjacency[j, i] = 1
    return SyntaxGraph(nodes=nodes, adjacency=adjacency, delta=delta)
