"""Directed causal graph over logical units, plus the rendered expression.

The adjacency matrix holds 1 at [condition-1, result-1] for each causal pair
and -1 on the diagonal for negated units; it is directed and in general
asymmetric.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .lexicon import CONDITION_AFTER, ConnectiveEntry, LexiconSet
from .segmenter import STRONG_PUNCTUATION, LogicalUnit, SegmentationResult


@dataclass(frozen=True)
class CausalPair:
    condition_id: int
    result_id: int
    connective: ConnectiveEntry

    def __post_init__(self) -> None:
        if self.condition_id == self.result_id:
            raise ValueError(f"causal pair cannot be reflexive (unit {self.condition_id})")


@dataclass(frozen=True)
class LogicGraph:
    nodes: tuple[LogicalUnit, ...]
    pairs: tuple[CausalPair, ...]
    adjacency: np.ndarray  # (K, K) int, entries in {-1, 0, 1}
    warnings: tuple[str, ...] = ()

    @property
    def size(self) -> int:
        return len(self.nodes)

    def to_dot(self, name: str = "logic") -> str:
        lines = [f"digraph {name} {{"]
        for unit in self.nodes:
            label = ("¬" if unit.negated else "") + f"U{unit.id}: " + unit.text.replace('"', "'")
            shape = ' shape=box peripheries=2' if unit.negated else ""
            lines.append(f'  U{unit.id} [label="{label}"{shape}];')
        for pair in self.pairs:
            lines.append(
                f'  U{pair.condition_id} -> U{pair.result_id} [label="{pair.connective.surface}"];'
            )
        lines.append("}")
        return "\n".join(lines)


def _adjacent_units(
    units: tuple[LogicalUnit, ...], pos: int, span: int
) -> tuple[Optional[LogicalUnit], Optional[LogicalUnit]]:
    before = None
    after = None
    for u in units:
        if u.token_range[1] <= pos:
            before = u
        if after is None and u.token_range[0] >= pos + span:
            after = u
    return before, after


def _blocked(seg: SegmentationResult, lo: int, hi: int) -> bool:
    """True if a sentence-terminal punctuation token sits in [lo, hi)."""
    return any(
        seg.source_tokens[i].lower in STRONG_PUNCTUATION for i in range(lo, hi)
    )


def _next_unit(units: tuple[LogicalUnit, ...], unit: LogicalUnit) -> Optional[LogicalUnit]:
    for u in units:
        if u.token_range[0] >= unit.token_range[1]:
            return u
    return None


def build_logic_graph(seg: SegmentationResult, lexicon: Optional[LexiconSet] = None) -> LogicGraph:
    """Orient each consumed connective's neighbour units into a causal pair.

    ``lexicon`` is accepted for interface symmetry but unused: every consumed
    connective already carries its direction class.
    """
    units = seg.units
    pairs: list[CausalPair] = []
    warnings: list[str] = []
    seen: set[tuple[int, int]] = set()
    for entry, pos in seg.consumed_connectives:
        span = len(entry.tokens)
        before, after = _adjacent_units(units, pos, span)
        if after is not None and _blocked(seg, pos + span, after.token_range[0]):
            after = None
        if entry.direction == CONDITION_AFTER:
            condition = after
            if before is not None and _blocked(seg, before.token_range[1], pos):
                before = None  # never pair backwards across a sentence end
            result = before
            if result is None and condition is not None:
                nxt = _next_unit(units, condition)
                if nxt is not None and not _blocked(seg, condition.token_range[1], nxt.token_range[0]):
                    result = nxt
        else:
            condition = before  # discourse connectives may look across sentences
            result = after
        if condition is None or result is None or condition.id == result.id:
            warnings.append(
                f"connective {entry.surface!r} at token {pos} has no unit on the "
                f"{'condition' if condition is None else 'result'} side; pair skipped"
            )
            continue
        key = (condition.id, result.id)
        if key in seen:
            continue
        seen.add(key)
        pairs.append(CausalPair(condition.id, result.id, entry))

    k = len(units)
    adjacency = np.zeros((k, k), dtype=np.int64)
    for pair in pairs:
        adjacency[pair.condition_id - 1, pair.result_id - 1] = 1
    for unit in units:
        if unit.negated:
            adjacency[unit.id - 1, unit.id - 1] = -1
    return LogicGraph(nodes=units, pairs=tuple(pairs), adjacency=adjacency, warnings=tuple(warnings))


def concat_logic_graphs(first: LogicGraph, second: LogicGraph) -> LogicGraph:
    """Disjoint union with ``second``'s unit ids shifted past ``first``'s."""
    offset = first.size
    shifted_nodes = tuple(
        LogicalUnit(
            id=u.id + offset,
            token_range=u.token_range,
            text=u.text,
            negated=u.negated,
            introducing_connective=u.introducing_connective,
        )
        for u in second.nodes
    )
    shifted_pairs = tuple(
        CausalPair(p.condition_id + offset, p.result_id + offset, p.connective)
        for p in second.pairs
    )
    k = first.size + second.size
    adjacency = np.zeros((k, k), dtype=np.int64)
    adjacency[:first.size, :first.size] = first.adjacency
    adjacency[first.size:, first.size:] = second.adjacency
    return LogicGraph(
        nodes=first.nodes + shifted_nodes,
        pairs=first.pairs + shifted_pairs,
        adjacency=adjacency,
        warnings=first.warnings + second.warnings,
    )


# --- logical expression -----------------------------------------------------

@dataclass(frozen=True)
class Literal:
    unit_id: int
    negated: bool

    def render(self) -> str:
        return ("¬" if self.negated else "") + f"U{self.unit_id}"


@dataclass(frozen=True)
class Implication:
    condition: Literal
    result: Literal

    def render(self) -> str:
        return f"({self.condition.render()}→{self.result.render()})"


Conjunct = Union[Implication, Literal]

_LITERAL_RE = re.compile(r"^(¬?)U(\d+)$")


@dataclass(frozen=True)
class LogicalExpression:
    conjuncts: tuple[Conjunct, ...]

    def render(self) -> str:
        return " ∧ ".join(c.render() for c in self.conjuncts)

    @classmethod
    def parse(cls, text: str) -> "LogicalExpression":
        conjuncts: list[Conjunct] = []
        for part in text.split(" ∧ "):
            part = part.strip()
            if part.startswith("(") and part.endswith(")"):
                inner = part[1:-1]
                sides = inner.split("→")
                if len(sides) != 2:
                    raise ValueError(f"malformed implication: {part!r}")
                conjuncts.append(Implication(_parse_literal(sides[0]), _parse_literal(sides[1])))
            else:
                conjuncts.append(_parse_literal(part))
        return cls(tuple(conjuncts))


def _parse_literal(text: str) -> Literal:
    m = _LITERAL_RE.match(text.strip())
    if m is None:
        raise ValueError(f"malformed literal: {text!r}")
    return Literal(unit_id=int(m.group(2)), negated=bool(m.group(1)))


def derive_logical_expression(graph: LogicGraph) -> LogicalExpression:
    """One implication per causal pair plus standalone literals, as a conjunction."""
    negated = {u.id for u in graph.nodes if graph.adjacency[u.id - 1, u.id - 1] == -1}

    def literal(unit_id: int) -> Literal:
        return Literal(unit_id, unit_id in negated)

    conjuncts: list[tuple[tuple[int, int], Conjunct]] = []
    in_pair: set[int] = set()
    for pair in graph.pairs:
        in_pair.update((pair.condition_id, pair.result_id))
        key = (min(pair.condition_id, pair.result_id), max(pair.condition_id, pair.result_id))
        conjuncts.append((key, Implication(literal(pair.condition_id), literal(pair.result_id))))
    for unit in graph.nodes:
        if unit.id not in in_pair:
            conjuncts.append(((unit.id, unit.id), literal(unit.id)))
    conjuncts.sort(key=lambda item: item[0])
    return LogicalExpression(tuple(c for _, c in conjuncts))
