"""One-call text parsing: segmentations, both graphs and the expression."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .lexicon import LexiconSet, load_lexicon
from .logic_graph import LogicGraph, LogicalExpression, build_logic_graph, derive_logical_expression
from .segmenter import SegmentationResult, split_logical_units, split_sentence_nodes
from .syntax_graph import SyntaxGraph, build_syntax_graph


@dataclass(frozen=True)
class ParsedText:
    text: str
    segmentation: SegmentationResult
    logic_graph: LogicGraph
    syntax_graph: SyntaxGraph
    expression: LogicalExpression

    def to_json(self) -> dict:
        seg = self.segmentation
        return {
            "units": [
                {"id": u.id, "text": u.text, "negated": u.negated}
                for u in seg.units
            ],
            "connectives": [
                {"surface": entry.surface, "direction": entry.direction, "token_position": pos}
                for entry, pos in seg.consumed_connectives
            ],
            "logic_graph": {
                "nodes": [u.id for u in self.logic_graph.nodes],
                "edges": [
                    {"condition": p.condition_id, "result": p.result_id, "connective": p.connective.surface}
                    for p in self.logic_graph.pairs
                ],
                "diag": [int(v) for v in self.logic_graph.adjacency.diagonal()],
                "dot": self.logic_graph.to_dot(),
            },
            "syntax_graph": {
                "nodes": [
                    {"id": u.id, "text": u.text} for u in self.syntax_graph.nodes
                ],
                "delta": self.syntax_graph.delta,
                "adjacency": self.syntax_graph.adjacency.tolist(),
                "edges": [list(e) for e in self.syntax_graph.edges()],
                "dot": self.syntax_graph.to_dot(),
            },
            "expression": self.expression.render(),
            "warnings": list(self.logic_graph.warnings),
        }


def parse_text(
    text: str,
    lexicon: Optional[LexiconSet] = None,
    delta: float = 0.5,
) -> ParsedText:
    lexicon = lexicon if lexicon is not None else load_lexicon()
    seg = split_logical_units(text, lexicon)
    logic = build_logic_graph(seg)
    nodes = split_sentence_nodes(text, lexicon)
    syntax = build_syntax_graph(nodes, lexicon.stop_words, delta)
    return ParsedText(
        text=text,
        segmentation=seg,
        logic_graph=logic,
        syntax_graph=syntax,
        expression=derive_logical_expression(logic),
    )
