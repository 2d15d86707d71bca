"""Interpretability exports: graphs, expressions, gate stats, attention maps.

Attention matrices go to CSV raw (each row a probability distribution) and
into the JSON bundle min-max normalized to [0, 1].
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional

import numpy as np

from .data import ExampleRecord, coerce_record
from .decoder import predict
from .graph_transformer import AttentionTrace
from .logic_graph import derive_logical_expression
from .model import TwoBranchModel


def normalize_minmax(matrix: np.ndarray) -> np.ndarray:
    """Map matrix values onto [0, 1]; a constant matrix maps to zeros."""
    lo = float(matrix.min())
    hi = float(matrix.max())
    if hi == lo:
        return np.zeros_like(matrix)
    return (matrix - lo) / (hi - lo)


def _trace_json(trace: Optional[AttentionTrace], normalize: bool) -> list[dict]:
    if trace is None:
        return []
    out = []
    for layer, head, matrix in trace.matrices():
        values = normalize_minmax(matrix) if normalize else matrix
        out.append({"layer": layer, "head": head, "matrix": values.tolist()})
    return out


def _write_trace_csvs(trace: Optional[AttentionTrace], directory: Path, branch: str) -> None:
    if trace is None:
        return
    directory.mkdir(parents=True, exist_ok=True)
    for layer, head, matrix in trace.matrices():
        path = directory / f"{branch}_layer{layer}_head{head}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            for row in matrix:
                writer.writerow([f"{v:.10g}" for v in row])


def export_explanation(
    model: TwoBranchModel,
    example: ExampleRecord | dict,
    out_dir: Optional[str | Path] = None,
    *,
    normalize: bool = True,
) -> dict:
    """Per-option reasoning artifacts for one example, optionally written to disk."""
    record = coerce_record(example)
    options_payload = []
    scores = []
    for j, option in enumerate(record.options):
        score, details = model.option_forward(
            record.context, record.question, option, collect_trace=True
        )
        scores.append(score.item())
        seq = details.seq
        gate = details.gate_values.reshape(-1)
        logic = seq.logic_graph
        payload = {
            "index": j,
            "text": option,
            "units": [
                {"id": u.id, "text": u.text, "negated": u.negated} for u in logic.nodes
            ],
            "sentence_nodes": [
                {"id": u.id, "text": u.text} for u in seq.syntax_graph.nodes
            ],
            "expression": derive_logical_expression(logic).render(),
            "logic_graph": {
                "edges": [
                    {
                        "condition": p.condition_id,
                        "result": p.result_id,
                        "connective": p.connective.surface,
                    }
                    for p in logic.pairs
                ],
                "diag": [int(v) for v in logic.adjacency.diagonal()],
                "dot": logic.to_dot(),
            },
            "syntax_graph": {
                "adjacency": seq.syntax_graph.adjacency.tolist(),
                "dot": seq.syntax_graph.to_dot(),
            },
            "gate": {
                "min": float(gate.min()),
                "mean": float(gate.mean()),
                "max": float(gate.max()),
            },
            "attention": {
                "logic": _trace_json(details.logic_trace, normalize),
                "syntax": _trace_json(details.syntax_trace, normalize),
            },
            "score": scores[-1],
        }
        options_payload.append(payload)
        if out_dir is not None:
            option_dir = Path(out_dir) / f"option{j}"
            option_dir.mkdir(parents=True, exist_ok=True)
            (option_dir / "logic.dot").write_text(logic.to_dot() + "\n", encoding="utf-8")
            (option_dir / "syntax.dot").write_text(
                seq.syntax_graph.to_dot() + "\n", encoding="utf-8"
            )
            _write_trace_csvs(details.logic_trace, option_dir, "logic")
            _write_trace_csvs(details.syntax_trace, option_dir, "syntax")

    bundle = {
        "id": record.id,
        "question": record.question,
        "label": record.label,
        "predicted": predict(scores),
        "scores": scores,
        "attention_normalized": normalize,
        "options": options_payload,
    }
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "explanation.json").write_text(
            json.dumps(bundle, indent=2, sort_keys=True), encoding="utf-8"
        )
    return bundle
