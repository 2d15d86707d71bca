"""Example records and dataset loaders.

The native JSON schema mirrors the ReClor field names (context, question,
answers, label, id_string) so files in that shape drop in unchanged. A
converter for the original flat-text release format of the second benchmark
is included.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

logger = logging.getLogger(__name__)

FORMATS = ("native-json", "reclor-json", "logiqa-json")


class DatasetError(ValueError):
    """Schema violation; the message names the offending record and field."""


@dataclass(frozen=True)
class ExampleRecord:
    id: str
    context: str
    question: str
    options: tuple[str, ...]
    label: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.options:
            raise DatasetError(f"record {self.id!r}: options must be non-empty")
        if any(not opt for opt in self.options):
            raise DatasetError(f"record {self.id!r}: empty option text")
        if self.label is not None and not 0 <= self.label < len(self.options):
            raise DatasetError(
                f"record {self.id!r}: label {self.label} outside [0, {len(self.options)})"
            )


def coerce_record(obj, index: int = 0) -> ExampleRecord:
    """Accept ExampleRecord or a mapping with native field names."""
    if isinstance(obj, ExampleRecord):
        return obj
    if not isinstance(obj, dict):
        raise DatasetError(f"record #{index}: expected a mapping, got {type(obj).__name__}")
    rid = str(obj.get("id_string") or obj.get("id") or f"record-{index}")
    options = obj.get("answers") or obj.get("options")
    if not isinstance(options, (list, tuple)):
        raise DatasetError(f"record {rid!r}: missing answers/options list")
    label = obj.get("label", obj.get("answer"))
    try:
        return ExampleRecord(
            id=rid,
            context=str(obj.get("context", obj.get("text", ""))),
            question=str(obj.get("question", obj.get("query", ""))),
            options=tuple(str(o) for o in options),
            label=None if label is None else int(label),
        )
    except DatasetError:
        raise
    except (TypeError, ValueError) as exc:
        raise DatasetError(f"record {rid!r}: {exc}") from exc


def validate_examples(
    records: Iterable, *, require_labels: bool = False
) -> list[ExampleRecord]:
    """Input-validation helper shared by the estimator, trainer and CLI."""
    out = []
    for i, obj in enumerate(records):
        rec = coerce_record(obj, i)
        if require_labels and rec.label is None:
            raise DatasetError(f"record {rec.id!r}: label required but missing")
        out.append(rec)
    if not out:
        raise DatasetError("no records provided")
    return out


def load_dataset(path: str | Path, format: str = "native-json") -> list[ExampleRecord]:
    if format not in FORMATS:
        raise DatasetError(f"unknown format {format!r}; expected one of {FORMATS}")
    p = Path(path)
    if not p.exists():
        raise DatasetError(f"dataset file not found: {p}")
    try:
        payload = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{p}: not valid JSON ({exc})") from exc
    if not isinstance(payload, list):
        raise DatasetError(f"{p}: expected a top-level JSON list of records")
    if format == "logiqa-json":
        payload = [_from_logiqa(obj, i) for i, obj in enumerate(payload)]
    records = validate_examples(payload)
    logger.info("loaded %d records from %s (%s)", len(records), p, format)
    return records


def _from_logiqa(obj, index: int) -> dict:
    if not isinstance(obj, dict):
        raise DatasetError(f"record #{index}: expected a mapping")
    return {
        "id": obj.get("id", f"logiqa-{index}"),
        "context": obj.get("text", obj.get("context", "")),
        "question": obj.get("question", obj.get("query", "")),
        "options": obj.get("options", obj.get("answers")),
        "label": obj.get("answer", obj.get("label")),
    }


_ANSWER_LETTERS = {"a": 0, "b": 1, "c": 2, "d": 3}


def convert_logiqa_text(path: str | Path) -> list[ExampleRecord]:
    """Convert the flat-text release format: blocks of
    answer letter / context / question / four 'A.'..'D.' option lines."""
    lines = [ln.rstrip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
    blocks: list[list[str]] = []
    current: list[str] = []
    for ln in lines:
        if ln.strip():
            current.append(ln.strip())
        elif current:
            blocks.append(current)
            current = []
    if current:
        blocks.append(current)
    records = []
    for i, block in enumerate(blocks):
        if len(block) < 7:
            raise DatasetError(f"block #{i}: expected 7 lines (answer, context, question, 4 options)")
        letter = block[0].strip().lower()
        if letter not in _ANSWER_LETTERS:
            raise DatasetError(f"block #{i}: bad answer letter {block[0]!r}")
        options = tuple(ln[2:].strip() if ln[1:2] == "." else ln for ln in block[3:7])
        records.append(
            ExampleRecord(
                id=f"logiqa-{i}",
                context=block[1],
                question=block[2],
                options=options,
                label=_ANSWER_LETTERS[letter],
            )
        )
    return records


def save_dataset(records: Sequence[ExampleRecord], path: str | Path) -> None:
    payload = [
        {
            "id_string": r.id,
            "context": r.context,
            "question": r.question,
            "answers": list(r.options),
            "label": r.label,
        }
        for r in records
    ]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
