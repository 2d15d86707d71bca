"""Deterministic synthetic multiple-choice tasks.

Two generators: causal chains (the correct option is the statement entailed by
following the implication chain from the asserted fact, with polarity) and
co-occurrence matching (the correct option is the one whose token set overlaps
a single context sentence above threshold). Every record is solvable by the
rule-based oracle in this module, which re-parses the text with the real
parsers rather than trusting generator bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import ExampleRecord
from .lexicon import LexiconSet, load_lexicon
from .logic_graph import build_logic_graph
from .segmenter import LogicalUnit, split_logical_units, split_sentence_nodes, tokenize
from .syntax_graph import build_syntax_graph

MODES = ("causal-chain", "cooccurrence", "mixed")

ENTITIES = (
    "rena", "bill", "paula", "damien", "carol", "dave", "erin", "felix",
    "gina", "hugo", "iris", "jonas", "kira", "leo", "mona", "nils",
)
VERBS = (
    "sing", "dance", "smile", "laugh", "travel", "paint", "swim", "cook",
    "read", "write", "sail", "sleep", "jog", "whistle", "hike", "bake",
)
PLACES = ("morning", "evening", "park", "garden", "harbor", "valley", "market", "plaza")

CAUSAL_QUESTION = "what must be true ?"
COOC_QUESTION = "which statement matches the context ?"


@dataclass(frozen=True)
class Statement:
    entity: str
    verb: str
    positive: bool

    def render(self) -> str:
        if self.positive:
            return f"{self.entity} will {self.verb}"
        return f"{self.entity} will not {self.verb}"

    def flipped(self) -> "Statement":
        return Statement(self.entity, self.verb, not self.positive)


def parse_statement(text: str) -> Optional[Statement]:
    toks = [t.lower for t in tokenize(text)]
    if len(toks) == 3 and toks[1] == "will":
        return Statement(toks[0], toks[2], True)
    if len(toks) == 4 and toks[1] == "will" and toks[2] == "not":
        return Statement(toks[0], toks[3], False)
    return None


_LINK_PHRASINGS = (
    "if {cond} then {result} .",
    "{result} if {cond} .",
    "{result} because {cond} .",
    "{cond} , therefore {result} .",
    "if {cond} , {result} .",
    "because {cond} , {result} .",
    "{cond} , so {result} .",
)


def _causal_record(rng: np.random.Generator, index: int, label: int) -> ExampleRecord:
    entities = rng.choice(len(ENTITIES), size=6, replace=False)
    verbs = rng.choice(len(VERBS), size=6, replace=False)

    def stmt(slot: int, positive: bool) -> Statement:
        return Statement(ENTITIES[entities[slot]], VERBS[verbs[slot]], positive)

    # one triggered link; half the contexts also carry an untriggered decoy link
    chain = [stmt(0, True), stmt(1, bool(rng.integers(2)))]
    with_decoy = rng.random() < 0.5
    decoy_cond = stmt(3, True)
    decoy_result = stmt(4, bool(rng.integers(2)))

    sentences = [f"{chain[0].render()} ."]
    for cond, result in zip(chain, chain[1:]):
        phrasing = _LINK_PHRASINGS[rng.integers(len(_LINK_PHRASINGS))]
        sentences.append(phrasing.format(cond=cond.render(), result=result.render()))
    if with_decoy:
        phrasing = _LINK_PHRASINGS[rng.integers(len(_LINK_PHRASINGS))]
        sentences.append(phrasing.format(cond=decoy_cond.render(), result=decoy_result.render()))
    order = rng.permutation(len(sentences))
    context = " ".join(sentences[i] for i in order)

    correct = chain[-1]
    recombination = Statement(
        chain[1].entity, VERBS[verbs[5]], bool(rng.integers(2))
    )  # entity from the chain with a verb it never takes
    # the second distractor checks polarity on the asserted fact or, when a
    # decoy link exists, usually its untriggered conclusion
    if with_decoy and rng.random() < 0.7:
        third = decoy_result
    else:
        third = chain[0].flipped()
    distractors = [correct.flipped(), third, recombination]
    rng.shuffle(distractors)
    options = [d.render() for d in distractors]
    options.insert(label, correct.render())
    return ExampleRecord(
        id=f"causal-{index}",
        context=context,
        question=CAUSAL_QUESTION,
        options=tuple(options),
        label=label,
    )


def _cooccurrence_record(rng: np.random.Generator, index: int, label: int) -> ExampleRecord:
    entities = rng.choice(len(ENTITIES), size=4, replace=False)
    verbs = rng.choice(len(VERBS), size=5, replace=False)
    places = rng.choice(len(PLACES), size=3, replace=False)
    sentences = [
        f"{ENTITIES[entities[i]]} will {VERBS[verbs[i]]} in the {PLACES[places[i]]} ."
        for i in range(3)
    ]
    context = " ".join(sentences)

    target = int(rng.integers(3))
    correct = f"{ENTITIES[entities[target]]} will {VERBS[verbs[target]]}"
    cross_a = f"{ENTITIES[entities[0]]} will {VERBS[verbs[1]]}"
    cross_b = f"{ENTITIES[entities[1]]} will {VERBS[verbs[2]]}"
    novel = f"{ENTITIES[entities[3]]} will {VERBS[verbs[4]]}"
    distractors = [cross_a, cross_b, novel]
    rng.shuffle(distractors)
    options = list(distractors)
    options.insert(label, correct)
    return ExampleRecord(
        id=f"cooc-{index}",
        context=context,
        question=COOC_QUESTION,
        options=tuple(options),
        label=label,
    )


def generate_synthetic(seed: int, size: int, mode: str = "mixed") -> list[ExampleRecord]:
    """Deterministic per seed; labels are balanced over the four positions."""
    if size < 1:
        raise ValueError("size must be >= 1")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    rng = np.random.default_rng(seed)
    labels = np.tile(np.arange(4), (size + 3) // 4)[:size]
    rng.shuffle(labels)
    records = []
    for i in range(size):
        causal = mode == "causal-chain" or (mode == "mixed" and i % 2 == 0)
        make = _causal_record if causal else _cooccurrence_record
        records.append(make(rng, i, int(labels[i])))
    return records


# --- rule-based oracle ----------------------------------------------------------

def _entailed_statements(context: str, lexicon: LexiconSet) -> set[Statement]:
    """Facts from standalone units, closed under the parsed causal pairs."""
    seg = split_logical_units(context, lexicon)
    graph = build_logic_graph(seg)
    statements = {u.id: parse_statement(u.text) for u in graph.nodes}
    in_pair = {uid for p in graph.pairs for uid in (p.condition_id, p.result_id)}
    facts = {
        s for uid, s in statements.items() if s is not None and uid not in in_pair
    }
    changed = True
    while changed:
        changed = False
        for pair in graph.pairs:
            cond = statements.get(pair.condition_id)
            result = statements.get(pair.result_id)
            if cond in facts and result is not None and result not in facts:
                facts.add(result)
                changed = True
    return facts


def _merged_sentence_nodes(context: str, option: str, lexicon: LexiconSet) -> list[LogicalUnit]:
    ctx_nodes = split_sentence_nodes(context, lexicon)
    opt_nodes = split_sentence_nodes(option, lexicon)
    merged = list(ctx_nodes)
    for u in opt_nodes:
        merged.append(
            LogicalUnit(
                id=len(ctx_nodes) + u.id,
                token_range=u.token_range,
                text=u.text,
                negated=u.negated,
                introducing_connective=u.introducing_connective,
            )
        )
    return merged


def oracle_answer(record: ExampleRecord, lexicon: Optional[LexiconSet] = None, delta: float = 0.5) -> int:
    """Solve a generated record from its text alone; raises if not uniquely solvable."""
    lexicon = lexicon if lexicon is not None else load_lexicon()
    if record.question == CAUSAL_QUESTION:
        facts = _entailed_statements(record.context, lexicon)
        hits = [
            i for i, opt in enumerate(record.options) if parse_statement(opt) in facts
        ]
    else:
        hits = []
        n_ctx = len(split_sentence_nodes(record.context, lexicon))
        for i, opt in enumerate(record.options):
            nodes = _merged_sentence_nodes(record.context, opt, lexicon)
            graph = build_syntax_graph(nodes, lexicon.stop_words, delta)
            option_rows = graph.adjacency[n_ctx:]
            if option_rows.sum() > 0:
                hits.append(i)
    if len(hits) != 1:
        raise ValueError(f"record {record.id!r} is not uniquely solvable (hits={hits})")
    return hits[0]
