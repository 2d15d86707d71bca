"""Input construction and the small trainable token encoder.

The encoded sequence is [CLS] context [SEP] question [SEP] option [SEP] with
the context truncated first when the budget is exceeded. Both branch graphs
are built over the context plus the option (the question takes no part in
them), and each graph node is aligned to its token interval in the sequence.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Optional

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graph_transformer import GraphTransformerParams, init_graph_transformer, run_stack
from .lexicon import LexiconSet
from .logic_graph import LogicGraph, build_logic_graph, concat_logic_graphs
from .segmenter import LogicalUnit, split_logical_units, split_sentence_nodes, tokenize
from .syntax_graph import SyntaxGraph, build_syntax_graph

PAD, UNK, CLS, SEP = 0, 1, 2, 3
_NUM_SPECIALS = 4
SPECIAL_NAMES = ("[PAD]", "[UNK]", "[CLS]", "[SEP]")


class InputError(ValueError):
    """Raised when an example cannot be turned into a model input."""


@dataclass(frozen=True)
class Vocabulary:
    """Lowercased token inventory; ids 0..3 are the specials."""

    tokens: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")

    @cached_property
    def _ids(self) -> dict[str, int]:
        return {tok: i + _NUM_SPECIALS for i, tok in enumerate(self.tokens)}

    @property
    def size(self) -> int:
        return len(self.tokens) + _NUM_SPECIALS

    def encode(self, token_lower: str) -> int:
        return self._ids.get(token_lower, UNK)

    @classmethod
    def from_corpus(cls, texts: Iterable[str]) -> "Vocabulary":
        seen = {tok.lower for text in texts for tok in tokenize(text)}
        return cls(tuple(sorted(seen)))

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(tuple(line for line in lines if line))


@dataclass(frozen=True)
class EncodedSequence:
    ids: np.ndarray  # (N,) int64
    cls_span: tuple[int, int]
    context_span: tuple[int, int]
    question_span: tuple[int, int]
    option_span: tuple[int, int]
    logic_graph: LogicGraph
    syntax_graph: SyntaxGraph
    logic_alignment: tuple[tuple[int, int], ...]  # node k-1 -> token interval
    syntax_alignment: tuple[tuple[int, int], ...]

    @property
    def length(self) -> int:
        return int(self.ids.shape[0])


def _truncate_text(text: str, budget: int) -> tuple[str, int]:
    """Trim trailing tokens so at most ``budget`` remain; returns (text, count)."""
    tokens = tokenize(text)
    if len(tokens) <= budget:
        return text, len(tokens)
    if budget == 0:
        return "", 0
    end = tokens[budget - 1].char_span[1]
    return text[:end], budget


def _align(units: Iterable[LogicalUnit], offset: int) -> tuple[tuple[int, int], ...]:
    return tuple((u.token_range[0] + offset, u.token_range[1] + offset) for u in units)


def build_input(
    context: str,
    question: str,
    option: str,
    vocab: Vocabulary,
    lexicon: LexiconSet,
    *,
    max_seq_len: int = 256,
    delta: float = 0.5,
) -> EncodedSequence:
    """Token ids, segment spans, branch graphs and node-token alignments."""
    option_tokens = tokenize(option)
    if not option_tokens:
        if not tokenize(context):
            raise InputError("context and option are both empty")
        raise InputError("option text is empty")
    question_tokens = tokenize(question)
    budget = max_seq_len - _NUM_SPECIALS - len(question_tokens) - len(option_tokens)
    if budget < 0:
        raise InputError(
            f"question and option need {-budget} more tokens than max_seq_len={max_seq_len} allows"
        )
    context_text, n_ctx = _truncate_text(context, budget)
    context_tokens = tokenize(context_text)

    ids = [CLS]
    ids += [vocab.encode(t.lower) for t in context_tokens]
    ids.append(SEP)
    ids += [vocab.encode(t.lower) for t in question_tokens]
    ids.append(SEP)
    ids += [vocab.encode(t.lower) for t in option_tokens]
    ids.append(SEP)

    ctx_start = 1
    q_start = ctx_start + n_ctx + 1
    opt_start = q_start + len(question_tokens) + 1
    spans = {
        "cls": (0, 1),
        "context": (ctx_start, ctx_start + n_ctx),
        "question": (q_start, q_start + len(question_tokens)),
        "option": (opt_start, opt_start + len(option_tokens)),
    }

    # graphs cover context plus option; the join is a forced boundary because
    # the two parts are [SEP]-separated in token space
    ctx_seg = split_logical_units(context_text, lexicon)
    opt_seg = split_logical_units(option, lexicon)
    logic = concat_logic_graphs(build_logic_graph(ctx_seg), build_logic_graph(opt_seg))
    logic_alignment = _align(ctx_seg.units, ctx_start) + _align(opt_seg.units, opt_start)

    ctx_nodes = split_sentence_nodes(context_text, lexicon)
    opt_nodes = split_sentence_nodes(option, lexicon)
    merged_nodes = list(ctx_nodes) + [
        LogicalUnit(
            id=len(ctx_nodes) + u.id,
            token_range=u.token_range,
            text=u.text,
            negated=u.negated,
            introducing_connective=u.introducing_connective,
        )
        for u in opt_nodes
    ]
    syntax = build_syntax_graph(merged_nodes, lexicon.stop_words, delta)
    syntax_alignment = _align(ctx_nodes, ctx_start) + _align(opt_nodes, opt_start)

    return EncodedSequence(
        ids=np.asarray(ids, dtype=np.int64),
        cls_span=spans["cls"],
        context_span=spans["context"],
        question_span=spans["question"],
        option_span=spans["option"],
        logic_graph=logic,
        syntax_graph=syntax,
        logic_alignment=logic_alignment,
        syntax_alignment=syntax_alignment,
    )


@lru_cache(maxsize=512)
def _sinusoid_cached(n: int, dim: int, dtype_name: str) -> np.ndarray:
    positions = np.arange(n, dtype=np.float64)[:, None]
    dims = np.arange(dim, dtype=np.float64)[None, :]
    angles = positions / np.power(10000.0, 2.0 * (dims // 2) / dim)
    table = np.where(dims % 2 == 0, np.sin(angles), np.cos(angles))
    table = table.astype(np.dtype(dtype_name))
    table.setflags(write=False)
    return table


def sinusoid_table(n: int, dim: int, dtype=np.float32) -> np.ndarray:
    """Canonical sin/cos positional table; row 0 is [0, 1, 0, 1, ...]."""
    return _sinusoid_cached(n, dim, np.dtype(dtype).name)


@dataclass
class EncoderParams:
    embeddings: Tensor  # (vocab, d)
    stack: GraphTransformerParams

    def named_tensors(self) -> Iterator[tuple[str, Tensor]]:
        yield "encoder.embeddings", self.embeddings
        yield from self.stack.named_tensors("encoder")


def init_encoder(
    rng: np.random.Generator,
    vocab_size: int,
    dim: int,
    heads: int,
    layers: int,
    dtype=np.float32,
) -> EncoderParams:
    embeddings = Tensor(
        rng.normal(0.0, 0.02, size=(vocab_size, dim)).astype(dtype),
        requires_grad=True,
        dtype=dtype,
    )
    return EncoderParams(embeddings=embeddings, stack=init_graph_transformer(rng, dim, heads, layers, dtype))


def encode_tokens(
    seq: EncodedSequence, params: EncoderParams, *, nonlinearity: str = "gelu"
) -> Tensor:
    """Token embeddings plus positions through the encoder stack; (N, d)."""
    dtype = params.embeddings.dtype
    x = ad.embedding_lookup(params.embeddings, seq.ids)
    x = x + Tensor(sinusoid_table(seq.length, params.embeddings.shape[1], dtype))
    return run_stack(x, params.stack, nonlinearity=nonlinearity)


def init_node_features(token_feats: Tensor, alignment: Iterable[tuple[int, int]]) -> Tensor:
    """Per-node mean of the token embeddings in the node's interval; (K, d)."""
    intervals = list(alignment)
    if not intervals:
        raise ValueError("alignment has no nodes")
    return ad.interval_means(token_feats, intervals)


def add_node_positions(node_feats: Tensor, table: Optional[Tensor] = None) -> Tensor:
    """Add deterministic sinusoidal node positions (or a learned table slice)."""
    k, d = node_feats.shape
    if table is None:
        return node_feats + Tensor(sinusoid_table(k, d, node_feats.dtype))
    return node_feats + ad.slice_rows(table, 0, k)
