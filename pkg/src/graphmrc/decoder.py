"""Feature fusion and option scoring.

Branch node features are broadcast back to token positions, blended with the
token features through a per-token learned gate, the global (cls) feature is
rebuilt from the token-level branch features, question tokens attend over the
fused sequence, and a feed-forward head scores the assembled feature matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, from_op
from .graph_transformer import glorot, layer_norm_affine


@dataclass
class GateParams:
    weight: Tensor  # (2d, 1) or (2d, 2) in two-logit mode
    bias: Tensor  # (max_seq_len, 1) table, sliced to the live length


@dataclass
class DecoderParams:
    gate: GateParams
    fuse_ln_gain: Tensor
    fuse_ln_bias: Tensor
    cls_ln_gain: Tensor
    cls_ln_bias: Tensor
    score_w1: Tensor  # (d, d)
    score_b1: Tensor
    score_w2: Tensor  # (d, 1)
    score_b2: Tensor

    def named_tensors(self) -> Iterator[tuple[str, Tensor]]:
        yield "decoder.gate.weight", self.gate.weight
        yield "decoder.gate.bias", self.gate.bias
        yield "decoder.fuse_ln_gain", self.fuse_ln_gain
        yield "decoder.fuse_ln_bias", self.fuse_ln_bias
        yield "decoder.cls_ln_gain", self.cls_ln_gain
        yield "decoder.cls_ln_bias", self.cls_ln_bias
        yield "decoder.score_w1", self.score_w1
        yield "decoder.score_b1", self.score_b1
        yield "decoder.score_w2", self.score_w2
        yield "decoder.score_b2", self.score_b2


def init_decoder(
    rng: np.random.Generator,
    dim: int,
    max_seq_len: int,
    dtype=np.float32,
    gate_mode: str = "dynamic",
) -> DecoderParams:
    gate_cols = 2 if gate_mode == "two-logit" else 1
    ones = lambda d: Tensor(np.ones((1, d), dtype=dtype), requires_grad=True, dtype=dtype)
    zeros = lambda shape: Tensor(np.zeros(shape, dtype=dtype), requires_grad=True, dtype=dtype)
    return DecoderParams(
        gate=GateParams(
            weight=glorot(rng, 2 * dim, gate_cols, dtype),
            bias=zeros((max_seq_len, gate_cols)),
        ),
        fuse_ln_gain=ones(dim),
        fuse_ln_bias=zeros((1, dim)),
        cls_ln_gain=ones(dim),
        cls_ln_bias=zeros((1, dim)),
        score_w1=glorot(rng, dim, dim, dtype),
        score_b1=zeros((1, dim)),
        score_w2=glorot(rng, dim, 1, dtype),
        score_b2=zeros((1, 1)),
    )


def broadcast_nodes_to_tokens(
    node_feats: Tensor, alignment: Sequence[tuple[int, int]], n_tokens: int
) -> Tensor:
    """Copy node k's row to every token in its interval; uncovered tokens get zero."""
    row_of = np.full(n_tokens, -1, dtype=np.int64)
    for k, (start, stop) in enumerate(alignment):
        if not 0 <= start <= stop <= n_tokens:
            raise ValueError(f"node interval [{start}:{stop}) outside [0, {n_tokens})")
        if (row_of[start:stop] != -1).any():
            raise ValueError(f"node intervals overlap at [{start}:{stop})")
        row_of[start:stop] = k
    covered = row_of >= 0
    data = np.zeros((n_tokens, node_feats.shape[1]), dtype=node_feats.dtype)
    data[covered] = node_feats.data[row_of[covered]]

    def reverse(g):
        grad = np.zeros_like(node_feats.data)
        np.add.at(grad, row_of[covered], g[covered])
        return (grad,)

    return from_op(data, (node_feats,), reverse)


def dynamic_gate(
    syntax_tokens: Tensor,
    logic_tokens: Tensor,
    gate: GateParams,
    *,
    mode: str = "dynamic",
) -> Tensor:
    """Per-token blend weight in (0, 1); (N, 1)."""
    n = syntax_tokens.shape[0]
    if mode == "fixed":
        return Tensor(np.full((n, 1), 0.5, dtype=syntax_tokens.dtype))
    stacked = ad.concat_lastdim([syntax_tokens, logic_tokens])
    logits = ad.matmul(stacked, gate.weight) + ad.slice_rows(gate.bias, 0, n)
    if mode == "dynamic":
        return ad.sigmoid(logits)
    if mode == "two-logit":
        probs = ad.softmax_lastdim(logits)  # (N, 2); first column blends the syntax branch
        return ad.transpose(ad.slice_rows(ad.transpose(probs), 0, 1))
    raise ValueError(f"unknown gate mode {mode!r}")


def fuse(
    token_feats: Tensor,
    syntax_tokens: Tensor,
    logic_tokens: Tensor,
    lam: Tensor,
    params: DecoderParams,
) -> Tensor:
    """Layer-normalized gated blend of the three token-level features; (N, d)."""
    mixed = token_feats + lam * syntax_tokens + (1.0 - lam) * logic_tokens
    return layer_norm_affine(mixed, params.fuse_ln_gain, params.fuse_ln_bias)


def update_global(
    token_cls: Tensor,
    syntax_tokens: Tensor,
    logic_tokens: Tensor,
    params: DecoderParams,
) -> Tensor:
    """Global feature: cls token plus the mean of all non-cls branch features."""
    n = syntax_tokens.shape[0]
    if n < 2:
        raise ValueError("global update needs at least one non-cls token")
    branch_sum = syntax_tokens + logic_tokens
    mean_rest = ad.mean_rows(ad.slice_rows(branch_sum, 1, n))
    return layer_norm_affine(token_cls + mean_rest, params.cls_ln_gain, params.cls_ln_bias)


def question_attention(question_feats: Tensor, fused: Tensor) -> Tensor:
    """Question tokens attend over the fused sequence; (N_q, d)."""
    out, _ = ad.scaled_dot_attention(question_feats, fused, fused)
    return out


def assemble_final(
    cls_feat: Tensor,
    context_feats: Tensor,
    option_feats: Tensor,
    question_feats: Tensor,
) -> Tensor:
    """Row-wise concatenation [cls; context; option; question]."""
    return ad.concat_rows([cls_feat, context_feats, option_feats, question_feats])


def score_option(
    final_feats: Tensor,
    params: DecoderParams,
    *,
    nonlinearity=ad.gelu,
    pooling: str = "cls",
) -> Tensor:
    """Two-layer feed-forward head over the pooled feature; scalar (1, 1)."""
    if pooling == "cls":
        pooled = ad.slice_rows(final_feats, 0, 1)
    elif pooling == "mean":
        pooled = ad.mean_rows(final_feats)
    else:
        raise ValueError(f"unknown pooling {pooling!r}")
    hidden = nonlinearity(ad.affine(pooled, params.score_w1, params.score_b1))
    return ad.affine(hidden, params.score_w2, params.score_b2)


def predict(scores: Iterable[float]) -> int:
    """Index of the highest score; ties break to the lowest index."""
    scores = list(scores)
    if len(scores) < 2:
        raise ValueError("prediction needs at least two option scores")
    best = 0
    for i, s in enumerate(scores):
        if s > scores[best]:
            best = i
    return best
