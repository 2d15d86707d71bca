"""Multi-head self-attention stack with an additive graph-adjacency bias.

Both branches (and the token encoder, with a zero bias) share this code. The
bias matrix is added to the scaled dot-product logits in every layer and
head; attention stays fully connected. Blocks are pre-norm: LN, biased
multi-head attention, residual, LN, feed-forward, residual. The branch output
is the sum of the last two layers' hidden states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


@dataclass
class HeadParams:
    w_q: Tensor
    w_k: Tensor
    w_v: Tensor


@dataclass
class LayerParams:
    ln1_gain: Tensor
    ln1_bias: Tensor
    heads: tuple[HeadParams, ...]
    w_out: Tensor  # (H*d, d)
    ln2_gain: Tensor
    ln2_bias: Tensor
    ffn_w1: Tensor  # (d, 4d)
    ffn_b1: Tensor
    ffn_w2: Tensor  # (4d, d)
    ffn_b2: Tensor


@dataclass
class GraphTransformerParams:
    dim: int
    layers: tuple[LayerParams, ...]

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def num_heads(self) -> int:
        return len(self.layers[0].heads)

    def named_tensors(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        for i, layer in enumerate(self.layers):
            base = f"{prefix}.layer{i}"
            yield f"{base}.ln1_gain", layer.ln1_gain
            yield f"{base}.ln1_bias", layer.ln1_bias
            for h, head in enumerate(layer.heads):
                yield f"{base}.head{h}.w_q", head.w_q
                yield f"{base}.head{h}.w_k", head.w_k
                yield f"{base}.head{h}.w_v", head.w_v
            yield f"{base}.w_out", layer.w_out
            yield f"{base}.ln2_gain", layer.ln2_gain
            yield f"{base}.ln2_bias", layer.ln2_bias
            yield f"{base}.ffn_w1", layer.ffn_w1
            yield f"{base}.ffn_b1", layer.ffn_b1
            yield f"{base}.ffn_w2", layer.ffn_w2
            yield f"{base}.ffn_b2", layer.ffn_b2


@dataclass
class AttentionTrace:
    """Post-softmax attention matrices, indexed [layer][head], each (K, K)."""

    layers: list[list[np.ndarray]] = field(default_factory=list)

    def matrices(self) -> Iterator[tuple[int, int, np.ndarray]]:
        for li, heads in enumerate(self.layers):
            for hi, matrix in enumerate(heads):
                yield li + 1, hi, matrix


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, dtype) -> Tensor:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    data = rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)
    return Tensor(data, requires_grad=True, dtype=dtype)


def _ones(d: int, dtype) -> Tensor:
    return Tensor(np.ones((1, d), dtype=dtype), requires_grad=True, dtype=dtype)


def _zeros(shape: tuple[int, ...], dtype) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True, dtype=dtype)


def init_graph_transformer(
    rng: np.random.Generator, dim: int, heads: int, layers: int, dtype=np.float32
) -> GraphTransformerParams:
    built = []
    for _ in range(layers):
        built.append(
            LayerParams(
                ln1_gain=_ones(dim, dtype),
                ln1_bias=_zeros((1, dim), dtype),
                heads=tuple(
                    HeadParams(
                        w_q=glorot(rng, dim, dim, dtype),
                        w_k=glorot(rng, dim, dim, dtype),
                        w_v=glorot(rng, dim, dim, dtype),
                    )
                    for _ in range(heads)
                ),
                w_out=glorot(rng, heads * dim, dim, dtype),
                ln2_gain=_ones(dim, dtype),
                ln2_bias=_zeros((1, dim), dtype),
                ffn_w1=glorot(rng, dim, 4 * dim, dtype),
                ffn_b1=_zeros((1, 4 * dim), dtype),
                ffn_w2=glorot(rng, 4 * dim, dim, dtype),
                ffn_b2=_zeros((1, dim), dtype),
            )
        )
    return GraphTransformerParams(dim=dim, layers=tuple(built))


def layer_norm_affine(x: Tensor, gain: Tensor, bias: Tensor) -> Tensor:
    return ad.layer_norm_affine_lastdim(x, gain, bias)


def biased_attention_logits(q: Tensor, k: Tensor, bias: Optional[np.ndarray]) -> Tensor:
    """Scaled dot-product logits plus the adjacency bias (single fused node)."""
    n_q, d_k = q.shape
    n_k = k.shape[0]
    if d_k != k.shape[1]:
        raise ValueError(f"query/key width mismatch: {q.shape} vs {k.shape}")
    inv = 1.0 / math.sqrt(d_k)
    data = (q.data @ k.data.T) * inv
    if bias is not None:
        bias = np.asarray(bias)
        if bias.shape != (n_q, n_k):
            raise ValueError(
                f"bias shape {bias.shape} does not match attention shape {(n_q, n_k)}"
            )
        data = data + bias.astype(q.dtype.type)

    def reverse(g):
        scaled = g * inv
        return scaled @ k.data, scaled.T @ q.data

    return ad.from_op(data, (q, k), reverse)


def _nonlinearity(name: str):
    if name == "gelu":
        return ad.gelu
    if name == "relu":
        return ad.relu
    raise ValueError(f"unknown nonlinearity {name!r}")


def multi_head_layer(
    x: Tensor,
    bias: Optional[np.ndarray],
    layer: LayerParams,
    *,
    nonlinearity: str = "gelu",
    trace: Optional[list[list[np.ndarray]]] = None,
) -> Tensor:
    normed = layer_norm_affine(x, layer.ln1_gain, layer.ln1_bias)
    head_outputs = []
    head_attn: list[np.ndarray] = []
    for head in layer.heads:
        q = ad.matmul(normed, head.w_q)
        k = ad.matmul(normed, head.w_k)
        v = ad.matmul(normed, head.w_v)
        out, weights = ad.scaled_dot_attention(q, k, v, bias)
        head_attn.append(weights)
        head_outputs.append(out)
    if trace is not None:
        trace.append(head_attn)
    projected = ad.matmul(ad.concat_lastdim(head_outputs), layer.w_out)
    x = x + projected
    act = _nonlinearity(nonlinearity)
    normed2 = layer_norm_affine(x, layer.ln2_gain, layer.ln2_bias)
    hidden = act(ad.affine(normed2, layer.ffn_w1, layer.ffn_b1))
    return x + ad.affine(hidden, layer.ffn_w2, layer.ffn_b2)


def run_branch(
    x: Tensor,
    bias: Optional[np.ndarray],
    params: GraphTransformerParams,
    *,
    nonlinearity: str = "gelu",
) -> tuple[Tensor, AttentionTrace]:
    """Apply all layers; output is the sum of the last two hidden states."""
    if params.num_layers < 2:
        raise ValueError("branch output sums the last two layers, so at least 2 layers are required")
    trace_layers: list[list[np.ndarray]] = []
    hidden = x
    previous = None
    for layer in params.layers:
        previous = hidden
        hidden = multi_head_layer(hidden, bias, layer, nonlinearity=nonlinearity, trace=trace_layers)
    return hidden + previous, AttentionTrace(trace_layers)


def run_stack(
    x: Tensor,
    params: GraphTransformerParams,
    *,
    nonlinearity: str = "gelu",
) -> Tensor:
    """Plain unbiased stack (token encoder): output is the last hidden state."""
    hidden = x
    for layer in params.layers:
        hidden = multi_head_layer(hidden, None, layer, nonlinearity=nonlinearity)
    return hidden
