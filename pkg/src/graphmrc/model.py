"""Full two-branch model: encoder, biased branches, gated decoder, scoring.

One forward pass scores a single (context, question, option) triple; an
example's options are scored independently and the highest score wins. The
model owns its parameters, vocabulary and lexicon, and can round-trip through
a JSON checkpoint.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from . import decoder as dec
from .encoder import (
    EncodedSequence,
    EncoderParams,
    Vocabulary,
    build_input,
    encode_tokens,
    init_encoder,
    init_node_features,
    add_node_positions,
)
from .graph_transformer import (
    AttentionTrace,
    GraphTransformerParams,
    init_graph_transformer,
    run_branch,
)
from .lexicon import ConnectiveEntry, LexiconSet, load_lexicon

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    """Architecture knobs; the flat training config embeds these."""

    hidden_dim: int = 64
    heads: int = 2
    layers: int = 2
    encoder_layers: int = 2
    max_seq_len: int = 64
    delta: float = 0.5
    precision: str = "float32"
    nonlinearity: str = "gelu"
    gate_mode: str = "dynamic"
    score_pooling: str = "cls"
    node_positions: str = "sinusoidal"
    use_causal_bias: bool = True
    use_cooccurrence_bias: bool = True

    def __post_init__(self) -> None:
        for name in ("hidden_dim", "heads", "layers", "encoder_layers", "max_seq_len"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.layers < 2:
            raise ValueError("branch output sums the last two layers; layers must be >= 2")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        if self.precision not in ("float32", "float64"):
            raise ValueError("precision must be float32 or float64")
        if self.gate_mode not in ("dynamic", "fixed", "two-logit"):
            raise ValueError(f"unknown gate_mode {self.gate_mode!r}")
        if self.node_positions not in ("sinusoidal", "learned"):
            raise ValueError(f"unknown node_positions {self.node_positions!r}")

    @property
    def dtype(self):
        return np.float64 if self.precision == "float64" else np.float32


@dataclass
class ForwardDetails:
    """Everything besides the score that one option forward produces."""

    seq: EncodedSequence
    gate_values: np.ndarray  # (N, 1)
    logic_trace: Optional[AttentionTrace]
    syntax_trace: Optional[AttentionTrace]


class TwoBranchModel:
    def __init__(
        self,
        config: ModelConfig,
        vocab: Vocabulary,
        lexicon: Optional[LexiconSet] = None,
        seed: int = 0,
    ):
        self.config = config
        self.vocab = vocab
        self.lexicon = lexicon if lexicon is not None else load_lexicon()
        rng = np.random.default_rng(seed)
        dtype = config.dtype
        self.encoder: EncoderParams = init_encoder(
            rng, vocab.size, config.hidden_dim, config.heads, config.encoder_layers, dtype
        )
        self.logic_branch: GraphTransformerParams = init_graph_transformer(
            rng, config.hidden_dim, config.heads, config.layers, dtype
        )
        self.syntax_branch: GraphTransformerParams = init_graph_transformer(
            rng, config.hidden_dim, config.heads, config.layers, dtype
        )
        self.decoder = dec.init_decoder(
            rng, config.hidden_dim, config.max_seq_len, dtype, config.gate_mode
        )
        self.node_position_table: Optional[Tensor] = None
        if config.node_positions == "learned":
            self.node_position_table = Tensor(
                rng.normal(0.0, 0.02, size=(config.max_seq_len, config.hidden_dim)).astype(dtype),
                requires_grad=True,
                dtype=dtype,
            )
        # parsing is parameter-free, so encoded inputs are reusable across steps
        self._input_cache: dict[tuple[str, str, str], EncodedSequence] = {}

    # --- parameters ---------------------------------------------------------

    def named_parameters(self) -> Iterator[tuple[str, Tensor]]:
        yield from self.encoder.named_tensors()
        yield from self.logic_branch.named_tensors("logic_branch")
        yield from self.syntax_branch.named_tensors("syntax_branch")
        yield from self.decoder.named_tensors()
        if self.node_position_table is not None:
            yield "node_positions", self.node_position_table

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    # --- forward ------------------------------------------------------------

    def encode_option(self, context: str, question: str, option: str) -> EncodedSequence:
        key = (context, question, option)
        cached = self._input_cache.get(key)
        if cached is None:
            cached = build_input(
                context,
                question,
                option,
                self.vocab,
                self.lexicon,
                max_seq_len=self.config.max_seq_len,
                delta=self.config.delta,
            )
            self._input_cache[key] = cached
        return cached

    def _branch_tokens(
        self,
        token_feats: Tensor,
        adjacency: np.ndarray,
        alignment: tuple[tuple[int, int], ...],
        params: GraphTransformerParams,
        use_bias: bool,
        collect_trace: bool,
    ) -> tuple[Tensor, Optional[AttentionTrace]]:
        n = token_feats.shape[0]
        if not alignment:
            zeros = Tensor(np.zeros((n, self.config.hidden_dim), dtype=self.config.dtype))
            return zeros, AttentionTrace([]) if collect_trace else None
        nodes = init_node_features(token_feats, alignment)
        nodes = add_node_positions(nodes, self.node_position_table)
        bias = adjacency.astype(self.config.dtype) if use_bias else None
        out, trace = run_branch(nodes, bias, params, nonlinearity=self.config.nonlinearity)
        tokens = dec.broadcast_nodes_to_tokens(out, alignment, n)
        return tokens, (trace if collect_trace else None)

    def option_forward(
        self,
        context: str,
        question: str,
        option: str,
        *,
        collect_trace: bool = False,
    ) -> tuple[Tensor, ForwardDetails]:
        cfg = self.config
        seq = self.encode_option(context, question, option)
        token_feats = encode_tokens(seq, self.encoder, nonlinearity=cfg.nonlinearity)
        n = seq.length

        logic_tokens, logic_trace = self._branch_tokens(
            token_feats,
            seq.logic_graph.adjacency,
            seq.logic_alignment,
            self.logic_branch,
            cfg.use_causal_bias,
            collect_trace,
        )
        syntax_tokens, syntax_trace = self._branch_tokens(
            token_feats,
            seq.syntax_graph.adjacency,
            seq.syntax_alignment,
            self.syntax_branch,
            cfg.use_cooccurrence_bias,
            collect_trace,
        )

        lam = dec.dynamic_gate(syntax_tokens, logic_tokens, self.decoder.gate, mode=cfg.gate_mode)
        fused = dec.fuse(token_feats, syntax_tokens, logic_tokens, lam, self.decoder)
        cls_feat = dec.update_global(
            ad.slice_rows(token_feats, 0, 1), syntax_tokens, logic_tokens, self.decoder
        )
        fused = ad.concat_rows([cls_feat, ad.slice_rows(fused, 1, n)])

        question_feats = ad.slice_rows(token_feats, *seq.question_span)
        if seq.question_span[1] > seq.question_span[0]:
            question_updated = dec.question_attention(question_feats, fused)
        else:
            question_updated = question_feats  # no question tokens: nothing to attend with
        final = dec.assemble_final(
            cls_feat,
            ad.slice_rows(fused, *seq.context_span),
            ad.slice_rows(fused, *seq.option_span),
            question_updated,
        )
        nonlin = ad.gelu if cfg.nonlinearity == "gelu" else ad.relu
        score = dec.score_option(final, self.decoder, nonlinearity=nonlin, pooling=cfg.score_pooling)
        details = ForwardDetails(
            seq=seq,
            gate_values=lam.data.copy(),
            logic_trace=logic_trace,
            syntax_trace=syntax_trace,
        )
        return score, details

    def example_scores(self, context: str, question: str, options: list[str]) -> list[Tensor]:
        return [self.option_forward(context, question, opt)[0] for opt in options]

    def example_loss(self, context: str, question: str, options: list[str], label: int) -> Tensor:
        """Cross-entropy over the softmax of the option scores."""
        scores = self.example_scores(context, question, options)
        row = ad.transpose(ad.concat_rows(scores))  # (1, n)
        log_probs = ad.log_softmax_lastdim(row)
        one_hot = np.zeros((1, len(options)), dtype=self.config.dtype)
        one_hot[0, label] = 1.0
        return ad.scale(ad.sum_all(log_probs * Tensor(one_hot)), -1.0)

    def predict_example(self, context: str, question: str, options: list[str]) -> int:
        scores = [s.item() for s in self.example_scores(context, question, options)]
        return dec.predict(scores)

    def score_values(self, context: str, question: str, options: list[str]) -> list[float]:
        return [s.item() for s in self.example_scores(context, question, options)]

    # --- checkpointing --------------------------------------------------------

    def state_dict(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "config": asdict(self.config),
            "vocab": list(self.vocab.tokens),
            "lexicon": {
                "connectives": [[c.surface, c.direction] for c in self.lexicon.connectives],
                "negation_words": sorted(self.lexicon.negation_words),
                "stop_words": sorted(self.lexicon.stop_words),
            },
            "params": {
                name: {"shape": list(t.shape), "data": [float(v) for v in t.data.reshape(-1)]}
                for name, t in self.named_parameters()
            },
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.state_dict(), sort_keys=True, separators=(",", ":")),
            encoding="utf-8",
        )

    def load_state(self, state: dict) -> None:
        params = dict(self.named_parameters())
        saved = state["params"]
        missing = set(params) ^ set(saved)
        if missing:
            raise ValueError(f"checkpoint parameter mismatch: {sorted(missing)}")
        for name, tensor in params.items():
            entry = saved[name]
            data = np.asarray(entry["data"], dtype=self.config.dtype).reshape(entry["shape"])
            if data.shape != tensor.shape:
                raise ValueError(
                    f"checkpoint shape mismatch for {name}: {data.shape} vs {tensor.shape}"
                )
            tensor.data = data

    @classmethod
    def from_state(cls, state: dict) -> "TwoBranchModel":
        if state.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {state.get('version')!r}")
        config = ModelConfig(**state["config"])
        vocab = Vocabulary(tuple(state["vocab"]))
        lex = state["lexicon"]
        lexicon = LexiconSet(
            connectives=tuple(ConnectiveEntry(s, d) for s, d in lex["connectives"]),
            negation_words=frozenset(lex["negation_words"]),
            stop_words=frozenset(lex["stop_words"]),
        )
        model = cls(config, vocab, lexicon, seed=0)
        model.load_state(state)
        return model

    @classmethod
    def load(cls, path: str | Path) -> "TwoBranchModel":
        return cls.from_state(json.loads(Path(path).read_text(encoding="utf-8")))

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.named_parameters()}

    def restore(self, snapshot: dict[str, np.ndarray]) -> None:
        for name, t in self.named_parameters():
            t.data = snapshot[name].copy()
