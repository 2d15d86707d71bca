"""scikit-learn style estimators wrapping the parser and the full model."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .data import validate_examples
from .lexicon import load_lexicon
from .pipeline import parse_text
from .training import TrainConfig, evaluate, train


class TextGraphParser(TransformerMixin, BaseEstimator):
    """Stateless transformer: raw texts to parsed graph structures.

    ``transform`` returns one ``ParsedText`` per input string (units, logic
    graph, syntax graph, rendered expression).
    """

    def __init__(self, delta: float = 0.5, lexicon_path: Optional[str] = None):
        self.delta = delta
        self.lexicon_path = lexicon_path

    def fit(self, X=None, y=None):
        self.lexicon_ = load_lexicon(self.lexicon_path)
        return self

    def transform(self, X):
        check_is_fitted(self, "lexicon_")
        return [parse_text(str(text), self.lexicon_, self.delta) for text in X]


class TwoBranchReasoner(ClassifierMixin, BaseEstimator):
    """Multiple-choice answer selector with the two-branch graph transformer.

    ``X`` is a sequence of example records (mappings with context, question,
    answers/options and optionally label). ``y`` overrides record labels when
    given. ``predict`` returns option indices.
    """

    def __init__(
        self,
        hidden_dim: int = 64,
        heads: int = 2,
        layers: int = 2,
        encoder_layers: int = 2,
        max_seq_len: int = 64,
        delta: float = 0.5,
        learning_rate: float = 1.5e-3,
        batch_size: int = 8,
        epochs: int = 30,
        warmup_frac: float = 0.15,
        seed: int = 0,
        grad_clip: Optional[float] = 1.0,
        precision: str = "float32",
        gate_mode: str = "dynamic",
        use_causal_bias: bool = True,
        use_cooccurrence_bias: bool = True,
        lexicon_path: Optional[str] = None,
    ):
        self.hidden_dim = hidden_dim
        self.heads = heads
        self.layers = layers
        self.encoder_layers = encoder_layers
        self.max_seq_len = max_seq_len
        self.delta = delta
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.warmup_frac = warmup_frac
        self.seed = seed
        self.grad_clip = grad_clip
        self.precision = precision
        self.gate_mode = gate_mode
        self.use_causal_bias = use_causal_bias
        self.use_cooccurrence_bias = use_cooccurrence_bias
        self.lexicon_path = lexicon_path

    def _config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            warmup_frac=self.warmup_frac,
            seed=self.seed,
            grad_clip=self.grad_clip,
            hidden_dim=self.hidden_dim,
            heads=self.heads,
            layers=self.layers,
            encoder_layers=self.encoder_layers,
            max_seq_len=self.max_seq_len,
            delta=self.delta,
            precision=self.precision,
            gate_mode=self.gate_mode,
            use_causal_bias=self.use_causal_bias,
            use_cooccurrence_bias=self.use_cooccurrence_bias,
        )

    @staticmethod
    def _with_labels(X, y) -> list:
        records = validate_examples(X)
        if y is None:
            return records
        y = np.asarray(y)
        if len(y) != len(records):
            raise ValueError(f"y has {len(y)} labels for {len(records)} records")
        import dataclasses

        return [dataclasses.replace(r, label=int(label)) for r, label in zip(records, y)]

    def fit(self, X, y=None, validation_data=None):
        records = self._with_labels(X, y)
        lexicon = load_lexicon(self.lexicon_path)
        result = train(self._config(), records, validation_data, lexicon=lexicon)
        self.model_ = result.model
        self.train_metrics_ = result.train_metrics
        self.valid_metrics_ = result.valid_metrics
        self.classes_ = np.arange(len(records[0].options))
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        records = validate_examples(X)
        return np.asarray(
            [
                self.model_.predict_example(r.context, r.question, list(r.options))
                for r in records
            ],
            dtype=np.int64,
        )

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        records = validate_examples(X)
        n_options = {len(r.options) for r in records}
        if len(n_options) != 1:
            raise ValueError("predict_proba needs a uniform option count across records")
        rows = []
        for r in records:
            scores = np.asarray(
                self.model_.score_values(r.context, r.question, list(r.options)),
                dtype=np.float64,
            )
            shifted = np.exp(scores - scores.max())
            rows.append(shifted / shifted.sum())
        return np.vstack(rows)

    def score(self, X, y=None, sample_weight=None) -> float:
        check_is_fitted(self, "model_")
        records = self._with_labels(X, y)
        return evaluate(self.model_, records).accuracy
