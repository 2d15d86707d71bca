"""Two-branch graph transformer for multiple-choice logical reasoning.

Text is segmented into logical units, a directed causal graph and a symmetric
co-occurrence graph are built over them, both adjacencies bias the attention
of two transformer branches, and a gated decoder fuses the branches with the
token features to score each answer option.
"""

from .autodiff import Tensor, backward, grad_check
from .data import DatasetError, ExampleRecord, load_dataset, validate_examples
from .decoder import predict
from .encoder import EncodedSequence, InputError, Vocabulary, build_input
from .estimator import TextGraphParser, TwoBranchReasoner
from .explain import export_explanation
from .lexicon import ConnectiveEntry, LexiconError, LexiconSet, load_lexicon
from .logic_graph import (
    CausalPair,
    LogicGraph,
    LogicalExpression,
    build_logic_graph,
    derive_logical_expression,
)
from .model import ModelConfig, TwoBranchModel
from .pipeline import ParsedText, parse_text
from .segmenter import (
    LogicalUnit,
    SegmentationResult,
    Token,
    split_logical_units,
    split_sentence_nodes,
    tokenize,
)
from .synth import generate_synthetic, oracle_answer
from .syntax_graph import SyntaxGraph, build_syntax_graph, overlap_ratio, token_set
from .training import Adam, Metrics, TrainConfig, TrainResult, evaluate, lr_schedule, train

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "CausalPair",
    "ConnectiveEntry",
    "DatasetError",
    "EncodedSequence",
    "ExampleRecord",
    "InputError",
    "LexiconError",
    "LexiconSet",
    "LogicGraph",
    "LogicalExpression",
    "LogicalUnit",
    "Metrics",
    "ModelConfig",
    "ParsedText",
    "SegmentationResult",
    "SyntaxGraph",
    "Tensor",
    "TextGraphParser",
    "Token",
    "TrainConfig",
    "TrainResult",
    "TwoBranchModel",
    "TwoBranchReasoner",
    "Vocabulary",
    "backward",
    "build_input",
    "build_logic_graph",
    "build_syntax_graph",
    "derive_logical_expression",
    "evaluate",
    "export_explanation",
    "generate_synthetic",
    "grad_check",
    "load_dataset",
    "load_lexicon",
    "lr_schedule",
    "oracle_answer",
    "parse_text",
    "predict",
    "split_logical_units",
    "split_sentence_nodes",
    "token_set",
    "tokenize",
    "train",
    "validate_examples",
    "overlap_ratio",
    "export_explanation",
]
