"""Fine-grained gating for token representations and document-query reading.

The package blends word-level and character-level token encodings with a
per-dimension learned gate, extends the same idea to document-query
attention, and ships the surrounding harness: a float64 autodiff core,
GRU/LSTM cells, synthetic diagnostic tasks, training/evaluation tooling,
a CLI (``finegate``), and sklearn-style estimators.
"""

from .attention import DocQueryGateParams, LayerState, fg_attend, fg_interaction, ga_attend
from .data import Dataset, Example, Vocab, Vocabularies, load_split, load_vocabularies
from .errors import ContractError, DimensionError, EmptySequenceError
from .estimators import ClozeReader, SpanReader, TagPredictor
from .features import FrequencyBinner, TagVocab, build_feature_vector, fit_binner
from .gating import (CombinerKind, EmbeddingTable, ScalarGateParams, Token,
                     WordCharGateParams, char_encode, combine, compute_gate)
from .metrics import evaluate_cloze, evaluate_span, evaluate_tags, span_scores, tag_metrics
from .model import (Answer, HeadKind, Interaction, ModelConfig, Reader,
                    predict_cloze, predict_span)
from .recurrent import GruParams, LstmParams, gru_step, lstm_step, run_sequence
from .report import GateReport, compute_gate_report, export_gate_report
from .tensor import Tape, Tensor
from .train import TrainConfig, TrainResult, train

__version__ = "0.1.0"

__all__ = [
    "Answer", "ClozeReader", "CombinerKind", "ContractError", "Dataset",
    "DimensionError", "DocQueryGateParams", "EmbeddingTable", "EmptySequenceError",
    "Example", "FrequencyBinner", "GateReport", "GruParams", "HeadKind",
    "Interaction", "LayerState", "LstmParams", "ModelConfig", "Reader",
    "ScalarGateParams", "SpanReader", "TagPredictor", "TagVocab", "Tape",
    "Tensor", "Token", "TrainConfig", "TrainResult", "Vocab", "Vocabularies",
    "WordCharGateParams", "build_feature_vector", "char_encode", "combine",
    "compute_gate", "compute_gate_report", "evaluate_cloze", "evaluate_span",
    "evaluate_tags", "export_gate_report", "fg_attend", "fg_interaction",
    "fit_binner", "ga_attend", "gru_step", "load_split", "load_vocabularies",
    "lstm_step", "predict_cloze", "predict_span", "run_sequence", "span_scores",
    "tag_metrics", "train",
]
