"""Idiomaticity detection from contextualized MWE span representations."""

from .alignment import LayeredWordVectors, PieceAlignment, align, pool_pieces
from .classifier import ProbeParams, SpanProbeClassifier, TrainConfig
from .corpus import CorpusSplit, ExampleRecord, Label, Language, Setting, build_split, load_corpus, save_corpus
from .encoder import EncoderSpec, ModelName, make_encoder, select_layer
from .eval_report import EvaluationReport, build_report, emit_table, macro_f1
from .featurize import ContextMode, SpanFeaturizer
from .harness import ExperimentConfig, GridSpec, run_experiment, run_grid
from .pipeline import build_estimator, predict, train
from .span_locator import CharSpan, MWENotFound, WordSpan, char_span_to_word_span, edit_distance, locate_mwe
from .span_repr import AttentiveScorer, ReprType, SpanRepresentation, represent

__version__ = "0.1.0"
