"""Assemble locate -> encode -> represent -> probe into one estimator, and train/predict with it."""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np
from sklearn.pipeline import Pipeline

from .classifier import SpanProbeClassifier, TrainConfig
from .corpus import CorpusSplit, ExampleRecord
from .encoder import EncoderSpec, ModelName
from .featurize import ContextMode, SpanFeaturizer
from .span_locator import DEFAULT_MAX_NORM_DISTANCE
from .span_repr import ReprType
from .validation import labels_of

logger = logging.getLogger(__name__)


def build_estimator(
    encoder_spec: EncoderSpec,
    layer: int,
    repr_type: ReprType | str,
    train_config: Optional[TrainConfig] = None,
    context_mode: ContextMode | str = ContextMode.TARGET_ONLY,
    max_norm_distance: float = DEFAULT_MAX_NORM_DISTANCE,
    registry_dir=None,
    offline: bool = False,
    device: str = "cpu",
):
    """A fine-tuning classifier when the encoder is trainable, else featurizer + probe."""
    train_config = train_config or TrainConfig()
    repr_type = ReprType.parse(repr_type)
    context_mode = ContextMode.parse(context_mode)
    trainable = train_config.encoder_trainable and encoder_spec.name is not ModelName.MOCK
    if train_config.encoder_trainable and not trainable:
        logger.info("mock encoder has no weights to fine-tune; training the probe only")
    if trainable:
        from .finetune import FineTunedSpanClassifier

        return FineTunedSpanClassifier(
            encoder_spec=encoder_spec.with_trainable(True),
            layer=layer,
            repr_type=repr_type.value,
            epochs=train_config.epochs,
            learning_rate=train_config.learning_rate,
            dropout=train_config.dropout_prob,
            batch_size=train_config.batch_size,
            weight_decay=train_config.weight_decay,
            seed=train_config.seed,
            context_mode=context_mode.value,
            max_norm_distance=max_norm_distance,
            registry_dir=registry_dir,
            offline=offline,
            device=device,
        )
    return Pipeline(
        [
            (
                "spans",
                SpanFeaturizer(
                    encoder_spec=encoder_spec.with_trainable(False),
                    layer=layer,
                    context_mode=context_mode.value,
                    max_norm_distance=max_norm_distance,
                    registry_dir=registry_dir,
                    offline=offline,
                    device=device,
                ),
            ),
            (
                "probe",
                SpanProbeClassifier(
                    repr_type=repr_type.value,
                    epochs=train_config.epochs,
                    learning_rate=train_config.learning_rate,
                    dropout=train_config.dropout_prob,
                    batch_size=train_config.batch_size,
                    weight_decay=train_config.weight_decay,
                    seed=train_config.seed,
                ),
            ),
        ]
    )


def final_step(estimator):
    return estimator.steps[-1][1] if isinstance(estimator, Pipeline) else estimator


def train(split: CorpusSplit, estimator, track_dev: bool = True):
    """Fit ``estimator`` on the labeled training rows of ``split``.

    With ``track_dev`` and a labeled dev set, dev macro-F1 is logged per epoch
    (never used for model selection). Returns the fitted estimator and its
    per-epoch trace.
    """
    rows = [r for r in split.train if r.labeled]
    if not rows:
        raise ValueError("no labeled training rows")
    y = labels_of(rows)
    fit_params = {}
    dev = [r for r in split.dev if r.labeled]
    if track_dev and dev:
        if isinstance(estimator, Pipeline):
            featurizer = estimator.steps[0][1]
            featurizer.fit()
            fit_params["probe__eval_set"] = (featurizer.transform(dev), labels_of(dev))
        else:
            fit_params["eval_set"] = (dev, labels_of(dev))
    estimator.fit(rows, y, **fit_params)
    return estimator, final_step(estimator).history_


def predict(records: Sequence[ExampleRecord], estimator) -> np.ndarray:
    """Labels for ``records``; unlocated rows get the majority training label."""
    if not records:
        return np.zeros(0, dtype=int)
    return np.asarray(estimator.predict(list(records)), dtype=int)
