"""Fine-tuning path: gradients flow from the probe into the encoder layers up to ``layer``."""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np
import torch
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .alignment import pooling_matrix
from .classifier import N_CLASSES, ProbeParams, TrainConfig, logits_to_labels, seed_streams
from .encoder import EncoderSpec, HFEncoder
from .featurize import ContextMode, PreparedRecord, prepare_all
from .span_locator import DEFAULT_MAX_NORM_DISTANCE
from .span_repr import AttentiveScorer, ReprType
from .validation import check_binary_labels, check_records

logger = logging.getLogger(__name__)


def combine_torch(span: torch.Tensor, repr_type: ReprType, scorer: Optional[torch.Tensor] = None) -> torch.Tensor:
    x, y = span[0], span[-1]
    if repr_type is ReprType.XY:
        return torch.cat([x, y])
    if repr_type is ReprType.XY_DIFF:
        return torch.cat([x, y, x - y])
    if repr_type is ReprType.XY_PROD:
        return torch.cat([x, y, x * y])
    if repr_type is ReprType.XY_PROD_DIFF:
        return torch.cat([x, y, x * y, x - y])
    if repr_type is ReprType.MAX_POOLING:
        return span.max(dim=0).values
    alpha = torch.softmax(span @ scorer, dim=0)
    return alpha @ span


class SpanProbeHead(torch.nn.Module):
    def __init__(self, repr_type: ReprType, d: int, dropout: float):
        super().__init__()
        self.repr_type = repr_type
        self.dropout = torch.nn.Dropout(dropout)
        self.linear = torch.nn.Linear(repr_type.width(d), N_CLASSES)
        torch.nn.init.zeros_(self.linear.weight)
        torch.nn.init.zeros_(self.linear.bias)
        self.scorer = torch.nn.Parameter(torch.zeros(d)) if repr_type.uses_scorer else None

    def forward(self, spans: Sequence[torch.Tensor]) -> torch.Tensor:
        reps = torch.stack([combine_torch(s, self.repr_type, self.scorer) for s in spans])
        return self.linear(self.dropout(reps))

    def probe_params(self) -> ProbeParams:
        scorer = None
        if self.scorer is not None:
            scorer = AttentiveScorer(self.scorer.detach().cpu().double().numpy().copy())
        return ProbeParams(
            self.linear.weight.detach().cpu().double().numpy().copy(),
            self.linear.bias.detach().cpu().double().numpy().copy(),
            scorer,
        )


class FineTunedSpanClassifier(ClassifierMixin, BaseEstimator):
    """Encoder + span probe trained end to end on records.

    Needs a Hugging Face encoder; the probe sees layer ``layer`` and the layers
    above it receive no gradient.
    """

    def __init__(
        self,
        encoder_spec: Optional[EncoderSpec] = None,
        layer=12,
        repr_type="xy",
        epochs=10,
        learning_rate=5e-5,
        dropout=0.5,
        batch_size=32,
        weight_decay=0.01,
        seed=42,
        context_mode="target",
        max_norm_distance=DEFAULT_MAX_NORM_DISTANCE,
        registry_dir=None,
        offline=False,
        device="cpu",
    ):
        self.encoder_spec = encoder_spec
        self.layer = layer
        self.repr_type = repr_type
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.dropout = dropout
        self.batch_size = batch_size
        self.weight_decay = weight_decay
        self.seed = seed
        self.context_mode = context_mode
        self.max_norm_distance = max_norm_distance
        self.registry_dir = registry_dir
        self.offline = offline
        self.device = device

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            dropout_prob=self.dropout,
            batch_size=self.batch_size,
            seed=self.seed,
            encoder_trainable=True,
            weight_decay=self.weight_decay,
        )

    def _load(self, encoder: Optional[HFEncoder] = None):
        spec = self.encoder_spec
        if spec is None:
            raise ValueError("FineTunedSpanClassifier needs an encoder_spec")
        if not 1 <= self.layer <= spec.num_layers:
            raise ValueError(f"layer {self.layer} out of range 1..{spec.num_layers}")
        self.encoder_ = encoder or HFEncoder(spec.with_trainable(True), self.registry_dir, self.offline, self.device)
        self.repr_type_ = ReprType.parse(self.repr_type)
        self.context_mode_ = ContextMode.parse(self.context_mode)
        self.head_ = SpanProbeHead(self.repr_type_, spec.hidden_width, self.dropout).to(self.encoder_.device)
        self.classes_ = np.arange(N_CLASSES)

    def _logits(self, batch: Sequence[PreparedRecord]) -> torch.Tensor:
        inputs, alignments = self.encoder_.tensorize([p.words for p in batch])
        states = self.encoder_.hidden_states(inputs)[self.layer]
        spans = []
        for b, (p, alignment) in enumerate(zip(batch, alignments)):
            pool = torch.as_tensor(pooling_matrix(alignment, states.shape[1]), dtype=states.dtype, device=states.device)
            words = pool @ states[b]
            spans.append(words[p.span.first_word : p.span.last_word + 1])
        return self.head_(spans)

    def fit(self, X, y=None, eval_set=None):
        records = check_records(X)
        y = check_binary_labels(y if y is not None else [int(r.label) for r in records], len(records))
        config = self._train_config()
        streams = seed_streams(config.seed)
        torch.manual_seed(int(streams["dropout"].integers(2**31)))
        self._load()
        prepared = prepare_all(records, self.context_mode_, self.max_norm_distance, self.encoder_)
        keep = [i for i, p in enumerate(prepared) if p is not None]
        if not keep:
            raise ValueError("every training row lacks a located span")
        self.n_excluded_ = len(records) - len(keep)
        self.majority_label_ = int(np.argmax(np.bincount(y[keep], minlength=N_CLASSES)))

        decay, no_decay = [], []
        for name, param in list(self.encoder_.model.named_parameters()) + list(self.head_.named_parameters()):
            if param.requires_grad:
                (no_decay if name.endswith("bias") else decay).append(param)
        optimizer = torch.optim.AdamW(
            [{"params": decay, "weight_decay": config.weight_decay}, {"params": no_decay, "weight_decay": 0.0}],
            lr=config.learning_rate,
        )
        loss_fn = torch.nn.CrossEntropyLoss()
        self.history_ = []
        for epoch in range(1, config.epochs + 1):
            self.encoder_.model.train(True)
            self.head_.train(True)
            order = streams["shuffle"].permutation(len(keep))
            losses, correct = [], 0
            for lo in range(0, len(order), config.batch_size):
                idx = [keep[i] for i in order[lo : lo + config.batch_size]]
                logits = self._logits([prepared[i] for i in idx])
                target = torch.as_tensor(y[idx], device=logits.device)
                loss = loss_fn(logits, target)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                losses.append(loss.item())
                correct += int((logits.argmax(dim=1) == target).sum())
            entry = {"epoch": epoch, "batch_loss": float(np.mean(losses)), "train_accuracy": correct / len(keep)}
            if eval_set is not None:
                from .eval_report import macro_f1

                X_dev, y_dev = eval_set
                entry["dev_macro_f1"] = macro_f1(y_dev, self.predict(X_dev))
            logger.info("epoch %d %s", epoch, {k: round(v, 4) for k, v in entry.items() if k != "epoch"})
            self.history_.append(entry)
        self.encoder_.model.train(False)
        self.head_.train(False)
        return self

    @property
    def params_(self) -> ProbeParams:
        check_is_fitted(self, "head_")
        return self.head_.probe_params()

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "head_")
        records = check_records(X)
        prepared = prepare_all(records, self.context_mode_, self.max_norm_distance, self.encoder_)
        self.encoder_.model.train(False)
        self.head_.train(False)
        out = np.zeros((len(records), N_CLASSES))
        located = [i for i, p in enumerate(prepared) if p is not None]
        with torch.no_grad():
            for lo in range(0, len(located), self.batch_size):
                idx = located[lo : lo + self.batch_size]
                out[idx] = self._logits([prepared[i] for i in idx]).double().cpu().numpy()
        missing = [i for i, p in enumerate(prepared) if p is None]
        if missing:
            logger.warning("%d rows without a located span get the majority label %d", len(missing), self.majority_label_)
            out[missing, self.majority_label_] = 1.0
        return out

    def predict(self, X) -> np.ndarray:
        return logits_to_labels(self.decision_function(X))

    def predict_proba(self, X) -> np.ndarray:
        return torch.softmax(torch.as_tensor(self.decision_function(X)), dim=1).numpy()
