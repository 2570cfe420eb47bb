"""Binary linear probe over span representations.

The frozen-encoder path lives here in NumPy: forward pass with inverted
dropout, analytic cross-entropy gradients for the probe and the self-attentive
scorer, and AdamW. :class:`SpanProbeClassifier` wraps it as an estimator that
consumes ``(m, d)`` span matrices.

RNG streams: ``np.random.SeedSequence(seed).spawn(3)`` yields, in order, the
initialization, shuffling and dropout generators.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .span_repr import AttentiveScorer, ReprType, attention_weights, combine
from .validation import check_binary_labels, check_spans

logger = logging.getLogger(__name__)

N_CLASSES = 2


@dataclass
class TrainConfig:
    epochs: int = 10
    learning_rate: float = 5e-5
    dropout_prob: float = 0.5
    batch_size: int = 32
    seed: int = 42
    optimizer: str = "adamw"
    encoder_trainable: bool = True
    weight_decay: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.dropout_prob < 1.0:
            raise ValueError(f"dropout_prob must lie in [0, 1), got {self.dropout_prob}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.optimizer.lower() != "adamw":
            raise ValueError(f"unsupported optimizer {self.optimizer!r}")

    def to_dict(self):
        return asdict(self)


@dataclass
class ProbeParams:
    weight: np.ndarray  # (2, input_width)
    bias: np.ndarray  # (2,)
    scorer: Optional[AttentiveScorer] = None

    @classmethod
    def init(cls, input_width: int, d: Optional[int] = None, with_scorer: bool = False) -> "ProbeParams":
        """Zero initialization; the scorer starts as uniform attention."""
        scorer = AttentiveScorer.zeros(d) if with_scorer else None
        return cls(np.zeros((N_CLASSES, input_width)), np.zeros(N_CLASSES), scorer)

    def copy(self) -> "ProbeParams":
        scorer = None if self.scorer is None else AttentiveScorer(self.scorer.weights.copy())
        return ProbeParams(self.weight.copy(), self.bias.copy(), scorer)

    def arrays(self) -> dict[str, np.ndarray]:
        out = {"weight": self.weight, "bias": self.bias}
        if self.scorer is not None:
            out["scorer"] = self.scorer.weights
        return out

    @classmethod
    def from_arrays(cls, arrays) -> "ProbeParams":
        scorer = AttentiveScorer(np.asarray(arrays["scorer"], dtype=float)) if "scorer" in arrays else None
        return cls(np.asarray(arrays["weight"], dtype=float), np.asarray(arrays["bias"], dtype=float), scorer)


def seed_streams(seed: int) -> dict[str, np.random.Generator]:
    init, shuffle, dropout = np.random.SeedSequence(seed).spawn(3)
    return {
        "init": np.random.default_rng(init),
        "shuffle": np.random.default_rng(shuffle),
        "dropout": np.random.default_rng(dropout),
    }


def dropout_mask(shape, p: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout multipliers: 0 with probability ``p``, else ``1 / (1 - p)``."""
    if p == 0.0:
        return np.ones(shape)
    return (rng.random(shape) >= p) / (1.0 - p)


def forward(
    rep,
    params: ProbeParams,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
    dropout_prob: float = 0.5,
) -> np.ndarray:
    """Logits ``weight @ dropout(rep) + bias`` for one representation vector (or a batch)."""
    rep = np.asarray(getattr(rep, "vector", rep), dtype=float)
    if rep.shape[-1] != params.weight.shape[1]:
        raise ValueError(f"representation width {rep.shape[-1]} != probe input width {params.weight.shape[1]}")
    if training:
        if rng is None:
            raise ValueError("training-mode forward needs an RNG for dropout")
        rep = rep * dropout_mask(rep.shape, dropout_prob, rng)
    return rep @ params.weight.T + params.bias


def represent_batch(spans: Sequence[np.ndarray], repr_type: ReprType, scorer=None) -> np.ndarray:
    return np.stack([combine(s, repr_type, scorer) for s in spans])


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def loss_and_grad(
    spans: Sequence[np.ndarray],
    labels,
    params: ProbeParams,
    repr_type: ReprType,
    masks: Optional[np.ndarray] = None,
    reps: Optional[np.ndarray] = None,
) -> tuple[float, ProbeParams]:
    """Mean softmax cross-entropy over the batch and its gradient.

    ``masks`` are inverted-dropout multipliers applied to the representations;
    ``reps`` may pass precomputed representations for scorer-free types.
    """
    labels = np.asarray(labels, dtype=int)
    n = len(labels)
    if reps is None or repr_type.uses_scorer:
        reps = represent_batch(spans, repr_type, params.scorer)
    dropped = reps if masks is None else reps * masks
    logits = dropped @ params.weight.T + params.bias
    logp = _log_softmax(logits)
    loss = -logp[np.arange(n), labels].mean()

    delta = np.exp(logp)
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    grad = ProbeParams(delta.T @ dropped, delta.sum(axis=0))
    if repr_type.uses_scorer:
        g_rep = delta @ params.weight
        if masks is not None:
            g_rep = g_rep * masks
        g_scorer = np.zeros_like(params.scorer.weights)
        for span, g, r in zip(spans, g_rep, reps):
            alpha = attention_weights(span, params.scorer)
            g_scores = alpha * (span @ g - r @ g)
            g_scorer += g_scores @ span
        grad.scorer = AttentiveScorer(g_scorer)
    return float(loss), grad


class AdamW:
    """Adam with decoupled weight decay; decay skips the bias."""

    def __init__(self, lr: float, betas=(0.9, 0.999), eps: float = 1e-8, weight_decay: float = 0.01):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """Update ``params`` in place."""
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name, p in params.items():
            g = grads[name]
            if name != "bias" and self.weight_decay:
                p *= 1.0 - self.lr * self.weight_decay
            m = self._m.setdefault(name, np.zeros_like(p))
            v = self._v.setdefault(name, np.zeros_like(p))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def predict_logits(spans: Sequence[np.ndarray], params: ProbeParams, repr_type: ReprType) -> np.ndarray:
    reps = represent_batch(spans, repr_type, params.scorer)
    return reps @ params.weight.T + params.bias


def logits_to_labels(logits) -> np.ndarray:
    """Argmax per row; equal logits resolve to label 0."""
    return np.argmax(np.asarray(logits), axis=-1)


def train_probe(
    spans: Sequence[np.ndarray],
    labels,
    repr_type: ReprType,
    config: TrainConfig,
    on_epoch_end: Optional[Callable[[int, ProbeParams], dict]] = None,
) -> tuple[ProbeParams, list[dict]]:
    """Fit the probe for ``config.epochs`` passes over seeded shuffles of the data.

    Returns the final-epoch parameters and a per-epoch trace. ``on_epoch_end``
    may return extra metrics (e.g. dev macro-F1) to merge into the trace.
    """
    labels = np.asarray(labels, dtype=int)
    if len(spans) == 0:
        raise ValueError("no training spans")
    d = spans[0].shape[1]
    streams = seed_streams(config.seed)
    params = ProbeParams.init(repr_type.width(d), d, with_scorer=repr_type.uses_scorer)
    optimizer = AdamW(config.learning_rate, weight_decay=config.weight_decay)
    fixed_reps = None if repr_type.uses_scorer else represent_batch(spans, repr_type)
    history = []
    n = len(labels)
    for epoch in range(1, config.epochs + 1):
        order = streams["shuffle"].permutation(n)
        batch_losses = []
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            batch = [spans[i] for i in idx]
            reps = None if fixed_reps is None else fixed_reps[idx]
            masks = dropout_mask((len(idx), repr_type.width(d)), config.dropout_prob, streams["dropout"])
            loss, grad = loss_and_grad(batch, labels[idx], params, repr_type, masks=masks, reps=reps)
            optimizer.step(params.arrays(), grad.arrays())
            batch_losses.append(loss)
        full_loss, _ = loss_and_grad(spans, labels, params, repr_type, reps=fixed_reps)
        pred = logits_to_labels(predict_logits(spans, params, repr_type))
        entry = {
            "epoch": epoch,
            "batch_loss": float(np.mean(batch_losses)),
            "train_loss": full_loss,
            "train_accuracy": float((pred == labels).mean()),
        }
        if on_epoch_end is not None:
            entry.update(on_epoch_end(epoch, params))
        logger.info("epoch %d %s", epoch, {k: round(v, 4) for k, v in entry.items() if k != "epoch"})
        history.append(entry)
    return params, history


class SpanProbeClassifier(ClassifierMixin, BaseEstimator):
    """Linear probe on span representations of ``(m, d)`` span matrices.

    ``None`` rows (spans that could not be located) are skipped during ``fit``
    and predicted as the majority training label.
    """

    def __init__(
        self,
        repr_type="xy",
        epochs=10,
        learning_rate=5e-5,
        dropout=0.5,
        batch_size=32,
        weight_decay=0.01,
        seed=42,
    ):
        self.repr_type = repr_type
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.dropout = dropout
        self.batch_size = batch_size
        self.weight_decay = weight_decay
        self.seed = seed

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            dropout_prob=self.dropout,
            batch_size=self.batch_size,
            seed=self.seed,
            encoder_trainable=False,
            weight_decay=self.weight_decay,
        )

    def fit(self, X, y, eval_set=None):
        spans = check_spans(X)
        y = check_binary_labels(y, len(spans))
        keep = [i for i, s in enumerate(spans) if s is not None]
        if not keep:
            raise ValueError("every training row lacks a located span")
        if len(keep) < len(spans):
            logger.warning("excluding %d of %d training rows without a located span", len(spans) - len(keep), len(spans))
        repr_type = ReprType.parse(self.repr_type)
        train_spans = [spans[i] for i in keep]
        train_y = y[keep]

        callback = None
        if eval_set is not None:
            from .eval_report import macro_f1

            X_dev, y_dev = eval_set

            def callback(epoch, params):
                self._set_params(params, repr_type, train_y)
                return {"dev_macro_f1": macro_f1(y_dev, self.predict(X_dev))}

        params, history = train_probe(train_spans, train_y, repr_type, self._train_config(), callback)
        self._set_params(params, repr_type, train_y)
        self.history_ = history
        self.n_excluded_ = len(spans) - len(keep)
        return self

    def _set_params(self, params: ProbeParams, repr_type: ReprType, train_y) -> None:
        self.params_ = params
        self.repr_type_ = repr_type
        self.classes_ = np.arange(N_CLASSES)
        counts = np.bincount(train_y, minlength=N_CLASSES)
        self.majority_label_ = int(np.argmax(counts))
        self.n_features_in_ = params.weight.shape[1] // repr_type.width(1)

    def decision_function(self, X) -> np.ndarray:
        """Two-column logits; unlocated rows get logits favouring the majority label."""
        check_is_fitted(self, "params_")
        spans = check_spans(X, width=self.n_features_in_)
        out = np.zeros((len(spans), N_CLASSES))
        located = [i for i, s in enumerate(spans) if s is not None]
        if located:
            out[located] = predict_logits([spans[i] for i in located], self.params_, self.repr_type_)
        missing = [i for i, s in enumerate(spans) if s is None]
        if missing:
            logger.warning("%d rows without a located span get the majority label %d", len(missing), self.majority_label_)
            out[missing, self.majority_label_] = 1.0
        return out

    def predict_proba(self, X) -> np.ndarray:
        return np.exp(_log_softmax(self.decision_function(X)))

    def predict(self, X) -> np.ndarray:
        return logits_to_labels(self.decision_function(X))

    def represent(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        return represent_batch(check_spans(X, width=self.n_features_in_), self.repr_type_, self.params_.scorer)
