"""Checkpoint directories: ``meta.json`` + ``probe.npz`` (+ ``encoder/`` after fine-tuning)."""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np
from sklearn.pipeline import Pipeline

from .classifier import ProbeParams, TrainConfig
from .encoder import EncoderSpec
from .span_repr import ReprType

FORMAT_VERSION = 1


def _spec_dict(spec: EncoderSpec) -> dict:
    d = asdict(spec)
    d["name"] = spec.name.value
    return d


def save_checkpoint(path, estimator, train_config: TrainConfig, extra: dict | None = None) -> Path:
    from .finetune import FineTunedSpanClassifier

    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if isinstance(estimator, Pipeline):
        featurizer, probe = estimator.named_steps["spans"], estimator.named_steps["probe"]
        kind, spec, params = "frozen", featurizer.encoder_spec, probe.params_
        fields = dict(
            layer=featurizer.layer,
            context_mode=featurizer.context_mode,
            max_norm_distance=featurizer.max_norm_distance,
            repr_type=probe.repr_type_.value,
            majority_label=probe.majority_label_,
            width=probe.n_features_in_,
        )
    elif isinstance(estimator, FineTunedSpanClassifier):
        kind, spec, params = "finetuned", estimator.encoder_spec, estimator.params_
        fields = dict(
            layer=estimator.layer,
            context_mode=estimator.context_mode_.value,
            max_norm_distance=estimator.max_norm_distance,
            repr_type=estimator.repr_type_.value,
            majority_label=estimator.majority_label_,
        )
        encoder_dir = path / "encoder"
        estimator.encoder_.model.save_pretrained(encoder_dir)
        estimator.encoder_.tokenizer.save_pretrained(encoder_dir)
    else:
        raise TypeError(f"cannot checkpoint {type(estimator).__name__}")
    meta = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "encoder": _spec_dict(spec),
        "train_config": train_config.to_dict(),
        "seed": train_config.seed,
        **fields,
        **(extra or {}),
    }
    np.savez(path / "probe.npz", **params.arrays())
    (path / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path


def load_checkpoint(path, registry_dir=None, offline: bool = False, device: str = "cpu"):
    """Rebuild a prediction-ready estimator from :func:`save_checkpoint` output."""
    from .classifier import SpanProbeClassifier
    from .featurize import SpanFeaturizer

    path = Path(path)
    meta = json.loads((path / "meta.json").read_text())
    if meta.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {meta.get('format_version')}")
    with np.load(path / "probe.npz") as blob:
        params = ProbeParams.from_arrays({k: blob[k] for k in blob.files})
    spec = EncoderSpec(**meta["encoder"])
    tc = TrainConfig(**meta["train_config"])
    repr_type = ReprType.parse(meta["repr_type"])

    if meta["kind"] == "frozen":
        featurizer = SpanFeaturizer(
            encoder_spec=spec,
            layer=meta["layer"],
            context_mode=meta["context_mode"],
            max_norm_distance=meta["max_norm_distance"],
            registry_dir=registry_dir,
            offline=offline,
            device=device,
        ).fit()
        probe = SpanProbeClassifier(
            repr_type=repr_type.value,
            epochs=tc.epochs,
            learning_rate=tc.learning_rate,
            dropout=tc.dropout_prob,
            batch_size=tc.batch_size,
            weight_decay=tc.weight_decay,
            seed=tc.seed,
        )
        probe._set_params(params, repr_type, np.array([meta["majority_label"]]))
        return Pipeline([("spans", featurizer), ("probe", probe)])

    from .encoder import HFEncoder
    from .finetune import FineTunedSpanClassifier

    import torch

    local_spec = EncoderSpec(**{**meta["encoder"], "model_id": str(path / "encoder"), "trainable": True})
    clf = FineTunedSpanClassifier(
        encoder_spec=local_spec,
        layer=meta["layer"],
        repr_type=repr_type.value,
        epochs=tc.epochs,
        learning_rate=tc.learning_rate,
        dropout=tc.dropout_prob,
        batch_size=tc.batch_size,
        weight_decay=tc.weight_decay,
        seed=tc.seed,
        context_mode=meta["context_mode"],
        max_norm_distance=meta["max_norm_distance"],
        offline=True,
        device=device,
    )
    clf._load(HFEncoder(local_spec, offline=True, device=device))
    head = clf.head_
    with torch.no_grad():
        head.linear.weight.copy_(torch.as_tensor(params.weight))
        head.linear.bias.copy_(torch.as_tensor(params.bias))
        if head.scorer is not None:
            head.scorer.copy_(torch.as_tensor(params.scorer.weights))
    head.train(False)
    clf.majority_label_ = meta["majority_label"]
    return clf
