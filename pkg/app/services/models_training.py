"""Baseline and multi-head classifiers, and the training / evaluation loop"""
import json
import time
from collections import OrderedDict
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import SpecError, TrainingError
from app.core.log import get_logger
from app.models.experiment import EpochRecord, ModelSpec, TrainConfig, TrainingLog
from app.models.signals import Dataset, N_CHANNELS, Window
from app.services.neural_backend import (
    DEFAULT_DTYPE,
    AdamState,
    BiLSTM,
    ChannelsLast,
    Conv1d,
    Dense,
    Dropout,
    Layer,
    MaxPool1d,
    Parameter,
    ReLU,
    Sequential,
    TemporalReduce,
    adam_step,
    all_finite,
    backward,
    count_parameters,
    parameter_arrays,
    softmax_xent,
    softmax_xent_grad,
)
from app.services.signal_core import stack_windows

logger = get_logger(__name__)

EVAL_BATCH = 256


class InertialClassifier(Layer):
    """Per-head conv -> pool -> Bi-LSTM -> dropout stacks fused before a dense classifier"""

    def __init__(self, spec: ModelSpec, seed: int = 0, dtype=DEFAULT_DTYPE):
        super().__init__()
        self.spec = spec
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        self.heads: List[Sequential] = []
        for index, channels in enumerate(spec.heads):
            name = f"head{index}"
            self.heads.append(
                Sequential(
                    Conv1d(f"{name}.conv", len(channels), spec.filters, spec.kernel, rng, dtype),
                    MaxPool1d(spec.pool),
                    ChannelsLast(),
                    BiLSTM(f"{name}.lstm", spec.filters, spec.hidden, rng, dtype),
                    TemporalReduce(spec.hidden, spec.reduction),
                    Dropout(spec.dropout),
                )
            )
        fused = 2 * spec.hidden * len(spec.heads)
        classifier: List[Layer] = [Dense("fc", fused, spec.fc_width, rng, dtype)]
        if spec.fc_activation == "relu":
            classifier.append(ReLU())
        classifier.append(Dense("out", spec.fc_width, spec.n_classes, rng, dtype))
        self.classifier = Sequential(*classifier)

    def parameters(self) -> List[Parameter]:
        params = [p for head in self.heads for p in head.parameters()]
        return params + self.classifier.parameters()

    def named_parameters(self) -> "OrderedDict[str, Parameter]":
        return OrderedDict((p.name, p) for p in self.parameters())

    @property
    def parameter_count(self) -> int:
        return count_parameters(self.parameters())

    def min_window_length(self) -> int:
        return self.spec.kernel - 1 + self.spec.pool

    def head_inputs(self, x: np.ndarray) -> List[np.ndarray]:
        """Split ``(B, L, 6)`` windows into per-head ``(B, C_h, L)`` inputs"""
        if x.ndim != 3 or x.shape[2] != N_CHANNELS:
            raise SpecError(f"classifier expects (B, L, {N_CHANNELS}) input, got {x.shape}")
        if x.shape[1] < self.min_window_length():
            raise SpecError(f"window length {x.shape[1]} too short for kernel {self.spec.kernel} and pool {self.spec.pool}")
        x = np.asarray(x, dtype=self.dtype)
        return [np.ascontiguousarray(x[:, :, list(channels)].transpose(0, 2, 1)) for channels in self.spec.heads]

    def features(self, x: np.ndarray, training: bool = False, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        """Fused head features fed to the dense classifier"""
        parts = [head.forward(xh, training=training, rng=rng) for head, xh in zip(self.heads, self.head_inputs(x))]
        self._cache = [p.shape[1] for p in parts]
        return np.concatenate(parts, axis=1)

    def forward(self, x, training=False, rng=None):
        return self.classifier.forward(self.features(x, training=training, rng=rng), training=training, rng=rng)

    def backward(self, dout):
        widths = self._take_cache()
        dfeatures = self.classifier.backward(dout)
        offsets = np.cumsum([0] + widths)
        for head, start, stop in zip(self.heads, offsets[:-1], offsets[1:]):
            head.backward(dfeatures[:, start:stop])
        return None

    def clear_caches(self) -> None:
        """Drop forward records kept for a backward pass that will not happen"""
        for layer in [self, self.classifier, *self.classifier.layers, *self.heads]:
            layer._cache = None
        for head in self.heads:
            for layer in head.layers:
                layer._cache = None


def build_model(spec: ModelSpec, seed: int = 0, dtype=DEFAULT_DTYPE) -> InertialClassifier:
    """Instantiate a classifier; parameter shapes depend only on the model spec"""
    spec.validate()
    model = InertialClassifier(spec, seed=seed, dtype=dtype)
    logger.debug("built %s model with %d parameters", spec.variant, model.parameter_count)
    return model


def predict_logits(model: InertialClassifier, x: np.ndarray, batch_size: int = EVAL_BATCH) -> np.ndarray:
    outputs = []
    for start in range(0, x.shape[0], batch_size):
        outputs.append(model.forward(x[start : start + batch_size], training=False))
        model.clear_caches()
    return np.concatenate(outputs, axis=0)


def evaluate(model: InertialClassifier, windows: Sequence[Window]) -> float:
    """Test accuracy in percent with dropout disabled"""
    if len(windows) == 0:
        raise TrainingError("cannot evaluate on an empty window set")
    x, y, _ = stack_windows(windows, dtype=model.dtype)
    return _accuracy(model, x, y)


def _accuracy(model: InertialClassifier, x: np.ndarray, y: np.ndarray) -> float:
    predictions = predict_logits(model, x).argmax(axis=1)
    return 100.0 * float((predictions == y).mean())


def train_step(
    model: InertialClassifier, x: np.ndarray, y: np.ndarray, state: AdamState, rng: np.random.Generator
) -> float:
    logits = model.forward(x, training=True, rng=rng)
    loss, probs = softmax_xent(logits, y)
    grads = backward(model, softmax_xent_grad(probs, y))
    adam_step(parameter_arrays(model), grads, state)
    return loss


def train(
    model: InertialClassifier,
    dataset: Dataset,
    cfg: TrainConfig,
    log_path: Optional[Path] = None,
) -> Tuple[InertialClassifier, TrainingLog]:
    """Seeded mini-batch Adam training; per-epoch loss and test accuracy are logged"""
    if len(dataset.train) == 0:
        raise TrainingError(f"dataset {dataset.name} has an empty training split")
    if dataset.n_classes != model.spec.n_classes:
        raise TrainingError(
            f"dataset {dataset.name} has {dataset.n_classes} classes, model expects {model.spec.n_classes}"
        )
    x_train, y_train, _ = stack_windows(dataset.train, dtype=model.dtype)
    x_test, y_test, _ = stack_windows(dataset.test, dtype=model.dtype)
    rng = np.random.default_rng(cfg.seed)
    state = AdamState(lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    log = TrainingLog()
    log_handle = None
    if log_path is not None:
        log_path.parent.mkdir(parents=True, exist_ok=True)
        log_handle = open(log_path, "a", encoding="utf-8")
    try:
        for epoch in range(1, cfg.epochs + 1):
            started = time.perf_counter()
            order = rng.permutation(x_train.shape[0])
            losses, weights = [], []
            for start in range(0, order.shape[0], cfg.batch_size):
                batch = order[start : start + cfg.batch_size]
                loss = train_step(model, x_train[batch], y_train[batch], state, rng)
                if not np.isfinite(loss):
                    raise TrainingError(f"non-finite loss at epoch {epoch} on dataset {dataset.name}")
                if cfg.debug and not all_finite(parameter_arrays(model).values()):
                    raise TrainingError(f"non-finite parameters after a step in epoch {epoch}")
                losses.append(loss)
                weights.append(batch.shape[0])
            train_loss = float(np.average(losses, weights=weights))
            test_acc = None
            if x_test.shape[0] and (epoch % cfg.eval_every == 0 or epoch == cfg.epochs):
                test_acc = _accuracy(model, x_test, y_test)
            record = EpochRecord(
                epoch=epoch,
                train_loss=train_loss,
                test_acc=test_acc,
                wall_ms=(time.perf_counter() - started) * 1000.0,
            )
            log.records.append(record)
            logger.info(
                "%s epoch %d/%d loss %.4f test acc %s (%.0f ms)",
                dataset.name,
                epoch,
                cfg.epochs,
                train_loss,
                "-" if test_acc is None else f"{test_acc:.2f}%",
                record.wall_ms,
            )
            if log_handle is not None:
                log_handle.write(json.dumps(record.__dict__) + "\n")
                log_handle.flush()
    finally:
        if log_handle is not None:
            log_handle.close()
    return model, log
