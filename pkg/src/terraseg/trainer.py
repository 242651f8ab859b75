"""Training protocol: Adam on BCE, per-epoch validation, best checkpoint, early stopping."""
from __future__ import annotations

import contextlib
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import save_checkpoint
from .data import Manifest, make_batches, load_image, scan_dataset, split_manifest
from .errors import ConfigurationError, DatasetError, TrainingDiverged
from .metrics import MetricTriple, bce_with_logits, iou, pixel_accuracy
from .model import UNetConfig, forward, init_params
from .ndwi import write_mask
from .nn import sigmoid_array
from .optim import AdamState, Decision, EarlyStopState, adam_step, early_stop_update
from .tensor import Node, backward, constant, no_grad

log = logging.getLogger(__name__)

CSV_HEADER = "epoch,train_loss,train_acc,train_iou,val_loss,val_acc,val_iou"
CHECKPOINT_NAME = "best.ckpt"
METRICS_NAME = "metrics.csv"


@dataclass
class TrainConfig:
    data_root: Path | None = None
    out_dir: Path | None = None
    lr: float = 0.001
    train_batch: int = 32
    val_batch: int = 24
    max_epochs: int = 50
    patience: int = 9
    split: float = 0.8
    seed: int = 0
    img_size: int = 256
    model: UNetConfig = field(default_factory=UNetConfig)
    deterministic: bool = False
    threads: int | None = None
    workers: int = 0

    def __post_init__(self):
        if self.model.img_size != self.img_size:
            raise ConfigurationError(
                f"model img_size {self.model.img_size} != training img_size {self.img_size}")
        if self.train_batch < 1 or self.val_batch < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ConfigurationError("batch sizes, max_epochs and patience must be >= 1")


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    train_iou: float
    val_loss: float
    val_acc: float
    val_iou: float

    def csv_row(self) -> str:
        return ",".join([str(self.epoch)] + [repr(float(getattr(self, k)))
                                             for k in CSV_HEADER.split(",")[1:]])


def thread_limit(threads: int | None):
    """Cap BLAS threads (no-op when ``threads`` is None)."""
    if threads is None:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=threads)


class _Running:
    """Sample-count-weighted running mean of (loss, accuracy, iou)."""

    def __init__(self):
        self.n = 0
        self.sums = [0.0, 0.0, 0.0]

    def add(self, count, loss, acc, iou_):
        self.n += count
        for i, v in enumerate((loss, acc, iou_)):
            self.sums[i] += count * float(v)

    def means(self):
        return tuple(s / self.n for s in self.sums)


def _batch_metrics(logits: np.ndarray, masks: np.ndarray):
    probs = sigmoid_array(logits)
    return pixel_accuracy(probs, masks), iou(probs, masks)


def evaluate(params: dict, config: UNetConfig, manifest: Manifest, batch_size: int = 24,
             workers: int = 0) -> MetricTriple:
    """Loss, accuracy and IoU over ``manifest`` in fixed order; parameters are not touched."""
    if len(manifest) == 0:
        raise DatasetError("cannot evaluate on an empty manifest")
    running = _Running()
    with no_grad():
        for batch in make_batches(manifest, batch_size, shuffle=False,
                                  target_size=config.img_size, workers=workers):
            logits = forward(params, config, constant(batch.images))
            loss = float(bce_with_logits(logits, batch.masks).value)
            running.add(len(batch), loss, *_batch_metrics(logits.value, batch.masks))
    loss, acc, iou_ = running.means()
    return MetricTriple(accuracy=acc, loss=loss, iou=iou_)


def predict(params: dict, config: UNetConfig, image_path, out_path) -> np.ndarray:
    """Resize the image to ``config.img_size``, segment it, write a {0, 255} mask."""
    image = load_image(image_path, config.img_size)
    with no_grad():
        logits = forward(params, config, constant(image[None])).value
    mask = (sigmoid_array(logits[0, 0]) >= 0.5).astype(np.uint8)
    write_mask(mask, out_path)
    return mask


class Trainer:
    """Runs the epoch loop for one :class:`TrainConfig`.

    ``train_epoch`` and ``validate`` are separate methods so the stopping
    logic can be exercised with stubbed metrics.
    """

    def __init__(self, config: TrainConfig, train_set: Manifest | None = None,
                 val_set: Manifest | None = None, params: dict | None = None):
        self.config = config
        if train_set is None or val_set is None:
            if config.data_root is None:
                raise ConfigurationError("data_root is required when no manifests are given")
            train_set, val_set = split_manifest(scan_dataset(config.data_root), config.split,
                                                config.seed)
        self.train_set, self.val_set = train_set, val_set
        self.params = params if params is not None else init_params(config.model, config.seed)
        self.adam = AdamState(lr=config.lr)
        self.stopper = EarlyStopState(patience=config.patience)
        self.history: list[EpochMetrics] = []

    def train_epoch(self, epoch: int) -> tuple[float, float, float]:
        cfg = self.config
        running = _Running()
        batches = make_batches(self.train_set, cfg.train_batch, cfg.seed, epoch,
                               target_size=cfg.img_size, workers=cfg.workers)
        for b, batch in enumerate(batches):
            nodes = {name: Node(value) for name, value in self.params.items()}
            logits = forward(nodes, cfg.model, constant(batch.images))
            loss = bce_with_logits(logits, batch.masks)
            loss_value = float(loss.value)
            if not math.isfinite(loss_value):
                raise TrainingDiverged(f"non-finite training loss at epoch {epoch}, batch {b}")
            backward(loss)
            adam_step(self.params, {name: node.grad for name, node in nodes.items()}, self.adam)
            running.add(len(batch), loss_value, *_batch_metrics(logits.value, batch.masks))
        return running.means()

    def validate(self) -> MetricTriple:
        return evaluate(self.params, self.config.model, self.val_set, self.config.val_batch,
                        self.config.workers)

    def run(self) -> tuple[dict, list[EpochMetrics]]:
        """Train until early stopping or ``max_epochs``; return the best parameters and history."""
        cfg = self.config
        out_dir = Path(cfg.out_dir) if cfg.out_dir is not None else None
        csv = None
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            csv = open(out_dir / METRICS_NAME, "w", encoding="utf-8", newline="\n")
            csv.write(CSV_HEADER + "\n")
        threads = 1 if cfg.deterministic else cfg.threads
        try:
            with thread_limit(threads):
                for epoch in range(1, cfg.max_epochs + 1):
                    train_loss, train_acc, train_iou = self.train_epoch(epoch)
                    val = self.validate()
                    row = EpochMetrics(epoch, train_loss, train_acc, train_iou,
                                       val.loss, val.accuracy, val.iou)
                    self.history.append(row)
                    log.info("epoch %d: loss %.4f acc %.4f iou %.4f | val loss %.4f acc %.4f iou %.4f",
                             epoch, train_loss, train_acc, train_iou, val.loss, val.accuracy, val.iou)
                    decision = early_stop_update(self.stopper, epoch, val.loss, self.params)
                    if self.stopper.best_epoch == epoch and out_dir is not None:
                        save_checkpoint(self.stopper.best_params_snapshot, cfg.model,
                                        out_dir / CHECKPOINT_NAME)
                    if csv is not None:
                        csv.write(row.csv_row() + "\n")
                        csv.flush()
                        os.fsync(csv.fileno())
                    if decision is Decision.STOP:
                        log.info("early stop after epoch %d (best epoch %d)",
                                 epoch, self.stopper.best_epoch)
                        break
        finally:
            if csv is not None:
                csv.close()
        best = self.stopper.best_params_snapshot
        if best is None:
            best = {k: v.copy() for k, v in self.params.items()}
        return best, self.history


def train(config: TrainConfig) -> tuple[dict, list[EpochMetrics]]:
    return Trainer(config).run()
