"""Adam training loop over scene mini-batches."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from agentimp.errors import ConfigError, NumericError
from agentimp.model.features import make_batch, scene_tensors
from agentimp.model.net import batch_loss
from agentimp.model.params import ModelConfig, ModelParams, init_params

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    lr: float = 2e-3
    batch: int = 32
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lr_decay: float = 0.97

    def __post_init__(self):
        if self.epochs < 0 or self.batch < 1 or self.lr < 0:
            raise ConfigError(f"invalid training config {self}")


class Adam:
    def __init__(self, params: dict, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, p in params.items():
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            params[k] = p - self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


class TrainingError(NumericError):
    pass


@dataclass
class TrainResult:
    params: ModelParams
    losses: list = field(default_factory=list)


def train(
    scenes,
    config: TrainConfig = TrainConfig(),
    model_config: ModelConfig | None = None,
    init: ModelParams | None = None,
    on_epoch: Callable[[int, float], None] | None = None,
) -> TrainResult:
    """Minimise mean pointwise L2 of predicted vs ground-truth futures.

    Deterministic given ``config.seed``: it seeds both the initial weights
    (unless ``init`` is given) and the per-epoch shuffles.
    """
    scenes = list(scenes)
    if not scenes:
        raise ConfigError("training needs at least one scene")
    if init is not None:
        params = init.copy()
    else:
        params = init_params(model_config or ModelConfig(), seed=config.seed)
    cfg = params.config
    items = [scene_tensors(s, cfg) for s in scenes]
    rng = np.random.default_rng(config.seed + 1)
    opt = Adam(params.tensors, config.lr, config.beta1, config.beta2, config.eps)
    losses = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(items))
        total, rows = 0.0, 0
        for start in range(0, len(order), config.batch):
            chunk = [items[n] for n in order[start:start + config.batch]]
            batch = make_batch(chunk, cfg)
            try:
                loss, grads = batch_loss(params, batch)
            except NumericError as exc:
                raise TrainingError(f"non-finite value at epoch {epoch}, batch starting {start}: {exc}") from exc
            if not np.isfinite(loss):
                raise TrainingError(f"loss became {loss} at epoch {epoch}, batch starting {start}")
            opt.step(params.tensors, grads)
            n = batch.inputs.shape[0]
            total += loss * n
            rows += n
        epoch_loss = total / rows
        losses.append(epoch_loss)
        opt.lr *= config.lr_decay
        log.debug("epoch %d loss %.4f", epoch + 1, epoch_loss)
        if on_epoch is not None:
            on_epoch(epoch + 1, epoch_loss)
    return TrainResult(params, losses)
