"""Compact convolutional depth-image classifier.

Fixed architecture: conv3x3x16 + ReLU + 2x2 maxpool, conv3x3x32 + ReLU +
2x2 maxpool, conv3x3x64 + ReLU + global average pool -> 64 features ->
affine -> softmax. Exposes class probabilities, penultimate features, and
last-layer gradient embeddings for the selection strategies.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F_t
from torch import nn

from .dataset import Pools, SampleGroup
from .recon import DepthImage

FEATURE_DIM = 64
CHECKPOINT_MAGIC = b"SPCM"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    width: int
    height: int
    class_count: int
    norm_range: tuple[float, float] = (0.0, 1.0)

    @property
    def feature_dim(self) -> int:
        return FEATURE_DIM


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    momentum: float = 0.9
    batch_size: int = 64
    epochs: int = 60
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


def cosine_lr(base_lr: float, epoch: int, total_epochs: int) -> float:
    """Cosine-annealed learning rate; base_lr at epoch 0."""
    if total_epochs <= 1:
        return base_lr
    return 0.5 * base_lr * (1.0 + math.cos(math.pi * epoch / total_epochs))


class CompactCNN(nn.Module):
    def __init__(self, class_count: int):
        super().__init__()
        self.conv1 = nn.Conv2d(1, 16, 3, padding=1)
        self.conv2 = nn.Conv2d(16, 32, 3, padding=1)
        self.conv3 = nn.Conv2d(32, FEATURE_DIM, 3, padding=1)
        self.fc = nn.Linear(FEATURE_DIM, class_count)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        x = F_t.max_pool2d(F_t.relu(self.conv1(x)), 2)
        x = F_t.max_pool2d(F_t.relu(self.conv2(x)), 2)
        x = F_t.relu(self.conv3(x))
        return x.mean(dim=(2, 3))  # global average pool

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc(self.features(x))


def _he_init(net: CompactCNN, seed: int) -> None:
    gen = torch.Generator().manual_seed(seed)
    for m in net.modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            fan_in = m.weight[0].numel()
            std = math.sqrt(2.0 / fan_in)
            with torch.no_grad():
                m.weight.copy_(torch.randn(m.weight.shape, generator=gen) * std)
                m.bias.zero_()


@dataclass
class Model:
    """Trained network plus the normalization needed to consume depth images."""
    net: CompactCNN
    config: ModelConfig
    epoch_losses: list[float] = field(default_factory=list, repr=False)

    def normalize(self, image) -> np.ndarray:
        depth = image.depth_m if isinstance(image, DepthImage) else np.asarray(image)
        if depth.shape != (self.config.height, self.config.width):
            raise ValueError(f"image shape {depth.shape} does not match model "
                             f"({self.config.height}, {self.config.width})")
        lo, hi = self.config.norm_range
        scale = (hi - lo) or 1.0
        return np.clip((depth - lo) / scale, 0.0, 1.0)


def _to_batch(model: Model, images) -> torch.Tensor:
    arr = np.stack([model.normalize(im) for im in images]).astype(np.float32)
    return torch.from_numpy(arr).unsqueeze(1)


def group_training_images(groups) -> tuple[list, list[int]]:
    """Every labeled group contributes its observed image and all variants."""
    images, labels = [], []
    for g in groups:
        if g.label is None:
            raise ValueError(f"group {g.id!r} has no label")
        for im in g.images:
            images.append(im)
            labels.append(g.label)
    return images, labels


def train(labeled: dict[str, SampleGroup] | list[SampleGroup], cfg: TrainConfig,
          model_config: ModelConfig) -> Model:
    """SGD + momentum with cosine annealing, fresh He init each call."""
    torch.set_num_threads(1)  # faster than threading for this model size; deterministic
    groups = list(labeled.values()) if isinstance(labeled, dict) else list(labeled)
    if not groups:
        raise ValueError("empty labeled set")
    groups.sort(key=lambda g: g.id)

    net = CompactCNN(model_config.class_count)
    _he_init(net, cfg.seed)
    model = Model(net=net, config=model_config)

    images, labels = group_training_images(groups)
    x = _to_batch(model, images)
    y = torch.tensor(labels, dtype=torch.long)
    n = len(images)

    opt = torch.optim.SGD(net.parameters(), lr=cfg.learning_rate, momentum=cfg.momentum)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(1,)))
    net.train()
    epoch_losses: list[float] = []
    for epoch in range(cfg.epochs):
        lr = cosine_lr(cfg.learning_rate, epoch, cfg.epochs)
        for pg in opt.param_groups:
            pg["lr"] = lr
        order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = torch.from_numpy(order[start:start + cfg.batch_size].copy())
            opt.zero_grad()
            logits = net(x[idx])
            loss = F_t.cross_entropy(logits, y[idx])
            loss.backward()
            opt.step()
            total += loss.detach().item() * len(idx)
        epoch_losses.append(total / n)
    net.eval()
    model.epoch_losses = epoch_losses
    return model


def predictions_on_simplex(p: np.ndarray, tol: float = 1e-6) -> bool:
    return bool(np.all(p >= 0) and abs(float(p.sum()) - 1.0) <= tol)


@torch.no_grad()
def predict_proba(model: Model, image) -> np.ndarray:
    """Softmax class probabilities for one depth image."""
    logits = model.net(_to_batch(model, [image]))
    return F_t.softmax(logits, dim=1)[0].numpy().astype(np.float64)


@torch.no_grad()
def predict_proba_batch(model: Model, images) -> np.ndarray:
    if not len(images):
        return np.zeros((0, model.config.class_count))
    logits = model.net(_to_batch(model, images))
    return F_t.softmax(logits, dim=1).numpy().astype(np.float64)


@torch.no_grad()
def features(model: Model, image) -> np.ndarray:
    """Penultimate (global-average-pool) features, length 64."""
    return model.net.features(_to_batch(model, [image]))[0].numpy().astype(np.float64)


@torch.no_grad()
def features_batch(model: Model, images) -> np.ndarray:
    if not len(images):
        return np.zeros((0, FEATURE_DIM))
    return model.net.features(_to_batch(model, images)).numpy().astype(np.float64)


def grad_embedding(model: Model, image) -> np.ndarray:
    """Last-layer cross-entropy gradient at the pseudo-label, flattened.

    Closed form (p - onehot(argmax p)) outer features; length C * 64.
    """
    p = predict_proba(model, image)
    f = features(model, image)
    y_hat = int(np.argmax(p))
    delta = p.copy()
    delta[y_hat] -= 1.0
    return np.outer(delta, f).ravel()


def group_mean_prediction(model: Model, group: SampleGroup) -> np.ndarray:
    """Arithmetic mean of the M+1 member probability vectors."""
    return predict_proba_batch(model, group.images).mean(axis=0)


def save_checkpoint(path, model: Model) -> None:
    """Versioned binary: magic, header, float32 LE parameters in layer order."""
    cfg = model.config
    params = [p.detach().numpy().astype("<f4") for p in model.net.parameters()]
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<IIIIff", CHECKPOINT_VERSION, cfg.width, cfg.height,
                            cfg.class_count, cfg.norm_range[0], cfg.norm_range[1]))
        for p in params:
            f.write(p.tobytes())


def load_checkpoint(path) -> Model:
    with open(path, "rb") as f:
        if f.read(4) != CHECKPOINT_MAGIC:
            raise ValueError("not a model checkpoint")
        version, w, h, c, lo, hi = struct.unpack("<IIIIff", f.read(24))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        cfg = ModelConfig(width=w, height=h, class_count=c, norm_range=(lo, hi))
        net = CompactCNN(c)
        for p in net.parameters():
            raw = f.read(4 * p.numel())
            arr = np.frombuffer(raw, dtype="<f4").reshape(tuple(p.shape))
            with torch.no_grad():
                p.copy_(torch.from_numpy(arr.copy()))
    net.eval()
    return Model(net=net, config=cfg)
