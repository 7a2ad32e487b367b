"""Desk-scale differentiable classifiers.

Two architectures stand in for full-size convnets, which this package does
not attempt to train: plain softmax regression ("linear", which admits
closed-form gradient oracles and convexity arguments) and a one-hidden-layer
rectified network ("mlp"). All math runs in double precision; gradients are
analytic and are checked against finite differences in the test suite.

Training is plain SGD on categorical cross entropy over soft labels, with a
step-down learning-rate schedule expressed as fractions of the total epoch
count so the same shape applies at any scale.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment import AugmentConfig
from .dataset import Dataset
from .errors import (
    CheckpointError,
    ConfigError,
    DimMismatchError,
    LengthMismatchError,
    MalformedMetricsError,
)
from .pipeline import augment_batch, augment_stream, epoch_batches, mixup_batch, mixup_stream, new_epoch
from .rng import DOMAIN_INIT, RandomStream

PRED_FLOOR = 1e-12  # probabilities are floored here before log

CKPT_MAGIC = b"PCKPT1"
_HEADER_END = b"---"

# (epoch fraction, multiplier) pairs; the multiplier compounds once the
# epoch index reaches fraction * total_epochs.
DEFAULT_LR_SCHEDULE = ((0.5, 0.1), (0.7, 0.1), (0.9, 0.1), (0.95, 0.5))


@dataclass
class ModelParams:
    """Weights of one classifier; ``hidden == 0`` means the linear model."""

    arch: str  # "linear" or "mlp"
    weights: list  # list of float64 matrices
    biases: list  # list of float64 vectors
    input_shape: tuple[int, int, int]  # (H, W, C)
    num_classes: int
    hidden: int = 0

    @property
    def input_dim(self) -> int:
        h, w, c = self.input_shape
        return h * w * c


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int = 32
    base_lr: float = 1e-3
    lr_schedule: tuple = DEFAULT_LR_SCHEDULE
    seed: int = 0
    arch: str = "linear"
    hidden: int = 256
    shuffle: bool = True
    augment: AugmentConfig | None = None
    mixup_alpha: float | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.base_lr < 0:
            raise ConfigError(f"base_lr must be >= 0, got {self.base_lr}")
        if self.arch not in ("linear", "mlp"):
            raise ConfigError(f"unknown architecture {self.arch!r}")
        if self.augment is not None and self.mixup_alpha is not None:
            raise ConfigError("augment and mixup_alpha are mutually exclusive")
        fracs = [f for f, _ in self.lr_schedule]
        if any(not 0.0 <= f <= 1.0 for f in fracs) or fracs != sorted(fracs):
            raise ConfigError(f"schedule fractions must increase within [0, 1]: {fracs}")


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_accuracy: float
    test_loss: float | None = None
    test_accuracy: float | None = None


@dataclass
class TrainResult:
    params: ModelParams
    metrics: list


def init_params(
    arch: str,
    input_shape: tuple[int, int, int],
    num_classes: int,
    seed: int = 0,
    hidden: int = 256,
) -> ModelParams:
    """Fresh parameters; linear starts at zero, the MLP at scaled normals."""
    h, w, c = input_shape
    d = h * w * c
    if arch == "linear":
        return ModelParams(
            arch="linear",
            weights=[np.zeros((d, num_classes))],
            biases=[np.zeros(num_classes)],
            input_shape=(h, w, c),
            num_classes=num_classes,
        )
    if arch == "mlp":
        gen = RandomStream(seed).child(DOMAIN_INIT)
        w1 = gen.normal(0.0, np.sqrt(2.0 / d), size=(d, hidden))
        w2 = gen.normal(0.0, np.sqrt(1.0 / hidden), size=(hidden, num_classes))
        return ModelParams(
            arch="mlp",
            weights=[w1, w2],
            biases=[np.zeros(hidden), np.zeros(num_classes)],
            input_shape=(h, w, c),
            num_classes=num_classes,
            hidden=hidden,
        )
    raise ConfigError(f"unknown architecture {arch!r}")


def _flatten(images: np.ndarray) -> np.ndarray:
    x = np.asarray(images, dtype=np.float64)
    if x.ndim == 3:
        x = x[None]
    return x.reshape(x.shape[0], -1)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward_cached(params: ModelParams, x: np.ndarray):
    """Returns (probs, cache) for a flattened batch x of shape (B, D)."""
    if params.arch == "linear":
        probs = _softmax(x @ params.weights[0] + params.biases[0])
        return probs, (x,)
    z1 = x @ params.weights[0] + params.biases[0]
    a1 = np.maximum(z1, 0.0)
    probs = _softmax(a1 @ params.weights[1] + params.biases[1])
    return probs, (x, z1, a1)


def forward_batch(params: ModelParams, images: np.ndarray) -> np.ndarray:
    """Class probabilities for a batch of images, shape (B, K)."""
    x = _flatten(images)
    if x.shape[1] != params.input_dim:
        raise DimMismatchError(f"input dim {x.shape[1]} != model dim {params.input_dim}")
    probs, _ = _forward_cached(params, x)
    return probs


def forward(params: ModelParams, image: np.ndarray) -> np.ndarray:
    """Class probabilities for a single image."""
    return forward_batch(params, image[None] if image.ndim == 3 else image)[0]


def cross_entropy(pred: np.ndarray, target: np.ndarray) -> float:
    """-sum(target * log(pred)), with pred floored at 1e-12 before the log."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise LengthMismatchError(f"lengths differ: {pred.shape} vs {target.shape}")
    return float(-(target * np.log(np.maximum(pred, PRED_FLOOR))).sum())


def _batch_loss(probs: np.ndarray, targets: np.ndarray) -> float:
    per = -(targets * np.log(np.maximum(probs, PRED_FLOOR))).sum(axis=1)
    return float(per.mean())


def grad_params(params: ModelParams, images: np.ndarray, labels: np.ndarray):
    """Analytic gradients of mean cross entropy w.r.t. weights and biases.

    Returns (grad_weights, grad_biases) shaped like ``params.weights`` and
    ``params.biases``.
    """
    x = _flatten(images)
    y = np.asarray(labels, dtype=np.float64)
    if y.ndim == 1:
        y = y[None]
    probs, cache = _forward_cached(params, x)
    b = x.shape[0]
    dlogits = (probs - y) / b
    if params.arch == "linear":
        return [x.T @ dlogits], [dlogits.sum(axis=0)]
    _, z1, a1 = cache
    gw2 = a1.T @ dlogits
    gb2 = dlogits.sum(axis=0)
    da1 = dlogits @ params.weights[1].T
    dz1 = da1 * (z1 > 0.0)
    return [x.T @ dz1, gw2], [dz1.sum(axis=0), gb2]


def grad_input_batch(params: ModelParams, images: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-example gradient of that example's own cross entropy w.r.t. its pixels."""
    x = _flatten(images)
    y = np.asarray(labels, dtype=np.float64)
    if y.ndim == 1:
        y = y[None]
    probs, cache = _forward_cached(params, x)
    dlogits = probs - y
    if params.arch == "linear":
        dx = dlogits @ params.weights[0].T
    else:
        _, z1, _ = cache
        dz1 = (dlogits @ params.weights[1].T) * (z1 > 0.0)
        dx = dz1 @ params.weights[0].T
    return dx.reshape((x.shape[0],) + params.input_shape)


def grad_input(params: ModelParams, image: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Gradient of the loss w.r.t. the input pixels, parameters held fixed."""
    return grad_input_batch(params, image[None], np.asarray(target)[None])[0]


def lr_for_epoch(config: TrainConfig, epoch: int) -> float:
    lr = config.base_lr
    for frac, mult in config.lr_schedule:
        if epoch >= int(np.floor(frac * config.epochs + 0.5)):
            lr *= mult
    return lr


def evaluate_loss_acc(params: ModelParams, dataset: Dataset) -> tuple[float, float]:
    """Mean cross entropy and argmax accuracy (ties break to lowest index)."""
    probs = forward_batch(params, dataset.images)
    loss = _batch_loss(probs, dataset.labels)
    acc = float(np.mean(np.argmax(probs, axis=1) == np.argmax(dataset.labels, axis=1)))
    return loss, acc


def train(dataset: Dataset, config: TrainConfig, eval_dataset: Dataset | None = None) -> TrainResult:
    """SGD over scheduled epochs; deterministic given (dataset, config).

    Per epoch: plan a (seed, epoch)-keyed permutation, run probability-gated
    patch augmentation or mixup on each batch if configured, take one SGD
    step per batch, and record running train loss/accuracy plus optional
    full-test metrics.
    """
    params = init_params(
        config.arch, dataset.image_shape, dataset.num_classes,
        seed=config.seed, hidden=config.hidden,
    )
    n = len(dataset)
    metrics = []
    for epoch in range(config.epochs):
        lr = lr_for_epoch(config, epoch)
        plan = new_epoch(dataset, config.batch_size, epoch, config.seed, shuffle=config.shuffle)
        astream = augment_stream(config.seed, epoch) if config.augment else None
        mstream = mixup_stream(config.seed, epoch) if config.mixup_alpha else None
        loss_sum = 0.0
        correct = 0.0
        for batch in epoch_batches(dataset, plan):
            if astream is not None:
                batch = augment_batch(batch, dataset, config.augment, astream)
            elif mstream is not None:
                batch = mixup_batch(batch, config.mixup_alpha, mstream)
            x = _flatten(batch.images)
            probs, _ = _forward_cached(params, x)
            loss_sum += _batch_loss(probs, batch.labels) * len(batch)
            correct += float(
                np.sum(np.argmax(probs, axis=1) == np.argmax(batch.labels, axis=1))
            )
            gw, gb = grad_params(params, batch.images, batch.labels)
            for w, g in zip(params.weights, gw):
                w -= lr * g
            for b_, g in zip(params.biases, gb):
                b_ -= lr * g
        row = EpochMetrics(
            epoch=epoch, train_loss=loss_sum / n, train_accuracy=correct / n
        )
        if eval_dataset is not None and len(eval_dataset) > 0:
            row.test_loss, row.test_accuracy = evaluate_loss_acc(params, eval_dataset)
        metrics.append(row)
    return TrainResult(params=params, metrics=metrics)


def save_checkpoint(params: ModelParams, path, seed: int = 0) -> None:
    """Text header (architecture, dims, seed) + little-endian float64 blobs."""
    h, w, c = params.input_shape
    lines = [
        f"arch={params.arch}",
        f"height={h}",
        f"width={w}",
        f"channels={c}",
        f"num_classes={params.num_classes}",
        f"hidden={params.hidden}",
        f"seed={seed}",
    ]
    header = b"\n".join(
        [CKPT_MAGIC] + [line.encode("utf-8") for line in lines] + [_HEADER_END, b""]
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for arr in params.weights + params.biases:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    """Read a checkpoint back; returns the params and the raw header fields."""
    with open(path, "rb") as fh:
        magic = fh.readline().rstrip(b"\n")
        if magic != CKPT_MAGIC:
            raise CheckpointError(f"bad magic {magic!r}, expected {CKPT_MAGIC!r}")
        fields: dict[str, str] = {}
        while True:
            line = fh.readline()
            if not line:
                raise CheckpointError("header ended before terminator")
            line = line.rstrip(b"\n")
            if line == _HEADER_END:
                break
            key, sep, value = line.decode("utf-8").partition("=")
            if not sep:
                raise CheckpointError(f"malformed header line {line!r}")
            fields[key] = value
        try:
            arch = fields["arch"]
            shape = (int(fields["height"]), int(fields["width"]), int(fields["channels"]))
            k = int(fields["num_classes"])
            hidden = int(fields["hidden"])
        except (KeyError, ValueError) as exc:
            raise CheckpointError(f"incomplete header: {exc}") from exc
        d = shape[0] * shape[1] * shape[2]
        if arch == "linear":
            shapes = [(d, k), (k,)]
        elif arch == "mlp":
            shapes = [(d, hidden), (hidden, k), (hidden,), (k,)]
        else:
            raise CheckpointError(f"unknown architecture {arch!r}")
        arrays = []
        for s in shapes:
            count = int(np.prod(s))
            blob = fh.read(count * 8)
            if len(blob) != count * 8:
                raise CheckpointError("weight payload shorter than header promises")
            arrays.append(np.frombuffer(blob, dtype="<f8").reshape(s).copy())
    n_w = 1 if arch == "linear" else 2
    params = ModelParams(
        arch=arch,
        weights=arrays[:n_w],
        biases=arrays[n_w:],
        input_shape=shape,
        num_classes=k,
        hidden=hidden,
    )
    return params, fields


def write_metrics(path, rows: list, meta: dict | None = None) -> None:
    """Metrics CSV: '#'-prefixed metadata lines, then epoch,split,loss,accuracy."""
    out = []
    for key, value in (meta or {}).items():
        out.append(f"# {key}={value}")
    out.append("epoch,split,loss,accuracy")
    for row in rows:
        out.append(f"{row.epoch},train,{row.train_loss!r},{row.train_accuracy!r}")
        if row.test_loss is not None:
            out.append(f"{row.epoch},test,{row.test_loss!r},{row.test_accuracy!r}")
    Path(path).write_text("\n".join(out) + "\n")


def read_metrics(path) -> tuple[dict, list[dict]]:
    """Parse a metrics CSV back into (meta, rows)."""
    meta: dict[str, str] = {}
    rows: list[dict] = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise MalformedMetricsError(f"cannot read {path}: {exc}") from exc
    saw_header = False
    for line in lines:
        if not line.strip():
            continue
        if line.startswith("#"):
            key, sep, value = line.lstrip("# ").partition("=")
            if sep:
                meta[key] = value
            continue
        if not saw_header:
            if line.strip() != "epoch,split,loss,accuracy":
                raise MalformedMetricsError(f"{path}: unexpected header {line!r}")
            saw_header = True
            continue
        parts = line.split(",")
        if len(parts) != 4 or parts[1] not in ("train", "test"):
            raise MalformedMetricsError(f"{path}: malformed row {line!r}")
        try:
            rows.append(
                {
                    "epoch": int(parts[0]),
                    "split": parts[1],
                    "loss": float(parts[2]),
                    "accuracy": float(parts[3]),
                }
            )
        except ValueError as exc:
            raise MalformedMetricsError(f"{path}: malformed row {line!r}") from exc
    if not saw_header:
        raise MalformedMetricsError(f"{path}: no header row found")
    return meta, rows
