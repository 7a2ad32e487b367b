"""Dataset ingestion and export.

Binary dataset formats handled here:

* CIFAR-10 binary batches: records of 3073 bytes = 1 label byte followed by
  3072 pixel bytes, channel-planar (1024 R, 1024 G, 1024 B), row-major
  within each plane.
* CIFAR-100 binary: records of 3074 bytes = coarse label byte, fine label
  byte, then the same 3072 pixel bytes. The fine label is used.
* "PAUG1" augmented-dataset container: text header plus raw little-endian
  pixel (float32) and label (float64) blobs, CRC-checked, bit-exact on
  round trip.

Pixels are normalized to [0, 1] at load (byte / 255); labels are one-hot
encoded in double precision.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image as PILImage

from .augment import AugmentConfig, LabeledExample, PatchMode
from .errors import (
    ChecksumError,
    FormatVersionError,
    LabelRangeError,
    TruncatedRecordError,
)
from .rng import DOMAIN_DATA, RandomStream

CIFAR_SIDE = 32
CIFAR_CHANNELS = 3
CIFAR10_RECORD = 1 + CIFAR_SIDE * CIFAR_SIDE * CIFAR_CHANNELS  # 3073
CIFAR100_RECORD = 2 + CIFAR_SIDE * CIFAR_SIDE * CIFAR_CHANNELS  # 3074

PAUG_MAGIC = b"PAUG1"
_HEADER_END = b"---"


@dataclass
class Dataset:
    """An ordered, immutable-by-convention set of labeled images.

    ``images`` is (N, H, W, C) float32 in [0, 1]; ``labels`` is (N, K)
    float64 with rows summing to 1.
    """

    images: np.ndarray
    labels: np.ndarray
    num_classes: int
    name: str = ""

    def __post_init__(self):
        if self.images.ndim != 4:
            raise ValueError(f"images must be (N, H, W, C), got {self.images.shape}")
        if self.labels.ndim != 2 or self.labels.shape[0] != self.images.shape[0]:
            raise ValueError(
                f"labels {self.labels.shape} do not match images {self.images.shape}"
            )
        if self.labels.shape[1] != self.num_classes:
            raise ValueError(
                f"labels have {self.labels.shape[1]} columns, expected {self.num_classes}"
            )

    def __len__(self) -> int:
        return self.images.shape[0]

    def __getitem__(self, i: int) -> LabeledExample:
        return LabeledExample(image=self.images[i], label=self.labels[i])

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            images=self.images[indices],
            labels=self.labels[indices],
            num_classes=self.num_classes,
            name=self.name,
        )

    def take(self, n: int) -> "Dataset":
        return self.subset(np.arange(min(n, len(self))))


def one_hot(index: int, k: int) -> np.ndarray:
    """Unit basis vector e_index of length k."""
    if not 0 <= index < k:
        raise LabelRangeError(f"class index {index} out of range for {k} classes")
    vec = np.zeros(k, dtype=np.float64)
    vec[index] = 1.0
    return vec


def _read_records(path, record_len: int) -> np.ndarray:
    buf = Path(path).read_bytes()
    n, rem = divmod(len(buf), record_len)
    if rem != 0:
        raise TruncatedRecordError(
            f"{path}: {len(buf)} bytes is not a multiple of the {record_len}-byte record"
        )
    return np.frombuffer(buf, dtype=np.uint8).reshape(n, record_len)


def _planar_to_images(pixel_bytes: np.ndarray) -> np.ndarray:
    n = pixel_bytes.shape[0]
    planes = pixel_bytes.reshape(n, CIFAR_CHANNELS, CIFAR_SIDE, CIFAR_SIDE)
    return (planes.transpose(0, 2, 3, 1).astype(np.float32)) / 255.0


def _load_cifar(paths: Sequence, record_len: int, label_col: int, num_classes: int,
                name: str) -> Dataset:
    images, labels = [], []
    for path in paths:
        rec = _read_records(path, record_len)
        if rec.shape[0] == 0:
            continue
        idx = rec[:, label_col].astype(np.int64)
        if idx.max(initial=0) >= num_classes:
            raise LabelRangeError(
                f"{path}: label byte {idx.max()} out of range for {num_classes} classes"
            )
        images.append(_planar_to_images(rec[:, record_len - 3072 :]))
        labels.append(np.eye(num_classes, dtype=np.float64)[idx])
    if images:
        all_images = np.concatenate(images)
        all_labels = np.concatenate(labels)
    else:
        all_images = np.zeros((0, CIFAR_SIDE, CIFAR_SIDE, CIFAR_CHANNELS), np.float32)
        all_labels = np.zeros((0, num_classes), np.float64)
    return Dataset(images=all_images, labels=all_labels, num_classes=num_classes, name=name)


def load_cifar10(paths: Sequence) -> Dataset:
    """Load CIFAR-10 binary batch files, in file order."""
    return _load_cifar(paths, CIFAR10_RECORD, label_col=0, num_classes=10, name="cifar10")


def load_cifar100(paths: Sequence) -> Dataset:
    """Load CIFAR-100 binary files, using the fine (second) label byte."""
    return _load_cifar(paths, CIFAR100_RECORD, label_col=1, num_classes=100, name="cifar100")


def _to_bytes(image: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(image * 255.0 + 0.5), 0, 255).astype(np.uint8)


def export_png(image: np.ndarray, path) -> None:
    """Write an image as an 8-bit PNG; pixel byte = round(value * 255)."""
    arr = _to_bytes(np.asarray(image))
    if arr.shape[2] == 1:
        pil = PILImage.fromarray(arr[:, :, 0], mode="L")
    else:
        pil = PILImage.fromarray(arr, mode="RGB")
    pil.save(path, format="PNG")


def import_png(path) -> np.ndarray:
    """Read a PNG back to a (H, W, C) float32 array in [0, 1]."""
    arr = np.asarray(PILImage.open(path))
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr.astype(np.float32) / 255.0


def _config_header_lines(config: AugmentConfig) -> list[str]:
    return [
        f"probability={config.probability!r}",
        f"mode={config.mode.value}",
        f"min_frac={config.min_frac!r}",
        f"max_frac={config.max_frac!r}",
        f"area_frac={config.area_frac!r}",
        f"seed={config.seed}",
    ]


def write_augmented(dataset: Dataset, path, config: AugmentConfig | None = None) -> None:
    """Write a dataset to a PAUG1 container.

    Images are stored as little-endian float32, labels as little-endian
    float64, both CRC-checked, so ``read_augmented`` recovers the dataset
    bit-exactly. The generator config, when given, is recorded in the
    header.
    """
    img = np.ascontiguousarray(dataset.images, dtype="<f4")
    lab = np.ascontiguousarray(dataset.labels, dtype="<f8")
    img_bytes = img.tobytes()
    lab_bytes = lab.tobytes()
    crc = zlib.crc32(lab_bytes, zlib.crc32(img_bytes))
    n, h, w, c = dataset.images.shape
    lines = [
        f"count={n}",
        f"height={h}",
        f"width={w}",
        f"channels={c}",
        f"num_classes={dataset.num_classes}",
        f"name={dataset.name}",
    ]
    if config is not None:
        lines.extend(_config_header_lines(config))
    lines.append(f"crc32={crc}")
    header = b"\n".join(
        [PAUG_MAGIC] + [line.encode("utf-8") for line in lines] + [_HEADER_END, b""]
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img_bytes)
        fh.write(lab_bytes)


def _parse_header(fh) -> dict[str, str]:
    magic = fh.readline().rstrip(b"\n")
    if magic != PAUG_MAGIC:
        raise FormatVersionError(f"bad magic {magic!r}, expected {PAUG_MAGIC!r}")
    fields: dict[str, str] = {}
    while True:
        line = fh.readline()
        if not line:
            raise FormatVersionError("header ended before terminator")
        line = line.rstrip(b"\n")
        if line == _HEADER_END:
            return fields
        key, sep, value = line.decode("utf-8").partition("=")
        if not sep:
            raise FormatVersionError(f"malformed header line {line!r}")
        fields[key] = value


def read_augmented(path) -> tuple[Dataset, AugmentConfig | None]:
    """Read a PAUG1 container back; returns the dataset and the stored config."""
    with open(path, "rb") as fh:
        fields = _parse_header(fh)
        try:
            n = int(fields["count"])
            h = int(fields["height"])
            w = int(fields["width"])
            c = int(fields["channels"])
            k = int(fields["num_classes"])
            crc_stored = int(fields["crc32"])
        except (KeyError, ValueError) as exc:
            raise FormatVersionError(f"incomplete header: {exc}") from exc
        img_bytes = fh.read(n * h * w * c * 4)
        lab_bytes = fh.read(n * k * 8)
        if len(img_bytes) != n * h * w * c * 4 or len(lab_bytes) != n * k * 8:
            raise FormatVersionError("payload shorter than header promises")
    crc = zlib.crc32(lab_bytes, zlib.crc32(img_bytes))
    if crc != crc_stored:
        raise ChecksumError(f"payload crc {crc} != stored {crc_stored}")
    images = np.frombuffer(img_bytes, dtype="<f4").reshape(n, h, w, c)
    labels = np.frombuffer(lab_bytes, dtype="<f8").reshape(n, k)
    dataset = Dataset(
        images=images.copy(),
        labels=labels.copy(),
        num_classes=k,
        name=fields.get("name", ""),
    )
    config = None
    if "probability" in fields:
        config = AugmentConfig(
            probability=float(fields["probability"]),
            mode=PatchMode(fields["mode"]),
            min_frac=float(fields["min_frac"]),
            max_frac=float(fields["max_frac"]),
            area_frac=float(fields["area_frac"]),
            seed=int(fields["seed"]),
        )
    return dataset, config


def make_synthetic(
    n: int,
    num_classes: int = 2,
    height: int = CIFAR_SIDE,
    width: int = CIFAR_SIDE,
    channels: int = CIFAR_CHANNELS,
    seed: int = 0,
    partition: int = 0,
    class_separation: float = 0.10,
    color_jitter: float = 0.08,
    pixel_noise: float = 0.18,
) -> Dataset:
    """Procedurally colored synthetic dataset.

    Class c gets a base color spaced around the hue circle plus a shared
    spatial gradient; each image adds a global per-channel shift (the main
    source of class overlap for linear models) and per-pixel Gaussian
    noise. Pixels are clipped to [0, 1] and quantized to the byte grid so
    the images behave exactly like decoded 8-bit data. Classes are assigned
    round-robin. ``partition`` separates otherwise-identical draws (use
    different values for train and test splits).
    """
    gen = RandomStream(seed).child(DOMAIN_DATA, partition).generator
    ii = np.linspace(0.0, 1.0, height)[:, None, None]
    jj = np.linspace(0.0, 1.0, width)[None, :, None]
    gradient = 0.12 * ii + 0.08 * jj  # shared structure, same for every class

    bases = np.empty((num_classes, channels), dtype=np.float64)
    for c in range(num_classes):
        theta = 2.0 * np.pi * c / max(num_classes, 1)
        phases = 2.0 * np.pi * np.arange(channels) / 3.0
        bases[c] = 0.5 + class_separation * np.cos(theta + phases)

    classes = np.arange(n, dtype=np.int64) % num_classes
    images = np.empty((n, height, width, channels), dtype=np.float32)
    shifts = gen.normal(0.0, color_jitter, size=(n, channels))
    for i in range(n):
        c = classes[i]
        img = bases[c][None, None, :] + gradient + shifts[i][None, None, :]
        img = img + gen.normal(0.0, pixel_noise, size=(height, width, channels))
        images[i] = np.clip(np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5), 0, 255) / 255.0
    labels = np.eye(num_classes, dtype=np.float64)[classes]
    return Dataset(images=images, labels=labels, num_classes=num_classes, name="synthetic")


def write_cifar10_archive(dataset: Dataset, path) -> None:
    """Write a dataset of 32x32 RGB images as a CIFAR-10 binary batch file.

    Labels are taken as the argmax of each row, so this is meant for
    one-hot datasets with at most 10 classes.
    """
    if dataset.image_shape != (CIFAR_SIDE, CIFAR_SIDE, CIFAR_CHANNELS):
        raise ValueError(f"CIFAR-10 records need 32x32x3 images, got {dataset.image_shape}")
    if dataset.num_classes > 10:
        raise LabelRangeError(f"{dataset.num_classes} classes do not fit CIFAR-10 labels")
    n = len(dataset)
    rec = np.empty((n, CIFAR10_RECORD), dtype=np.uint8)
    rec[:, 0] = np.argmax(dataset.labels, axis=1).astype(np.uint8)
    planar = _to_bytes(dataset.images).transpose(0, 3, 1, 2)  # (N, C, H, W)
    rec[:, 1:] = planar.reshape(n, -1)
    Path(path).write_bytes(rec.tobytes())
