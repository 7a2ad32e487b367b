"""Epoch-wise batch generation with probability-gated augmentation.

Guarantees:

* exactly-once -- each dataset index appears exactly once per epoch,
  whatever the augmentation probability (augmentation replaces an example's
  content, never its membership);
* full reproducibility -- the epoch's output is a pure function of
  (dataset, batch_size, config, seed, epoch). Per-example randomness comes
  from counter-addressed substreams keyed on (seed, epoch, example index),
  so batches may be produced by any number of workers in any order and
  still match a serial run bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .augment import AugmentConfig, LabeledExample, augment_example, mixup_example
from .dataset import Dataset
from .errors import ConfigError, EmptyDatasetError
from .rng import DOMAIN_AUGMENT, DOMAIN_MIXUP, DOMAIN_SHUFFLE, RandomStream


@dataclass
class EpochPlan:
    """Order and slicing of one epoch."""

    permutation: np.ndarray  # every dataset index exactly once
    batch_size: int
    seed: int
    epoch: int

    @property
    def num_batches(self) -> int:
        return math.ceil(len(self.permutation) / self.batch_size)


@dataclass
class Batch:
    """A slice of an epoch; ``indices`` are original dataset indices."""

    images: np.ndarray  # (B, H, W, C)
    labels: np.ndarray  # (B, K) float64
    indices: np.ndarray  # (B,)
    epoch_index: int
    batch_index: int

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def examples(self) -> list[LabeledExample]:
        return [LabeledExample(self.images[i], self.labels[i]) for i in range(len(self))]


def new_epoch(
    dataset: Dataset, batch_size: int, epoch: int, seed: int, shuffle: bool = True
) -> EpochPlan:
    """Plan one epoch: a permutation of all indices, split into batches.

    The permutation is a pure function of (seed, epoch). With
    ``shuffle=False`` the identity order is used instead.
    """
    n = len(dataset)
    if n == 0:
        raise EmptyDatasetError("cannot plan an epoch over an empty dataset")
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    if shuffle:
        perm = RandomStream(seed).child(DOMAIN_SHUFFLE, epoch).permutation(n)
    else:
        perm = np.arange(n)
    return EpochPlan(permutation=perm, batch_size=batch_size, seed=seed, epoch=epoch)


def epoch_batches(dataset: Dataset, plan: EpochPlan) -> Iterator[Batch]:
    """Yield the epoch's batches in index order; the last may be short."""
    for b in range(plan.num_batches):
        idx = plan.permutation[b * plan.batch_size : (b + 1) * plan.batch_size]
        yield Batch(
            images=dataset.images[idx],
            labels=dataset.labels[idx].astype(np.float64, copy=True),
            indices=np.asarray(idx, dtype=np.int64),
            epoch_index=plan.epoch,
            batch_index=b,
        )


def augment_stream(seed: int, epoch: int) -> RandomStream:
    """Parent stream for one epoch's per-example augmentation substreams."""
    return RandomStream(seed).child(DOMAIN_AUGMENT, epoch)


def mixup_stream(seed: int, epoch: int) -> RandomStream:
    """Parent stream for one epoch's per-batch mixup draws."""
    return RandomStream(seed).child(DOMAIN_MIXUP, epoch)


def augment_batch(
    batch: Batch, trainset: Dataset, config: AugmentConfig, rng: RandomStream
) -> Batch:
    """Independently augment each example with probability ``config.probability``.

    Per example, a substream is derived from ``rng`` keyed by the example's
    original dataset index, and consumed in this order: the gate draw
    (augment iff gate < probability), the donor index (uniform over the
    full training set, so the donor may share the host's class or even be
    the host itself), then the draws of ``augment_example``. Non-selected
    examples pass through untouched; order is preserved.
    """
    images = batch.images.copy()
    labels = batch.labels.copy()
    for k in range(len(batch)):
        sub = rng.child(int(batch.indices[k]))
        if sub.uniform() < config.probability:
            donor = trainset[sub.integers(0, len(trainset))]
            host = LabeledExample(batch.images[k], batch.labels[k])
            out = augment_example(host, donor, sub, config)
            images[k] = out.image
            labels[k] = out.label
    return Batch(
        images=images,
        labels=labels,
        indices=batch.indices.copy(),
        epoch_index=batch.epoch_index,
        batch_index=batch.batch_index,
    )


def mixup_batch(batch: Batch, alpha: float, rng: RandomStream) -> Batch:
    """Blend the batch with a permutation of itself.

    One lambda ~ Beta(alpha, alpha) is drawn per batch from the substream
    keyed by the batch index, followed by the pairing permutation.
    """
    sub = rng.child(batch.batch_index)
    lam = sub.beta(alpha, alpha)
    perm = sub.permutation(len(batch))
    images = batch.images.copy()
    labels = batch.labels.copy()
    for k in range(len(batch)):
        a = LabeledExample(batch.images[k], batch.labels[k])
        b = LabeledExample(batch.images[perm[k]], batch.labels[perm[k]])
        out = mixup_example(a, b, lam)
        images[k] = out.image
        labels[k] = out.label
    return Batch(
        images=images,
        labels=labels,
        indices=batch.indices.copy(),
        epoch_index=batch.epoch_index,
        batch_index=batch.batch_index,
    )
