"""Fast Gradient Sign Method attack and evaluation.

The attack is the classic one-step, max-norm-bounded perturbation

    adv = x + epsilon * sign(dJ/dx)

computed white-box against the model's own input gradient at the true
label. ``sign(0) = 0``, so unperturbed coordinates stay put, and the
perturbation never exceeds ``epsilon`` in any pixel. By default adversarial
pixels are clipped back to the valid [0, 1] range; clipping can only shrink
a pixel's perturbation, never grow it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import ConfigError, DimMismatchError, EmptyDatasetError
from .model import ModelParams, forward_batch, grad_input_batch


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float
    clip: bool = True
    n_examples: int = 1000

    def __post_init__(self):
        if self.epsilon < 0:
            raise ConfigError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.n_examples < 1:
            raise ConfigError(f"n_examples must be >= 1, got {self.n_examples}")


def fgsm_attack_batch(
    params: ModelParams,
    images: np.ndarray,
    labels: np.ndarray,
    attack: AttackConfig,
) -> np.ndarray:
    """Perturb a batch of images, each against its own label. Returns float64."""
    x = np.asarray(images, dtype=np.float64)
    grads = grad_input_batch(params, x, labels)
    adv = x + attack.epsilon * np.sign(grads)
    if attack.clip:
        adv = np.clip(adv, 0.0, 1.0)
    return adv


def fgsm_attack(
    params: ModelParams,
    image: np.ndarray,
    target: np.ndarray,
    attack: AttackConfig,
) -> np.ndarray:
    """Adversarial version of one image; see the module docstring."""
    if image.shape != tuple(params.input_shape):
        raise DimMismatchError(f"image shape {image.shape} != model {params.input_shape}")
    return fgsm_attack_batch(params, image[None], np.asarray(target)[None], attack)[0]


def evaluate(params: ModelParams, dataset: Dataset, attack: AttackConfig | None = None) -> float:
    """Argmax accuracy over the dataset, optionally after an FGSM pass.

    With an attack, each image is first replaced by its adversarial version
    computed from the image's true label. Correctness means argmax of the
    prediction equals argmax of the true label (ties break to the lowest
    index, as numpy's argmax does). Callers choose the evaluation subset;
    this function uses every example it is given.
    """
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot evaluate on an empty dataset")
    images = np.asarray(dataset.images, dtype=np.float64)
    if attack is not None:
        images = fgsm_attack_batch(params, images, dataset.labels, attack)
    preds = np.argmax(forward_batch(params, images), axis=1)
    truth = np.argmax(dataset.labels, axis=1)
    return float(np.mean(preds == truth))
