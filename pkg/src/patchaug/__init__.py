"""Patch augmentation for image classifiers, with an FGSM robustness harness.

The core idea: copy a random rectangle out of one training image into
another and mix their labels by the fraction of pixels the patch covers.
"""

__version__ = "0.1.0"

from .attack import AttackConfig, evaluate, fgsm_attack, fgsm_attack_batch
from .augment import (
    AugmentConfig,
    LabeledExample,
    PatchMode,
    PatchRect,
    augment_example,
    compute_lambda,
    extract_patch,
    mix_labels,
    mixup_example,
    place_patch,
    sample_patch_rect,
)
from .dataset import (
    Dataset,
    export_png,
    import_png,
    load_cifar10,
    load_cifar100,
    make_synthetic,
    one_hot,
    read_augmented,
    write_augmented,
)
from .errors import (
    ChannelMismatchError,
    CheckpointError,
    CheckpointMismatchError,
    ChecksumError,
    ConfigError,
    DimMismatchError,
    EmptyDatasetError,
    FormatVersionError,
    InvalidAreaError,
    LabelRangeError,
    LambdaRangeError,
    LengthMismatchError,
    MalformedMetricsError,
    OutOfBoundsError,
    PatchAugError,
    TruncatedRecordError,
)
from .model import (
    ModelParams,
    TrainConfig,
    TrainResult,
    cross_entropy,
    forward,
    forward_batch,
    grad_input,
    grad_input_batch,
    grad_params,
    init_params,
    load_checkpoint,
    lr_for_epoch,
    read_metrics,
    save_checkpoint,
    train,
    write_metrics,
)
from .pipeline import (
    Batch,
    EpochPlan,
    augment_batch,
    augment_stream,
    epoch_batches,
    mixup_batch,
    mixup_stream,
    new_epoch,
)
from .rng import RandomStream

__all__ = [
    "AttackConfig",
    "AugmentConfig",
    "Batch",
    "ChannelMismatchError",
    "CheckpointError",
    "CheckpointMismatchError",
    "ChecksumError",
    "ConfigError",
    "Dataset",
    "DimMismatchError",
    "EmptyDatasetError",
    "EpochPlan",
    "FormatVersionError",
    "InvalidAreaError",
    "LabelRangeError",
    "LabeledExample",
    "LambdaRangeError",
    "LengthMismatchError",
    "MalformedMetricsError",
    "ModelParams",
    "OutOfBoundsError",
    "PatchAugError",
    "PatchMode",
    "PatchRect",
    "RandomStream",
    "TrainConfig",
    "TrainResult",
    "TruncatedRecordError",
    "augment_batch",
    "augment_example",
    "augment_stream",
    "compute_lambda",
    "cross_entropy",
    "epoch_batches",
    "evaluate",
    "export_png",
    "extract_patch",
    "fgsm_attack",
    "fgsm_attack_batch",
    "forward",
    "forward_batch",
    "grad_input",
    "grad_input_batch",
    "grad_params",
    "import_png",
    "init_params",
    "load_cifar10",
    "load_cifar100",
    "load_checkpoint",
    "lr_for_epoch",
    "make_synthetic",
    "mix_labels",
    "mixup_batch",
    "mixup_example",
    "mixup_stream",
    "new_epoch",
    "one_hot",
    "place_patch",
    "read_augmented",
    "read_metrics",
    "sample_patch_rect",
    "save_checkpoint",
    "train",
    "write_augmented",
    "write_metrics",
]
