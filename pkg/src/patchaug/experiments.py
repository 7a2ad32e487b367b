"""Experiment orchestration shared by the service endpoints and the CLI.

Each ``run_*`` function performs one complete experiment step against the
local filesystem and returns a small result record. All steps are
deterministic for a fixed request (seed included) and idempotent on their
outputs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attack import AttackConfig, evaluate
from .augment import AugmentConfig, PatchMode
from .dataset import (
    Dataset,
    export_png,
    load_cifar10,
    load_cifar100,
    make_synthetic,
    write_augmented,
)
from .errors import CheckpointMismatchError, ConfigError, MalformedMetricsError
from .model import (
    TrainConfig,
    load_checkpoint,
    read_metrics,
    save_checkpoint,
    train,
    write_metrics,
)
from .pipeline import augment_batch, augment_stream, epoch_batches, new_epoch

CIFAR10_TRAIN_FILES = [f"data_batch_{i}.bin" for i in range(1, 6)]
CIFAR10_TEST_FILES = ["test_batch.bin"]
CIFAR100_TRAIN_FILES = ["train.bin"]
CIFAR100_TEST_FILES = ["test.bin"]


@dataclass(frozen=True)
class SyntheticSpec:
    """Sizing of the procedurally generated dataset."""

    train_examples: int = 2000
    test_examples: int = 500
    num_classes: int = 2
    height: int = 32
    width: int = 32
    channels: int = 3


def load_split(dataset: str, data_dir: str | None, split: str, seed: int,
               synthetic: SyntheticSpec | None = None) -> Dataset:
    """Load the train or test split of a named dataset."""
    if split not in ("train", "test"):
        raise ConfigError(f"split must be 'train' or 'test', got {split!r}")
    if dataset == "synthetic":
        spec = synthetic or SyntheticSpec()
        n = spec.train_examples if split == "train" else spec.test_examples
        return make_synthetic(
            n,
            num_classes=spec.num_classes,
            height=spec.height,
            width=spec.width,
            channels=spec.channels,
            seed=seed,
            partition=0 if split == "train" else 1,
        )
    if dataset not in ("cifar10", "cifar100"):
        raise ConfigError(f"unknown dataset {dataset!r}")
    if data_dir is None:
        raise ConfigError(f"--data-dir is required for dataset {dataset!r}")
    base = Path(data_dir)
    if dataset == "cifar10":
        names = CIFAR10_TRAIN_FILES if split == "train" else CIFAR10_TEST_FILES
        return load_cifar10([base / n for n in names])
    names = CIFAR100_TRAIN_FILES if split == "train" else CIFAR100_TEST_FILES
    return load_cifar100([base / n for n in names])


def patch_config(probability: float, min_frac: float, max_frac: float,
                 fixed_area: float | None, seed: int) -> AugmentConfig:
    if fixed_area is not None:
        return AugmentConfig(
            probability=probability, mode=PatchMode.FIXED_AREA,
            area_frac=fixed_area, seed=seed,
        )
    return AugmentConfig(
        probability=probability, mode=PatchMode.RANDOM_FRACTION,
        min_frac=min_frac, max_frac=max_frac, seed=seed,
    )


@dataclass
class AugmentRunResult:
    container: str
    manifest: str
    previews: list
    examples: int
    augmented: int


def run_augment(
    dataset: str,
    data_dir: str | None,
    out_dir: str,
    config: AugmentConfig,
    previews: int = 9,
    synthetic: SyntheticSpec | None = None,
) -> AugmentRunResult:
    """One probability-gated augmentation pass over the training split.

    Writes the augmented dataset container, PNG previews of the first
    examples, and a JSON manifest recording each preview's mixed label.
    The pass keeps dataset order (no shuffling), so probability 0
    reproduces the input examples bit for bit.
    """
    data = load_split(dataset, data_dir, "train", config.seed, synthetic)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    plan = new_epoch(data, batch_size=256, epoch=0, seed=config.seed, shuffle=False)
    stream = augment_stream(config.seed, 0)
    images = np.empty_like(data.images)
    labels = np.empty_like(data.labels)
    changed = 0
    for batch in epoch_batches(data, plan):
        aug = augment_batch(batch, data, config, stream)
        images[aug.indices] = aug.images
        labels[aug.indices] = aug.labels
        changed += sum(
            not np.array_equal(aug.images[i], batch.images[i]) for i in range(len(batch))
        )
    augmented = Dataset(images=images, labels=labels,
                        num_classes=data.num_classes, name=data.name)

    container = out / "augmented.paug"
    write_augmented(augmented, container, config)

    preview_dir = out / "previews"
    preview_dir.mkdir(exist_ok=True)
    entries = []
    paths = []
    for i in range(min(previews, len(augmented))):
        png = preview_dir / f"preview_{i:03d}.png"
        export_png(augmented.images[i], png)
        entries.append(
            {
                "index": i,
                "file": str(png),
                "label": [float(v) for v in augmented.labels[i]],
                "augmented": not np.array_equal(augmented.images[i], data.images[i]),
            }
        )
        paths.append(str(png))
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps(entries, indent=2) + "\n")
    return AugmentRunResult(
        container=str(container),
        manifest=str(manifest),
        previews=paths,
        examples=len(augmented),
        augmented=changed,
    )


@dataclass
class TrainRunResult:
    checkpoint: str
    metrics: str
    mode: str
    rows: list  # EpochMetrics


def run_train(
    dataset: str,
    data_dir: str | None,
    out_dir: str,
    mode: str,
    train_config: TrainConfig,
    synthetic: SyntheticSpec | None = None,
) -> TrainRunResult:
    """Train one model and write its checkpoint plus a metrics CSV."""
    if mode not in ("none", "patch", "mixup"):
        raise ConfigError(f"mode must be none|patch|mixup, got {mode!r}")
    if mode != "patch":
        train_config.augment = None
    if mode != "mixup":
        train_config.mixup_alpha = None
    if mode == "patch" and train_config.augment is None:
        raise ConfigError("mode 'patch' needs an augmentation config")
    if mode == "mixup" and train_config.mixup_alpha is None:
        train_config.mixup_alpha = 0.2

    data = load_split(dataset, data_dir, "train", train_config.seed, synthetic)
    test = load_split(dataset, data_dir, "test", train_config.seed, synthetic)
    result = train(data, train_config, eval_dataset=test)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "model.ckpt"
    save_checkpoint(result.params, ckpt, seed=train_config.seed)
    metrics = out / "metrics.csv"
    write_metrics(
        metrics,
        result.metrics,
        meta={
            "dataset": data.name or dataset,
            "model": train_config.arch,
            "mode": mode,
            "seed": train_config.seed,
            "epochs": train_config.epochs,
            "batch_size": train_config.batch_size,
            "lr": train_config.base_lr,
        },
    )
    return TrainRunResult(checkpoint=str(ckpt), metrics=str(metrics), mode=mode,
                          rows=result.metrics)


@dataclass
class AttackRunResult:
    report: str | None
    rows: list  # (epsilon, clean_accuracy, adversarial_accuracy)
    n_examples: int


def run_attack(
    dataset: str,
    data_dir: str | None,
    checkpoint: str,
    epsilons: list,
    n_examples: int = 1000,
    clip: bool = True,
    seed: int = 0,
    out_path: str | None = None,
    synthetic: SyntheticSpec | None = None,
) -> AttackRunResult:
    """Clean vs adversarial accuracy over the first test examples.

    One report row per epsilon: (epsilon, clean accuracy, adversarial
    accuracy), all over the same leading slice of the test split.
    """
    params, header = load_checkpoint(checkpoint)
    test = load_split(dataset, data_dir, "test", seed, synthetic)
    if tuple(params.input_shape) != test.image_shape or params.num_classes != test.num_classes:
        raise CheckpointMismatchError(
            f"checkpoint expects {params.input_shape}/{params.num_classes} classes, "
            f"dataset has {test.image_shape}/{test.num_classes}"
        )
    subset = test.take(n_examples)
    clean = evaluate(params, subset)
    rows = []
    for eps in epsilons:
        adv = evaluate(params, subset, AttackConfig(epsilon=eps, clip=clip,
                                                    n_examples=len(subset)))
        rows.append((float(eps), clean, adv))
    report = None
    if out_path is not None:
        lines = [
            f"# checkpoint={checkpoint}",
            f"# dataset={test.name or dataset}",
            f"# n_examples={len(subset)}",
            "epsilon,clean_accuracy,adversarial_accuracy",
        ]
        for eps, cl, adv in rows:
            lines.append(f"{eps!r},{cl!r},{adv!r}")
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        Path(out_path).write_text("\n".join(lines) + "\n")
        report = str(out_path)
    return AttackRunResult(report=report, rows=rows, n_examples=len(subset))


@dataclass
class ReportRow:
    dataset: str
    model: str
    mode: str
    final_test_accuracy: float | None
    delta_vs_baseline: float | None


@dataclass
class ReportRunResult:
    rows: list
    table: str


def run_report(metrics_files: list, out_path: str | None = None) -> ReportRunResult:
    """Consolidate training metrics files into one comparison table.

    Rows are keyed (dataset, model, mode); the delta column compares each
    mode's final test accuracy against the 'none' run of the same dataset
    and model, when present.
    """
    if not metrics_files:
        raise MalformedMetricsError("need at least one metrics file")
    runs = []
    for path in metrics_files:
        meta, rows = read_metrics(path)
        test_rows = [r for r in rows if r["split"] == "test"]
        final = test_rows[-1]["accuracy"] if test_rows else None
        runs.append(
            {
                "dataset": meta.get("dataset", "?"),
                "model": meta.get("model", "?"),
                "mode": meta.get("mode", "?"),
                "final": final,
            }
        )
    baselines = {
        (r["dataset"], r["model"]): r["final"]
        for r in runs
        if r["mode"] == "none" and r["final"] is not None
    }
    out_rows = []
    for r in runs:
        base = baselines.get((r["dataset"], r["model"]))
        delta = None
        if r["mode"] != "none" and base is not None and r["final"] is not None:
            delta = r["final"] - base
        out_rows.append(
            ReportRow(
                dataset=r["dataset"],
                model=r["model"],
                mode=r["mode"],
                final_test_accuracy=r["final"],
                delta_vs_baseline=delta,
            )
        )

    header = f"{'dataset':<12} {'model':<8} {'mode':<8} {'final_acc':>10} {'delta':>8}"
    lines = [header, "-" * len(header)]
    for row in out_rows:
        acc = f"{row.final_test_accuracy:.4f}" if row.final_test_accuracy is not None else "-"
        delta = f"{row.delta_vs_baseline:+.4f}" if row.delta_vs_baseline is not None else "-"
        lines.append(
            f"{row.dataset:<12} {row.model:<8} {row.mode:<8} {acc:>10} {delta:>8}"
        )
    table = "\n".join(lines)
    if out_path is not None:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        Path(out_path).write_text(table + "\n")
    return ReportRunResult(rows=out_rows, table=table)


def parse_spec_file(path) -> dict:
    """Plain-text key=value experiment spec; '#' starts a comment line."""
    values: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"malformed spec line {raw!r}")
        values[key.strip()] = value.strip()
    return values
