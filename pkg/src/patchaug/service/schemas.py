"""Request and response bodies for the HTTP service."""
from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class _Schema(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SyntheticParams(_Schema):
    train_examples: int = Field(default=2000, ge=1)
    test_examples: int = Field(default=500, ge=1)
    num_classes: int = Field(default=2, ge=2)
    height: int = Field(default=32, ge=1)
    width: int = Field(default=32, ge=1)
    channels: int = Field(default=3, ge=1)


class AugmentRequest(_Schema):
    dataset: str = "synthetic"
    data_dir: str | None = None
    out_dir: str
    probability: float = Field(default=0.9, ge=0.0, le=1.0)
    min_frac: float = Field(default=0.3, gt=0.0, le=1.0)
    max_frac: float = Field(default=0.8, gt=0.0, le=1.0)
    fixed_area: float | None = Field(default=None, gt=0.0, le=1.0)
    seed: int = 0
    previews: int = Field(default=9, ge=0)
    synthetic: SyntheticParams | None = None


class AugmentResponse(_Schema):
    container: str
    manifest: str
    previews: list[str]
    examples: int
    augmented: int


class TrainRequest(_Schema):
    dataset: str = "synthetic"
    data_dir: str | None = None
    out_dir: str
    mode: str = "none"
    model: str = "linear"
    hidden: int = Field(default=256, ge=1)
    epochs: int = Field(default=20, ge=1)
    batch_size: int = Field(default=32, ge=1)
    lr: float = Field(default=1e-3, gt=0.0)
    probability: float = Field(default=0.9, ge=0.0, le=1.0)
    min_frac: float = Field(default=0.3, gt=0.0, le=1.0)
    max_frac: float = Field(default=0.8, gt=0.0, le=1.0)
    fixed_area: float | None = Field(default=None, gt=0.0, le=1.0)
    mixup_alpha: float | None = Field(default=None, gt=0.0)
    seed: int = 0
    synthetic: SyntheticParams | None = None


class EpochRow(_Schema):
    epoch: int
    split: str
    loss: float
    accuracy: float


class TrainResponse(_Schema):
    checkpoint: str
    metrics: str
    mode: str
    final: list[EpochRow]


class AttackRequest(_Schema):
    dataset: str = "synthetic"
    data_dir: str | None = None
    checkpoint: str
    epsilons: list[float] = Field(min_length=1)
    n_attack: int = Field(default=1000, ge=1)
    clip: bool = True
    seed: int = 0
    out: str | None = None
    synthetic: SyntheticParams | None = None


class AttackRow(_Schema):
    epsilon: float
    clean_accuracy: float
    adversarial_accuracy: float


class AttackResponse(_Schema):
    report: str | None
    n_examples: int
    rows: list[AttackRow]


class ReportRequest(_Schema):
    metrics_files: list[str] = Field(min_length=1)
    out: str | None = None


class ReportRow(_Schema):
    dataset: str
    model: str
    mode: str
    final_test_accuracy: float | None
    delta_vs_baseline: float | None


class ReportResponse(_Schema):
    rows: list[ReportRow]
    table: str


class HealthResponse(_Schema):
    status: str
    version: str
