"""FastAPI application wrapping the experiment runners.

The service is a thin transport layer: every endpoint validates its body,
forwards to the corresponding ``experiments.run_*`` function, and maps the
result dataclass onto a response schema. Domain and filesystem errors
surface as HTTP 400 with the underlying message.
"""
from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import PatchAugError
from ..experiments import (
    SyntheticSpec,
    patch_config,
    run_attack,
    run_augment,
    run_report,
    run_train,
)
from ..model import TrainConfig
from . import schemas


def _synthetic_spec(params: schemas.SyntheticParams | None) -> SyntheticSpec | None:
    if params is None:
        return None
    return SyntheticSpec(**params.model_dump())


def create_app() -> FastAPI:
    app = FastAPI(title="patchaug", version=__version__)

    @app.exception_handler(PatchAugError)
    async def _domain_error(request: Request, exc: PatchAugError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(OSError)
    async def _os_error(request: Request, exc: OSError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health", response_model=schemas.HealthResponse)
    async def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/augment", response_model=schemas.AugmentResponse)
    def augment(req: schemas.AugmentRequest) -> schemas.AugmentResponse:
        config = patch_config(req.probability, req.min_frac, req.max_frac,
                              req.fixed_area, req.seed)
        result = run_augment(
            req.dataset, req.data_dir, req.out_dir, config,
            previews=req.previews, synthetic=_synthetic_spec(req.synthetic),
        )
        return schemas.AugmentResponse(
            container=result.container, manifest=result.manifest,
            previews=result.previews, examples=result.examples,
            augmented=result.augmented,
        )

    @app.post("/train", response_model=schemas.TrainResponse)
    def train_endpoint(req: schemas.TrainRequest) -> schemas.TrainResponse:
        augment_config = None
        if req.mode == "patch":
            augment_config = patch_config(req.probability, req.min_frac,
                                          req.max_frac, req.fixed_area, req.seed)
        config = TrainConfig(
            epochs=req.epochs, batch_size=req.batch_size, base_lr=req.lr,
            seed=req.seed, arch=req.model, hidden=req.hidden,
            augment=augment_config,
            mixup_alpha=req.mixup_alpha if req.mode == "mixup" else None,
        )
        result = run_train(
            req.dataset, req.data_dir, req.out_dir, req.mode, config,
            synthetic=_synthetic_spec(req.synthetic),
        )
        final = []
        if result.rows:
            last = result.rows[-1]
            final.append(schemas.EpochRow(epoch=last.epoch, split="train",
                                          loss=last.train_loss,
                                          accuracy=last.train_accuracy))
            if last.test_loss is not None:
                final.append(schemas.EpochRow(epoch=last.epoch, split="test",
                                              loss=last.test_loss,
                                              accuracy=last.test_accuracy))
        return schemas.TrainResponse(
            checkpoint=result.checkpoint, metrics=result.metrics,
            mode=result.mode, final=final,
        )

    @app.post("/attack", response_model=schemas.AttackResponse)
    def attack_endpoint(req: schemas.AttackRequest) -> schemas.AttackResponse:
        result = run_attack(
            req.dataset, req.data_dir, req.checkpoint, req.epsilons,
            n_examples=req.n_attack, clip=req.clip, seed=req.seed,
            out_path=req.out, synthetic=_synthetic_spec(req.synthetic),
        )
        rows = [
            schemas.AttackRow(epsilon=eps, clean_accuracy=clean,
                              adversarial_accuracy=adv)
            for eps, clean, adv in result.rows
        ]
        return schemas.AttackResponse(report=result.report, rows=rows,
                                      n_examples=result.n_examples)

    @app.post("/report", response_model=schemas.ReportResponse)
    def report_endpoint(req: schemas.ReportRequest) -> schemas.ReportResponse:
        result = run_report(req.metrics_files, out_path=req.out)
        rows = [
            schemas.ReportRow(
                dataset=r.dataset, model=r.model, mode=r.mode,
                final_test_accuracy=r.final_test_accuracy,
                delta_vs_baseline=r.delta_vs_baseline,
            )
            for r in result.rows
        ]
        return schemas.ReportResponse(rows=rows, table=result.table)

    return app
