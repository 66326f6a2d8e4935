"""FastAPI service wrapping the attack toolkit.

Endpoints mirror the CLI subcommands: corpus generation, attack runs,
bundle re-evaluation and full sweeps. All filesystem paths in requests are
resolved on the machine running the service; responses carry the result
tables inline so remote clients do not need the server's filesystem.
"""

from __future__ import annotations

from dataclasses import asdict
from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..attack import Region
from ..corpus import CorpusGeometry, generate_synthetic_corpus, save_corpus
from ..evaluation import miou
from ..segmenter import available_adapters
from ..sweep import RunConfig, evaluate_bundles, records_csv_from_records, run_attack_sweep, summary_table
from .models import (
    CellError,
    CorpusEntry,
    EvaluateRequest,
    EvaluateResponse,
    GenCorpusRequest,
    GenCorpusResponse,
    HealthResponse,
    ModelsResponse,
    RecordModel,
    RegionModel,
    SweepRequest,
    SweepResponse,
)

app = FastAPI(title="regionattack", version=__version__)


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.get("/models", response_model=ModelsResponse)
def models() -> ModelsResponse:
    return ModelsResponse(models=available_adapters())


@app.post("/corpus/generate", response_model=GenCorpusResponse)
def corpus_generate(req: GenCorpusRequest) -> GenCorpusResponse:
    geometry = CorpusGeometry(height=req.height, width=req.width, region_frac=req.region_frac)
    try:
        images = generate_synthetic_corpus(req.n, geometry, seed=req.seed)
        out = save_corpus(images, req.out_dir, seed=req.seed)
    except (ValueError, OSError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return GenCorpusResponse(
        corpus_dir=str(out),
        images=[
            CorpusEntry(id=item.image_id, region=RegionModel(**asdict(item.region)))
            for item in images
        ],
    )


def _run_config(req: SweepRequest, eval_models: tuple[str, ...]) -> RunConfig:
    return RunConfig(
        out_dir=req.out_dir,
        corpus_dir=req.corpus_dir,
        gen_count=req.gen_count,
        geometry=CorpusGeometry(height=req.height, width=req.width, region_frac=req.region_frac),
        attack=req.attack,
        epsilons=tuple(req.epsilons),
        rhos=tuple(req.rhos),
        lams=tuple(req.lams),
        alpha=req.alpha,
        steps=req.steps,
        samples=req.samples,
        sigma=req.sigma,
        neg_th=req.neg_th,
        region=Region(**req.region.model_dump()) if req.region else None,
        source_model=req.source_model,
        eval_models=eval_models,
        seed=req.seed,
        workers=req.workers,
    )


def _sweep_response(result) -> SweepResponse:
    return SweepResponse(
        out_dir=str(result.out_dir),
        records_csv=str(result.records_csv),
        summary_csv=str(result.summary_csv),
        report_json=str(result.report_json),
        completed_cells=len(result.cells) - len(result.errors),
        failed_cells=len(result.errors),
        miou_pct=summary_table(result),
        errors=[
            CellError(image_id=c.image_id, cell=c.cell_tag, error=c.error) for c in result.errors
        ],
    )


def _execute_sweep(req: SweepRequest, eval_models: tuple[str, ...]) -> SweepResponse:
    try:
        cfg = _run_config(req, eval_models)
        result = run_attack_sweep(cfg)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    return _sweep_response(result)


@app.post("/attack/run", response_model=SweepResponse)
def attack_run(req: SweepRequest) -> SweepResponse:
    """Compute and persist adversarial bundles without evaluating them."""
    return _execute_sweep(req, eval_models=())


@app.post("/sweep/run", response_model=SweepResponse)
def sweep_run(req: SweepRequest) -> SweepResponse:
    """Attack every corpus image across the epsilon/rho/lambda grid and evaluate."""
    return _execute_sweep(req, eval_models=tuple(req.eval_models))


@app.post("/evaluate/run", response_model=EvaluateResponse)
def evaluate_run(req: EvaluateRequest) -> EvaluateResponse:
    if not req.eval_models:
        raise HTTPException(status_code=400, detail="eval_models must not be empty")
    try:
        records, errors = evaluate_bundles(req.out_dir, tuple(req.eval_models), req.seed)
    except (FileNotFoundError, ValueError, KeyError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc

    csv_path = req.csv_path or str(f"{req.out_dir}/eval_records.csv")
    try:
        Path(csv_path).parent.mkdir(parents=True, exist_ok=True)
        Path(csv_path).write_text(records_csv_from_records(records))
    except OSError as exc:
        raise HTTPException(status_code=400, detail=f"cannot write {csv_path}: {exc}") from exc

    miou_pct = {}
    for spec in req.eval_models:
        subset = [r for r in records if r.config["eval_model"] == spec]
        if subset:
            miou_pct[spec] = 100.0 * miou(subset)
    return EvaluateResponse(
        records=[
            RecordModel(
                image_id=r.image_id,
                test_row=r.test_point.row,
                test_col=r.test_point.col,
                iou=r.iou,
                clean_mask_px=r.clean_mask_px,
                adv_mask_px=r.adv_mask_px,
                eval_model=r.config["eval_model"],
                epsilon=r.config["epsilon"],
            )
            for r in records
        ],
        miou_pct=miou_pct,
        csv_path=csv_path,
        errors=errors,
    )
