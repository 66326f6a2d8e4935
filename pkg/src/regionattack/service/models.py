"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class RegionModel(BaseModel):
    top: int
    left: int
    height: int
    width: int


class HealthResponse(BaseModel):
    status: str
    version: str


class ModelsResponse(BaseModel):
    models: list[str]


class GenCorpusRequest(BaseModel):
    out_dir: str
    n: int = 20
    seed: int = 0
    height: int = 64
    width: int = 64
    region_frac: float = 1.0 / 3.0


class CorpusEntry(BaseModel):
    id: str
    region: RegionModel


class GenCorpusResponse(BaseModel):
    corpus_dir: str
    images: list[CorpusEntry]


class SweepRequest(BaseModel):
    """Mirrors the library RunConfig; paths are interpreted on the server."""

    out_dir: str
    corpus_dir: str | None = None
    gen_count: int = 20
    height: int = 64
    width: int = 64
    region_frac: float = 1.0 / 3.0
    attack: Literal["point", "s_ra", "t_ra"] = "s_ra"
    epsilons: list[float] = Field(default=[2 / 255, 4 / 255, 8 / 255, 16 / 255])
    rhos: list[float] = Field(default=[0.1])
    lams: list[int] = Field(default=[7])
    alpha: float = 2.0 / 255.0
    steps: int | None = None
    samples: int = 20
    sigma: float | None = None
    neg_th: float = -10.0
    region: RegionModel | None = None
    source_model: str = "toy"
    eval_models: list[str] = Field(default=["toy"])
    seed: int = 0
    workers: int = 1


class CellError(BaseModel):
    image_id: str
    cell: str
    error: str


class SweepResponse(BaseModel):
    out_dir: str
    records_csv: str
    summary_csv: str
    report_json: str
    completed_cells: int
    failed_cells: int
    miou_pct: dict[str, dict[str, float]]  # eval model -> {epsilon repr -> mIoU %}
    errors: list[CellError]


class EvaluateRequest(BaseModel):
    out_dir: str  # directory holding bundles/ from a previous attack or sweep run
    eval_models: list[str]
    seed: int = 0
    csv_path: str | None = None  # defaults to <out_dir>/eval_records.csv


class RecordModel(BaseModel):
    image_id: str
    test_row: int
    test_col: int
    iou: float
    clean_mask_px: int
    adv_mask_px: int
    eval_model: str
    epsilon: float


class EvaluateResponse(BaseModel):
    records: list[RecordModel]
    miou_pct: dict[str, float]  # eval model -> mIoU % over all evaluated bundles
    csv_path: str
    errors: list[dict]
