"""Sweep orchestration: run attacks over a corpus, evaluate, persist, report.

A sweep is the cross product of corpus images with the requested epsilon,
rho and lambda grids. Every cell attacks one image on the source model,
stores the adversarial artifact bundle, and evaluates the pair on each
listed evaluation model (the source model itself gives the white-box cell,
every other model a transfer cell). Results land in ``records.csv`` (one row
per record, full hyperparameter tuple included), ``summary.csv``
(mIoU percentages, one epsilon column per value, shaped like the usual
white-box/transfer tables) and ``report.json``.

Determinism: every cell derives its RNG streams from the master seed and the
cell indices alone, so reruns of the same config produce byte-identical
reports regardless of worker count.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .attack import AttackConfig, AttackTrace, Region, s_ra, t_ra
from .corpus import CorpusGeometry, CorpusImage, generate_synthetic_corpus, load_corpus, save_corpus
from .evaluation import EvalRecord, evaluate_pair
from .segmenter import create_adapter

_ATTACK_TAG = 1
_EVAL_TAG = 2

ATTACK_KINDS = ("point", "s_ra", "t_ra")


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one sweep."""

    out_dir: str
    corpus_dir: str | None = None  # existing corpus; None generates a synthetic one
    gen_count: int = 20
    geometry: CorpusGeometry = field(default_factory=CorpusGeometry)
    attack: str = "s_ra"
    epsilons: tuple[float, ...] = (2 / 255, 4 / 255, 8 / 255, 16 / 255)
    rhos: tuple[float, ...] = (0.1,)
    lams: tuple[int, ...] = (7,)
    alpha: float = 2.0 / 255.0
    steps: int | None = None
    samples: int = 20
    sigma: float | None = None
    neg_th: float = -10.0
    region: Region | None = None  # explicit override for every image
    source_model: str = "toy"
    eval_models: tuple[str, ...] = ("toy",)
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.attack not in ATTACK_KINDS:
            raise ValueError(f"attack must be one of {ATTACK_KINDS}, got {self.attack!r}")
        if not self.epsilons:
            raise ValueError("epsilons must not be empty")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")  # feeds SeedSequence entropy


@dataclass
class CellResult:
    image_id: str
    cell_tag: str
    epsilon: float
    rho: float
    lam: int
    records: list[EvalRecord] = field(default_factory=list)
    error: str | None = None


@dataclass
class SweepResult:
    out_dir: Path
    config: RunConfig
    cells: list[CellResult]
    records_csv: Path
    summary_csv: Path
    report_json: Path

    @property
    def errors(self) -> list[CellResult]:
        return [c for c in self.cells if c.error is not None]

    @property
    def records(self) -> list[EvalRecord]:
        return [r for c in self.cells for r in c.records]


def persist_adversarial(clean: np.ndarray, adv: np.ndarray, path: str | Path) -> dict[str, str]:
    """Store an adversarial image losslessly plus an 8-bit preview.

    The .npy tensor is authoritative (reloads bitwise-equal); the preview is
    round-to-nearest 8-bit, so each pixel moves by at most 1/510.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    gap = float(np.abs(adv - clean).max())
    np.save(path / "adv.npy", adv)
    np.save(path / "delta.npy", adv - clean)
    preview = np.clip(np.rint(adv * 255.0), 0, 255).astype(np.uint8)
    PILImage.fromarray(preview).save(path / "preview.png")
    return {"adv": "adv.npy", "delta": "delta.npy", "preview": "preview.png", "linf": repr(gap)}


def _cell_attack_config(cfg: RunConfig, epsilon: float, rho: float, lam: int) -> AttackConfig:
    return AttackConfig(
        epsilon=epsilon,
        alpha=cfg.alpha,
        steps=cfg.steps,
        samples=cfg.samples,
        rho=rho,
        sigma=cfg.sigma,
        lam=lam,
        neg_th=cfg.neg_th,
        seed=cfg.seed,
    )


def _record_config(cfg: RunConfig, acfg: AttackConfig, steps_used: int) -> dict:
    return {
        "attack": cfg.attack,
        "source_model": cfg.source_model,
        "epsilon": acfg.epsilon,
        "rho": acfg.rho,
        "sigma": acfg.spectrum_params().sigma,
        "lam": acfg.lam,
        "steps": steps_used,
        "samples": acfg.samples,
        "alpha": acfg.alpha,
        "neg_th": acfg.neg_th,
        "seed": cfg.seed,
    }


def _run_cell(
    cfg: RunConfig,
    item: CorpusImage,
    indices: tuple[int, int, int, int],
    bundles_dir: Path,
) -> CellResult:
    img_idx, eps_idx, rho_idx, lam_idx = indices
    epsilon = cfg.epsilons[eps_idx]
    rho = cfg.rhos[rho_idx]
    lam = cfg.lams[lam_idx]
    tag = f"e{eps_idx}_r{rho_idx}_l{lam_idx}"
    result = CellResult(image_id=item.image_id, cell_tag=tag, epsilon=epsilon, rho=rho, lam=lam)
    try:
        region = cfg.region or item.region
        region.validate(item.image.shape[0], item.image.shape[1])
        acfg = _cell_attack_config(cfg, epsilon, rho, lam)
        if cfg.attack == "point":
            # point-level baseline: one prompt at the region center
            acfg = _cell_attack_config(cfg, epsilon, rho, max(region.height, region.width))
        model = create_adapter(cfg.source_model)
        trace = AttackTrace()
        if cfg.attack == "t_ra":
            rng = np.random.default_rng(
                np.random.SeedSequence((cfg.seed, _ATTACK_TAG, img_idx, eps_idx, rho_idx, lam_idx))
            )
            steps_used = 10 if acfg.steps is None else acfg.steps
            adv = t_ra(model, item.image, region, acfg, rng, trace=trace)
        else:
            steps_used = 40 if acfg.steps is None else acfg.steps
            adv = s_ra(model, item.image, region, acfg, trace=trace)

        bundle = bundles_dir / item.image_id / tag
        files = persist_adversarial(item.image, adv, bundle)
        meta = {
            "image_id": item.image_id,
            "indices": {"image": img_idx, "epsilon": eps_idx, "rho": rho_idx, "lam": lam_idx},
            "region": asdict(region),
            "config": _record_config(cfg, acfg, steps_used),
            "files": files,
            "loss_trace": trace.losses,
            "final_loss": trace.final_loss,
            "max_abs_delta": max(trace.max_abs_delta) if trace.max_abs_delta else 0.0,
        }
        (bundle / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))

        for model_idx, eval_spec in enumerate(cfg.eval_models):
            eval_model = create_adapter(eval_spec)
            eval_rng = np.random.default_rng(
                np.random.SeedSequence(
                    (cfg.seed, _EVAL_TAG, img_idx, eps_idx, rho_idx, lam_idx, model_idx)
                )
            )
            record_cfg = _record_config(cfg, acfg, steps_used)
            record_cfg["eval_model"] = eval_spec
            result.records.append(
                evaluate_pair(
                    eval_model,
                    item.image,
                    adv,
                    region,
                    eval_rng,
                    image_id=item.image_id,
                    epsilon=epsilon,
                    config=record_cfg,
                )
            )
    except Exception as exc:
        result.error = f"{type(exc).__name__}: {exc}"
        result.records = []
    return result


_CSV_FIELDS = (
    "image_id",
    "attack",
    "source_model",
    "eval_model",
    "epsilon",
    "rho",
    "sigma",
    "lam",
    "steps",
    "samples",
    "alpha",
    "neg_th",
    "seed",
    "test_row",
    "test_col",
    "clean_mask_px",
    "adv_mask_px",
    "iou",
)


def _records_csv_text(cells: list[CellResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_FIELDS)
    for cell in cells:
        for rec in cell.records:
            cfgd = rec.config
            writer.writerow(
                [
                    rec.image_id,
                    cfgd["attack"],
                    cfgd["source_model"],
                    cfgd["eval_model"],
                    repr(cfgd["epsilon"]),
                    repr(cfgd["rho"]),
                    repr(cfgd["sigma"]),
                    cfgd["lam"],
                    cfgd["steps"],
                    cfgd["samples"],
                    repr(cfgd["alpha"]),
                    repr(cfgd["neg_th"]),
                    cfgd["seed"],
                    rec.test_point.row,
                    rec.test_point.col,
                    rec.clean_mask_px,
                    rec.adv_mask_px,
                    repr(rec.iou),
                ]
            )
    return buf.getvalue()


def _summary_csv_text(cfg: RunConfig, cells: list[CellResult]) -> str:
    """mIoU (%) per (eval model, rho, lam) row, one column per epsilon."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["attack", "source_model", "eval_model", "rho", "lam"]
        + [f"miou_pct@eps={repr(e)}" for e in cfg.epsilons]
    )
    for eval_spec in cfg.eval_models:
        for rho in cfg.rhos:
            for lam in cfg.lams:
                row: list = [cfg.attack, cfg.source_model, eval_spec, repr(rho), lam]
                for eps in cfg.epsilons:
                    # group on the cell's sweep-axis values: the point attack
                    # records an effective lam that differs from the axis
                    vals = [
                        rec.iou
                        for cell in cells
                        if cell.epsilon == eps and cell.rho == rho and cell.lam == lam
                        for rec in cell.records
                        if rec.config["eval_model"] == eval_spec
                    ]
                    row.append(repr(100.0 * sum(vals) / len(vals)) if vals else "")
                writer.writerow(row)
    return buf.getvalue()


def summary_table(result: SweepResult) -> dict[str, dict[str, float]]:
    """mIoU percentages keyed by eval model then epsilon (single rho/lam sweeps)."""
    table: dict[str, dict[str, float]] = {}
    for eval_spec in result.config.eval_models:
        per_eps = {}
        for eps in result.config.epsilons:
            vals = [
                r.iou
                for r in result.records
                if r.config["eval_model"] == eval_spec and r.config["epsilon"] == eps
            ]
            if vals:
                per_eps[repr(eps)] = 100.0 * sum(vals) / len(vals)
        table[eval_spec] = per_eps
    return table


def run_attack_sweep(cfg: RunConfig) -> SweepResult:
    """Execute a full sweep per the config; see the module docstring.

    Per-cell failures are recorded and do not abort the run. The returned
    result lists them; callers decide the exit status.
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.corpus_dir is not None:
        corpus = load_corpus(cfg.corpus_dir)
    else:
        corpus = generate_synthetic_corpus(cfg.gen_count, cfg.geometry, seed=cfg.seed)
        save_corpus(corpus, out / "corpus", seed=cfg.seed)

    bundles_dir = out / "bundles"
    for item in corpus:
        image_dir = bundles_dir / item.image_id
        image_dir.mkdir(parents=True, exist_ok=True)
        np.save(image_dir / "clean.npy", item.image)
    cells_spec = [
        (item, (ii, ei, ri, li))
        for ii, item in enumerate(corpus)
        for ei in range(len(cfg.epsilons))
        for ri in range(len(cfg.rhos))
        for li in range(len(cfg.lams))
    ]
    if cfg.workers == 1:
        cells = [_run_cell(cfg, item, idx, bundles_dir) for item, idx in cells_spec]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            cells = list(
                pool.map(lambda spec: _run_cell(cfg, spec[0], spec[1], bundles_dir), cells_spec)
            )

    records_csv = out / "records.csv"
    summary_csv = out / "summary.csv"
    report_json = out / "report.json"
    records_csv.write_text(_records_csv_text(cells))
    summary_csv.write_text(_summary_csv_text(cfg, cells))

    report = {
        "config": _config_dict(cfg),
        "miou_pct_by_model": {},
        "errors": [
            {"image_id": c.image_id, "cell": c.cell_tag, "error": c.error} for c in cells if c.error
        ],
        "records": [
            {
                "image_id": r.image_id,
                "test_point": {"row": r.test_point.row, "col": r.test_point.col},
                "iou": r.iou,
                "clean_mask_px": r.clean_mask_px,
                "adv_mask_px": r.adv_mask_px,
                "config": r.config,
            }
            for c in cells
            for r in c.records
        ],
    }
    all_records = [r for c in cells for r in c.records]
    for eval_spec in cfg.eval_models:
        vals = [r.iou for r in all_records if r.config["eval_model"] == eval_spec]
        if vals:
            report["miou_pct_by_model"][eval_spec] = 100.0 * sum(vals) / len(vals)
    report_json.write_text(json.dumps(report, indent=2, sort_keys=True))

    return SweepResult(
        out_dir=out,
        config=cfg,
        cells=cells,
        records_csv=records_csv,
        summary_csv=summary_csv,
        report_json=report_json,
    )


def evaluate_bundles(
    out_dir: str | Path, eval_models: tuple[str, ...], seed: int
) -> tuple[list[EvalRecord], list[dict]]:
    """Re-evaluate stored bundles (from a previous attack run) on new models.

    The lossless tensors are authoritative; evaluation RNG streams derive
    from the given seed plus each bundle's recorded cell indices, so a
    re-evaluation with the sweep's seed and model list reproduces its records.
    """
    root = Path(out_dir)
    bundles = root / "bundles" if (root / "bundles").is_dir() else root
    records: list[EvalRecord] = []
    errors: list[dict] = []
    metas = sorted(bundles.glob("*/*/meta.json"))
    if not metas:
        raise FileNotFoundError(f"no bundles under {bundles}")
    for meta_path in metas:
        meta = json.loads(meta_path.read_text())
        cell_dir = meta_path.parent
        try:
            clean = np.load(cell_dir.parent / "clean.npy")
            adv = np.load(cell_dir / "adv.npy")
            region = Region(**meta["region"])
            idx = meta["indices"]
            for model_idx, eval_spec in enumerate(eval_models):
                eval_model = create_adapter(eval_spec)
                eval_rng = np.random.default_rng(
                    np.random.SeedSequence(
                        (seed, _EVAL_TAG, idx["image"], idx["epsilon"], idx["rho"], idx["lam"], model_idx)
                    )
                )
                record_cfg = dict(meta["config"])
                record_cfg["eval_model"] = eval_spec
                records.append(
                    evaluate_pair(
                        eval_model,
                        clean,
                        adv,
                        region,
                        eval_rng,
                        image_id=meta["image_id"],
                        epsilon=meta["config"]["epsilon"],
                        config=record_cfg,
                    )
                )
        except Exception as exc:
            errors.append({"bundle": str(cell_dir), "error": f"{type(exc).__name__}: {exc}"})
    return records, errors


def _config_dict(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d["geometry"] = asdict(cfg.geometry)
    d["region"] = asdict(cfg.region) if cfg.region else None
    return d


def records_csv_from_records(records: list[EvalRecord]) -> str:
    """CSV text for standalone evaluation runs (same schema as sweep records)."""
    fake_cells = [CellResult(image_id="", cell_tag="", epsilon=0.0, rho=0.0, lam=1, records=records)]
    return _records_csv_text(fake_cells)
