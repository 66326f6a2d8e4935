"""Region-level adversarial attacks against promptable segmentation models."""

from .attack import (
    AttackConfig,
    AttackTrace,
    PointSet,
    Region,
    pgd_project,
    point_loss,
    region_loss,
    s_ra,
    sample_grid_points,
    t_ra,
)
from .corpus import CorpusGeometry, CorpusImage, generate_synthetic_corpus, load_corpus, save_corpus
from .evaluation import EvalRecord, Report, evaluate_pair, iou, miou
from .segmenter import (
    CapabilityError,
    PointPrompt,
    SegmenterAdapter,
    ToyParams,
    ToySegmenter,
    available_adapters,
    binarize,
    create_adapter,
    predict_logits,
    register_adapter,
)
from .spectrum import SpectrumParams, dct2, idct2, spectrum_transform
from .sweep import RunConfig, SweepResult, evaluate_bundles, persist_adversarial, run_attack_sweep

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "AttackTrace",
    "CapabilityError",
    "CorpusGeometry",
    "CorpusImage",
    "EvalRecord",
    "PointPrompt",
    "PointSet",
    "Region",
    "Report",
    "RunConfig",
    "SegmenterAdapter",
    "SpectrumParams",
    "SweepResult",
    "ToyParams",
    "ToySegmenter",
    "available_adapters",
    "binarize",
    "create_adapter",
    "dct2",
    "evaluate_bundles",
    "evaluate_pair",
    "generate_synthetic_corpus",
    "idct2",
    "iou",
    "load_corpus",
    "miou",
    "persist_adversarial",
    "pgd_project",
    "point_loss",
    "predict_logits",
    "region_loss",
    "register_adapter",
    "run_attack_sweep",
    "s_ra",
    "sample_grid_points",
    "save_corpus",
    "spectrum_transform",
    "t_ra",
    "__version__",
]
