"""Mask-overlap evaluation protocol.

An attack is scored by segmenting the clean and adversarial images at the
*same* freshly drawn random point inside the target region and measuring the
IoU between the two masks; the mean over a test set (mIoU) is the headline
metric, lower meaning a stronger attack. The test point is drawn at
evaluation time, independently of the grid the attack optimized, so the
score reflects region-wide suppression rather than memorized prompts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .attack import Region
from .segmenter import PointPrompt, SegmenterAdapter, as_image, binarize, predict_logits


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two boolean masks.

    Edge conventions: both masks empty returns 1.0 (nothing changed, the
    attack gets no credit); exactly one empty returns 0.0 (full erasure).
    """
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = int(np.count_nonzero(a | b))
    if union == 0:
        return 1.0
    return int(np.count_nonzero(a & b)) / union


@dataclass(frozen=True)
class EvalRecord:
    """Outcome of one clean-vs-adversarial comparison at one test point."""

    image_id: str
    test_point: PointPrompt
    iou: float
    clean_mask_px: int
    adv_mask_px: int
    config: dict[str, Any] = field(default_factory=dict)


def evaluate_pair(
    model: SegmenterAdapter,
    clean: np.ndarray,
    adv: np.ndarray,
    region: Region,
    rng: np.random.Generator,
    image_id: str = "",
    epsilon: float | None = None,
    config: dict[str, Any] | None = None,
) -> EvalRecord:
    """Draw one uniform test point in the region and compare the two masks.

    When ``epsilon`` is given, the pair is checked to actually lie within
    that perturbation budget. The row is drawn before the column.
    """
    clean = as_image(clean)
    adv = as_image(adv)
    if clean.shape != adv.shape:
        raise ValueError(f"image shapes differ: {clean.shape} vs {adv.shape}")
    region.validate(clean.shape[0], clean.shape[1])
    if epsilon is not None:
        gap = float(np.abs(adv - clean).max())
        if gap > epsilon + 1e-12:
            raise ValueError(
                f"adversarial image leaves the epsilon ball: max|adv-clean|={gap} > {epsilon}"
            )
    row = int(rng.integers(region.top, region.top + region.height))
    col = int(rng.integers(region.left, region.left + region.width))
    point = PointPrompt(row=row, col=col)
    try:
        mask_clean = binarize(predict_logits(model, point, clean))
        mask_adv = binarize(predict_logits(model, point, adv))
    except Exception as exc:
        raise RuntimeError(f"evaluation failed for image {image_id!r}") from exc
    return EvalRecord(
        image_id=image_id,
        test_point=point,
        iou=iou(mask_adv, mask_clean),
        clean_mask_px=int(np.count_nonzero(mask_clean)),
        adv_mask_px=int(np.count_nonzero(mask_adv)),
        config=dict(config or {}),
    )


def miou(records: list[EvalRecord]) -> float:
    """Arithmetic mean of the record IoUs (a fraction; reports show percent)."""
    if not records:
        raise ValueError("cannot average an empty record list")
    return sum(r.iou for r in records) / len(records)


@dataclass
class Report:
    """A batch of evaluation records plus the sweep axes they cover."""

    records: list[EvalRecord]
    axes: dict[str, Any] = field(default_factory=dict)

    @property
    def miou(self) -> float:
        return miou(self.records)
