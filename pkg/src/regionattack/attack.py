"""Region-level attack engine.

Two attacks are provided. The white-box sampling attack (``s_ra``) runs
projected gradient descent on the mean clipped point loss over a grid of
prompts covering the target region, so the perturbation suppresses
segmentation for *any* click inside the region, not just one known point.
The transferable variant (``t_ra``) wraps the same descent in spectrum
transform model augmentation: each step averages signed gradients over
several randomly frequency-perturbed copies of the image, which makes the
perturbation survive transfer to other segmenter backends.

Both attacks keep the perturbation inside the L-infinity ball of radius
``epsilon`` and keep the adversarial image inside [0, 1] after every step.
The perturbation tensor itself obeys the ball exactly; reconstructing it by
subtracting the clean image from a returned adversarial image re-rounds and
can read one float ulp over, so budget audits on stored images should allow
that much (the evaluation helpers do).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .segmenter import (
    CapabilityError,
    PointPrompt,
    SegmenterAdapter,
    as_image,
    predict_logits,
)
from .spectrum import SpectrumParams, spectrum_transform

# clip-then-subtract can spill one ulp past the box; asserts allow that much
_RANGE_TOL = 1e-12


@dataclass(frozen=True)
class Region:
    """Axis-aligned target rectangle (pixel units, top-left origin)."""

    top: int
    left: int
    height: int
    width: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError(f"region extents must be >= 1, got {self.height}x{self.width}")
        if self.top < 0 or self.left < 0:
            raise ValueError(f"region origin must be non-negative, got ({self.top}, {self.left})")

    def validate(self, image_height: int, image_width: int) -> None:
        if self.top + self.height > image_height or self.left + self.width > image_width:
            raise ValueError(
                f"region {self} not contained in image {image_height}x{image_width}"
            )

    def contains(self, prompt: PointPrompt) -> bool:
        return (
            self.top <= prompt.row < self.top + self.height
            and self.left <= prompt.col < self.left + self.width
        )


@dataclass(frozen=True)
class AttackConfig:
    """Hyperparameters shared by both attacks.

    epsilon: L-infinity perturbation budget as a fraction of the dynamic
        range; the standard sweep uses {2, 4, 8, 16}/255.
    alpha: PGD step size.
    steps: iteration count; None picks the attack's default (40 for the
        white-box attack, 10 for the transferable one).
    samples: spectrum-transform draws averaged per step (transferable attack).
    rho: spectrum mask strength.
    sigma: spectrum noise std; None ties it to epsilon.
    lam: grid spacing in pixels between neighbouring attack prompts.
    neg_th: negative logit ceiling the attack drives mask logits beneath.
    """

    epsilon: float
    alpha: float = 2.0 / 255.0
    steps: int | None = None
    samples: int = 20
    rho: float = 0.1
    sigma: float | None = None
    lam: int = 7
    neg_th: float = -10.0
    seed: int = 0

    def __post_init__(self):
        if self.epsilon < 0.0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.steps is not None and self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.samples < 1:
            raise ValueError(f"samples must be >= 1, got {self.samples}")
        if self.lam < 1:
            raise ValueError(f"lam must be >= 1, got {self.lam}")
        if not self.neg_th < 0.0:
            raise ValueError(f"neg_th must be negative, got {self.neg_th}")

    def spectrum_params(self) -> SpectrumParams:
        sigma = self.epsilon if self.sigma is None else self.sigma
        return SpectrumParams(rho=self.rho, sigma=sigma)


@dataclass(frozen=True)
class PointSet:
    """Ordered grid of attack prompts inside one region (n rows x m cols)."""

    points: tuple[PointPrompt, ...]
    m: int
    n: int

    def __post_init__(self):
        if len(self.points) != self.m * self.n:
            raise ValueError(
                f"point count {len(self.points)} does not match grid {self.m}x{self.n}"
            )


def sample_grid_points(region: Region, lam: int) -> PointSet:
    """Place prompts at the centers of an m x n grid of cells covering the region.

    m = ceil(width / lam) and n = ceil(height / lam), so a 300x300 region
    with lam=50 yields 36 prompts and lam >= max(width, height) yields the
    single region center. Pure function of (region, lam).
    """
    if lam < 1:
        raise ValueError(f"lam must be >= 1, got {lam}")
    m = math.ceil(region.width / lam)
    n = math.ceil(region.height / lam)
    points = []
    for i in range(n):
        row = region.top + int((i + 0.5) * region.height / n)
        for j in range(m):
            col = region.left + int((j + 0.5) * region.width / m)
            points.append(PointPrompt(row=row, col=col))
    return PointSet(points=tuple(points), m=m, n=n)


def point_loss(
    model: SegmenterAdapter, x_adv: np.ndarray, prompt: PointPrompt, neg_th: float
) -> float:
    """Clipped suppression loss for one prompt: ||max(y, neg_th) - neg_th||^2.

    Zero exactly when every logit is at or below ``neg_th``; clipping from
    below keeps already-suppressed pixels from dominating the optimization.
    """
    y = predict_logits(model, prompt, x_adv)
    r = np.maximum(y, neg_th) - neg_th
    return float(np.dot(r.ravel(), r.ravel()))


def point_loss_and_grad(
    model: SegmenterAdapter, x_adv: np.ndarray, prompt: PointPrompt, neg_th: float
) -> tuple[float, np.ndarray]:
    """Loss plus its gradient w.r.t. the image, via the adapter's VJP."""
    if not model.has_gradient:
        raise CapabilityError(
            f"adapter {getattr(model, 'name', model)!r} does not expose gradients"
        )
    y = predict_logits(model, prompt, x_adv)
    r = np.maximum(y, neg_th) - neg_th
    loss = float(np.dot(r.ravel(), r.ravel()))
    grad = model.gradient(prompt, x_adv, 2.0 * r)
    return loss, grad


def region_loss(
    model: SegmenterAdapter, x_adv: np.ndarray, points: PointSet, neg_th: float
) -> float:
    """Mean point loss over the sampled grid (the 1/(m*n) surrogate of the region objective)."""
    if not points.points:
        raise ValueError("point set is empty")
    return sum(point_loss(model, x_adv, p, neg_th) for p in points.points) / len(points.points)


def region_loss_and_grad(
    model: SegmenterAdapter, x_adv: np.ndarray, points: PointSet, neg_th: float
) -> tuple[float, np.ndarray]:
    if not points.points:
        raise ValueError("point set is empty")
    total = 0.0
    grad = np.zeros(x_adv.shape, dtype=np.float64)
    for p in points.points:
        loss_p, grad_p = point_loss_and_grad(model, x_adv, p, neg_th)
        total += loss_p
        grad += grad_p
    k = len(points.points)
    return total / k, grad / k


def pgd_project(x: np.ndarray, delta: np.ndarray, epsilon: float) -> np.ndarray:
    """Project a perturbation into the epsilon ball and the valid pixel box.

    Clamps delta into [-epsilon, epsilon], then adjusts only the entries
    where x + delta leaves [0, 1], so an already-feasible perturbation comes
    back bit-identical (projection idempotence). The adjusted entries can sit
    one ulp outside the box after re-adding to x; the ball bound is exact.
    """
    delta = np.clip(delta, -epsilon, epsilon)
    adv = x + delta
    boxed = np.clip(adv, 0.0, 1.0)
    needs_fix = boxed != adv
    if needs_fix.any():
        delta = np.where(needs_fix, boxed - x, delta)
        delta = np.clip(delta, -epsilon, epsilon)
    return delta


@dataclass
class AttackTrace:
    """Optional per-step diagnostics recorded during an attack run.

    ``losses[k]`` is the objective evaluated before step k's update (for the
    transferable attack, the mean over that step's spectrum samples), so
    ``losses[0]`` is the loss of the unperturbed image. Set ``record_deltas``
    to keep a snapshot of delta after every projection.
    """

    record_deltas: bool = False
    losses: list[float] = field(default_factory=list)
    max_abs_delta: list[float] = field(default_factory=list)
    adv_min: list[float] = field(default_factory=list)
    adv_max: list[float] = field(default_factory=list)
    deltas: list[np.ndarray] = field(default_factory=list)
    final_loss: float | None = None

    def record(self, loss: float, x: np.ndarray, delta: np.ndarray) -> None:
        self.losses.append(loss)
        self.max_abs_delta.append(float(np.abs(delta).max()))
        adv = x + delta
        self.adv_min.append(float(adv.min()))
        self.adv_max.append(float(adv.max()))
        if self.record_deltas:
            self.deltas.append(delta.copy())


def _run_pgd(
    model: SegmenterAdapter,
    x: np.ndarray,
    points: PointSet,
    cfg: AttackConfig,
    steps: int,
    rng: np.random.Generator | None,
    trace: AttackTrace | None,
) -> np.ndarray:
    """Shared PGD loop; rng=None runs plain descent, otherwise each step
    averages signed gradients over cfg.samples spectrum-transform draws."""
    if not model.has_gradient:
        raise CapabilityError(
            f"adapter {getattr(model, 'name', model)!r} cannot drive a gradient attack"
        )
    st_params = cfg.spectrum_params()
    delta = np.zeros_like(x)
    for _ in range(steps):
        if rng is None:
            x1 = np.clip(x + delta, 0.0, 1.0)
            loss, grad = region_loss_and_grad(model, x1, points, cfg.neg_th)
            update = -cfg.alpha * np.sign(grad)
        else:
            delta_sum = np.zeros_like(x)
            loss_total = 0.0
            for _ in range(cfg.samples):
                x1 = np.clip(spectrum_transform(x, st_params, rng) + delta, 0.0, 1.0)
                loss_m, grad_m = region_loss_and_grad(model, x1, points, cfg.neg_th)
                delta_sum += -cfg.alpha * np.sign(grad_m)
                loss_total += loss_m
            update = delta_sum / cfg.samples
            loss = loss_total / cfg.samples
        delta = pgd_project(x, delta + update, cfg.epsilon)
        # budget invariant, checked every iteration rather than only at exit
        assert float(np.abs(delta).max()) <= cfg.epsilon
        adv = x + delta
        assert adv.min() >= -_RANGE_TOL and adv.max() <= 1.0 + _RANGE_TOL
        if trace is not None:
            trace.record(loss, x, delta)
    adv = np.clip(x + delta, 0.0, 1.0)
    if trace is not None:
        trace.final_loss = region_loss(model, adv, points, cfg.neg_th)
    return adv


def s_ra(
    model: SegmenterAdapter,
    x: np.ndarray,
    region: Region,
    cfg: AttackConfig,
    trace: AttackTrace | None = None,
) -> np.ndarray:
    """White-box sampling-based region attack.

    Runs ``steps`` (default 40) iterations of signed gradient descent on the
    grid-sampled region loss, projecting after every step. Returns the
    adversarial image; ``x`` is not modified.
    """
    x = as_image(x)
    region.validate(x.shape[0], x.shape[1])
    points = sample_grid_points(region, cfg.lam)
    steps = 40 if cfg.steps is None else cfg.steps
    return _run_pgd(model, x, points, cfg, steps, rng=None, trace=trace)


def t_ra(
    model: SegmenterAdapter,
    x: np.ndarray,
    region: Region,
    cfg: AttackConfig,
    rng: np.random.Generator,
    trace: AttackTrace | None = None,
) -> np.ndarray:
    """Transferable region attack (spectrum-transform model augmentation).

    Per step, accumulates ``-alpha * sign(dL/dx1)`` over ``cfg.samples``
    fresh spectrum draws ``x1 = ST(x) + delta`` (gradients are taken at the
    transformed input and applied to the shared delta; the transform itself
    is not differentiated through), then applies the averaged update and
    projects. With samples=1, rho=0 and sigma=0 the trajectory reduces
    exactly to the white-box attack's.
    """
    x = as_image(x)
    region.validate(x.shape[0], x.shape[1])
    points = sample_grid_points(region, cfg.lam)
    steps = 10 if cfg.steps is None else cfg.steps
    return _run_pgd(model, x, points, cfg, steps, rng=rng, trace=trace)
