"""Promptable-segmenter contract, a differentiable toy segmenter, and the adapter registry.

A segmenter maps (point prompt, image) to a per-pixel logit map; pixels with
logits above zero form the predicted binary mask. Real checkpoint-backed
models plug in behind the same :class:`SegmenterAdapter` contract (see the
adapter guide in the README); the built-in toy segmenter is an analytic,
fully differentiable stand-in used for desk-scale testing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol, runtime_checkable

import numpy as np


class CapabilityError(RuntimeError):
    """Raised when an adapter lacks a capability the caller requires (e.g. gradients)."""


@dataclass(frozen=True)
class PointPrompt:
    """A single foreground click at pixel (row, col)."""

    row: int
    col: int

    def validate(self, height: int, width: int) -> None:
        if not (0 <= self.row < height and 0 <= self.col < width):
            raise ValueError(
                f"prompt ({self.row}, {self.col}) outside image bounds {height}x{width}"
            )


def as_image(x: np.ndarray) -> np.ndarray:
    """Validate and return an H x W x C float64 image with values in [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError(f"image must be H x W x C, got shape {x.shape}")
    if x.shape[0] < 1 or x.shape[1] < 1:
        raise ValueError(f"image must have H, W >= 1, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("image contains non-finite values")
    if x.min() < 0.0 or x.max() > 1.0:
        raise ValueError(
            f"image values must lie in [0, 1], got range [{x.min()}, {x.max()}]"
        )
    return x


def binarize(logits: np.ndarray) -> np.ndarray:
    """Threshold a logit map into a boolean mask (strictly positive logits)."""
    return np.asarray(logits) > 0.0


@runtime_checkable
class SegmenterAdapter(Protocol):
    """Behavioral contract every segmenter backend implements.

    ``forward`` must be deterministic for fixed inputs. When ``has_gradient``
    is true, ``gradient`` returns the vector-Jacobian product of ``forward``
    with respect to the image: given an upstream cotangent of the logit map
    (H x W), it returns an image-shaped (H x W x C) gradient.
    ``concurrent_safe`` declares whether one instance tolerates concurrent
    ``forward`` calls.
    """

    name: str
    has_gradient: bool
    concurrent_safe: bool

    def forward(self, prompt: PointPrompt, image: np.ndarray) -> np.ndarray: ...

    def gradient(
        self, prompt: PointPrompt, image: np.ndarray, cotangent: np.ndarray
    ) -> np.ndarray: ...


def predict_logits(
    model: SegmenterAdapter, prompt: PointPrompt, image: np.ndarray
) -> np.ndarray:
    """Run one forward pass, validating the prompt against the image bounds."""
    image = as_image(image)
    prompt.validate(image.shape[0], image.shape[1])
    try:
        logits = model.forward(prompt, image)
    except Exception as exc:  # surface adapter failures with context
        raise RuntimeError(
            f"adapter {getattr(model, 'name', model)!r} failed on prompt "
            f"({prompt.row}, {prompt.col})"
        ) from exc
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape != image.shape[:2]:
        raise ValueError(
            f"adapter returned logits of shape {logits.shape}, expected {image.shape[:2]}"
        )
    return logits


@dataclass(frozen=True)
class ToyParams:
    """Toy segmenter constants.

    gain: logit scale per unit of squared color distance.
    tau: squared color distance at which the logit crosses zero.

    Defaults put clean logits on the synthetic corpus roughly in [-1, +1.25],
    far above the usual attack floor of -10, so attacks have headroom.
    """

    gain: float = 25.0
    tau: float = 0.05


class ToySegmenter:
    """Analytic color-threshold segmenter.

    logits[i, j] = gain * (tau - ||x[i, j] - x[prompt]||^2)

    A pixel is masked when its color lies within sqrt(tau) of the prompt
    pixel's color, so a click on a uniformly colored object selects the
    object. The map is smooth in the image, with a closed-form
    vector-Jacobian product (both the pixel and the prompt-pixel color carry
    gradient).
    """

    def __init__(self, params: ToyParams | None = None, name: str = "toy"):
        self.params = params or ToyParams()
        self.name = name
        self.has_gradient = True
        self.concurrent_safe = True

    def forward(self, prompt: PointPrompt, image: np.ndarray) -> np.ndarray:
        diff = image - image[prompt.row, prompt.col]
        sq_dist = np.einsum("hwc,hwc->hw", diff, diff)
        return self.params.gain * (self.params.tau - sq_dist)

    def gradient(
        self, prompt: PointPrompt, image: np.ndarray, cotangent: np.ndarray
    ) -> np.ndarray:
        g = self.params.gain
        diff = image - image[prompt.row, prompt.col]
        # d logits[i,j] / d x[i,j,:] = -2 g diff[i,j,:]
        # d logits[i,j] / d x[p,:]  = +2 g diff[i,j,:]
        grad = -2.0 * g * cotangent[:, :, None] * diff
        grad[prompt.row, prompt.col] += 2.0 * g * np.einsum("hw,hwc->c", cotangent, diff)
        return grad


def check_adapter_gradient(
    model: SegmenterAdapter,
    image: np.ndarray,
    prompt: PointPrompt,
    rng: np.random.Generator,
    probes: int = 10,
    step: float = 1e-5,
) -> float:
    """Max relative error of the adapter's VJP against central finite differences.

    Each probe contracts the logit map with a random cotangent and compares
    the directional derivative along a random image direction. The image is
    pulled away from the [0, 1] walls so the probes stay valid inputs.
    Adapters with ``has_gradient`` should stay below 1e-3 here.
    """
    if not model.has_gradient:
        raise CapabilityError(f"adapter {getattr(model, 'name', model)!r} has no gradient")
    x = np.clip(as_image(image), 2 * step, 1.0 - 2 * step)
    worst = 0.0
    for _ in range(probes):
        cot = rng.standard_normal(x.shape[:2])
        direction = rng.standard_normal(x.shape)
        direction /= np.abs(direction).max()
        analytic = float(np.sum(model.gradient(prompt, x, cot) * direction))
        up = float(np.sum(cot * model.forward(prompt, x + step * direction)))
        down = float(np.sum(cot * model.forward(prompt, x - step * direction)))
        fd = (up - down) / (2.0 * step)
        denom = max(abs(fd), abs(analytic), 1e-12)
        worst = max(worst, abs(analytic - fd) / denom)
    return worst


_REGISTRY: dict[str, Callable[[dict[str, str]], SegmenterAdapter]] = {}


def register_adapter(name: str, factory: Callable[[dict[str, str]], SegmenterAdapter]) -> None:
    """Register an adapter factory under a registry name."""
    _REGISTRY[name] = factory


def available_adapters() -> list[str]:
    return sorted(_REGISTRY)


def parse_model_spec(spec: str) -> tuple[str, dict[str, str]]:
    """Split ``"name"`` or ``"name:key=val,key=val"`` into (name, kwargs)."""
    name, _, argstr = spec.partition(":")
    args: dict[str, str] = {}
    if argstr:
        for item in argstr.split(","):
            key, sep, value = item.partition("=")
            if not sep or not key.strip():
                raise ValueError(f"malformed model argument {item!r} in spec {spec!r}")
            args[key.strip()] = value.strip()
    return name.strip(), args


def create_adapter(spec: str) -> SegmenterAdapter:
    """Instantiate an adapter from a registry spec string, e.g. ``"toy:g=15,tau=0.08"``."""
    name, args = parse_model_spec(spec)
    if name not in _REGISTRY:
        raise KeyError(
            f"unknown model {name!r}; registered adapters: {available_adapters()}"
        )
    return _REGISTRY[name](args)


def _toy_factory(args: dict[str, str]) -> ToySegmenter:
    defaults = ToyParams()
    gain = float(args.pop("g", args.pop("gain", defaults.gain)))
    tau = float(args.pop("tau", defaults.tau))
    if args:
        raise ValueError(f"unknown toy segmenter arguments: {sorted(args)}")
    suffix = "" if (gain, tau) == (defaults.gain, defaults.tau) else f":g={gain:g},tau={tau:g}"
    return ToySegmenter(ToyParams(gain=gain, tau=tau), name=f"toy{suffix}")


def _sam_factory(variant: str) -> Callable[[dict[str, str]], SegmenterAdapter]:
    def factory(args: dict[str, str]) -> SegmenterAdapter:
        from .sam_adapter import SamPointAdapter

        checkpoint = args.pop("checkpoint", None)
        if checkpoint is None:
            raise ValueError(
                f"model '{variant}' needs a checkpoint, e.g. "
                f"'{variant}:checkpoint=/path/to/weights.pth'"
            )
        if args:
            raise ValueError(f"unknown {variant} arguments: {sorted(args)}")
        return SamPointAdapter(variant=variant, checkpoint=checkpoint)

    return factory


register_adapter("toy", _toy_factory)
for _variant in ("vit_b", "vit_l", "vit_h"):
    register_adapter(_variant, _sam_factory(_variant))
