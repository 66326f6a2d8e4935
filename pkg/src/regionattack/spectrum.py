"""Frequency-domain primitives: per-channel 2D DCT and the random spectrum transform.

The spectrum transform perturbs an image in the frequency domain,
``idct2(dct2(x + noise) * mask)``, where ``noise`` is Gaussian pixel noise and
``mask`` rescales every DCT coefficient by a uniform random factor around 1.
It is used as model augmentation by the transferable region attack: each draw
simulates a slightly different victim model's frequency sensitivity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft


@dataclass(frozen=True)
class SpectrumParams:
    """Parameters of the random spectrum transform.

    rho: coefficient mask strength; mask entries are drawn from
        U(1 - rho, 1 + rho). 0 disables the mask.
    sigma: standard deviation of the additive Gaussian pixel noise,
        in the same units as pixel values. 0 disables the noise.
    """

    rho: float = 0.1
    sigma: float = 8.0 / 255.0

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must be in [0, 1), got {self.rho}")
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


def _check_finite(arr: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def dct2(image: np.ndarray) -> np.ndarray:
    """Orthonormal type-II 2D DCT over the spatial axes, per channel.

    Accepts H x W or H x W x C arrays; the output has the same shape.
    Orthonormal scaling makes the transform an isometry (Parseval holds),
    so ``idct2`` inverts it without rescaling.
    """
    image = _check_finite(image, "image")
    return scipy.fft.dctn(image, type=2, axes=(0, 1), norm="ortho")


def idct2(spectrum: np.ndarray, shape: tuple[int, ...] | None = None) -> np.ndarray:
    """Inverse of :func:`dct2` (orthonormal type-III 2D DCT per channel).

    If ``shape`` is given, the spectrum must match it exactly; this guards
    callers that carry the image geometry separately.
    """
    spectrum = _check_finite(spectrum, "spectrum")
    if shape is not None and tuple(spectrum.shape) != tuple(shape):
        raise ValueError(
            f"spectrum shape {spectrum.shape} does not match declared image shape {tuple(shape)}"
        )
    return scipy.fft.idctn(spectrum, type=2, axes=(0, 1), norm="ortho")


def spectrum_transform(
    x: np.ndarray, params: SpectrumParams, rng: np.random.Generator
) -> np.ndarray:
    """Apply one random spectrum transform draw to ``x``.

    Returns ``idct2(dct2(x + noise) * mask)`` with ``noise ~ N(0, sigma^2 I)``
    and ``mask`` elementwise ``~ U(1 - rho, 1 + rho)``. Fresh noise and mask
    are drawn from ``rng`` on every call. The output may leave the [0, 1]
    pixel range; callers clamp before feeding a model.

    With rho == 0 and sigma == 0 the transform is the exact identity (the
    round trip is skipped so no float error is introduced).
    """
    x = _check_finite(x, "x")
    if params.rho == 0.0 and params.sigma == 0.0:
        return x.copy()
    noise = rng.normal(0.0, params.sigma, size=x.shape) if params.sigma > 0.0 else 0.0
    mask = rng.uniform(1.0 - params.rho, 1.0 + params.rho, size=x.shape)
    return idct2(dct2(x + noise) * mask)
