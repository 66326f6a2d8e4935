"""Synthetic desk-scale corpus generation and on-disk corpus format.

Each generated image holds a textured target rectangle (exactly covered by
the recorded attack region) plus a few decorative disks on a strongly
contrasting background. The target texture mixes three pixel populations
chosen for the color-threshold toy segmenter:

- lattice pixels: the base color offset by one of eight sign combinations of
  per-channel half-gaps. The three gap sizes are graded so that, under an
  L-infinity attack, cross-population color distances cross the toy mask
  threshold at successively larger budgets, which makes measured mask damage
  grow with epsilon.
- blend pixels: the base color plus small continuous jitter; their gradient
  signs are unstable under plain descent but drift coherently when gradients
  are averaged over spectrum-transform draws, so they separate the
  transferable attack from the white-box one on a second evaluation model.
- ring pixels: the base color offset along one image-wide diagonal, sitting
  near the outer edge of the toy mask ball.

Backgrounds and decorations stay far from the whole target color cloud, so
masks prompted inside the region never touch them.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .attack import Region
from .segmenter import PointPrompt, ToySegmenter, binarize

_CORPUS_TAG = 3  # seed-stream tag, keep distinct from the sweep module's tags


@dataclass(frozen=True)
class CorpusGeometry:
    """Shape and texture constants for synthetic corpus images."""

    height: int = 64
    width: int = 64
    region_frac: float = 1.0 / 3.0
    min_decorations: int = 1
    max_decorations: int = 3
    lattice_gaps: tuple[float, float, float] = (0.204, 0.176, 0.132)
    blend_amplitude: float = 0.04
    ring_offset: float = 0.127
    class_weights: tuple[float, float, float] = (0.70, 0.15, 0.15)

    def region_size(self) -> tuple[int, int]:
        return (
            max(1, round(self.height * self.region_frac)),
            max(1, round(self.width * self.region_frac)),
        )


@dataclass
class CorpusImage:
    image_id: str
    image: np.ndarray
    region: Region


def _textured_target(
    rng: np.random.Generator, base: np.ndarray, h: int, w: int, geo: CorpusGeometry
) -> np.ndarray:
    cls = rng.choice(3, size=(h, w), p=np.asarray(geo.class_weights))
    signs = rng.integers(0, 2, size=(h, w, 3)) * 2 - 1
    ring_sign = rng.integers(0, 2, size=3) * 2 - 1
    blend = rng.uniform(-geo.blend_amplitude, geo.blend_amplitude, size=(h, w, 3))

    half = np.asarray(geo.lattice_gaps) / 2.0
    tex = base + signs * half
    tex = np.where(cls[..., None] == 1, base + blend, tex)
    tex = np.where(cls[..., None] == 2, base + ring_sign * geo.ring_offset, tex)
    return tex


def _far_corner(base: np.ndarray) -> np.ndarray:
    """Color-cube corner far from the base color (inset to leave jitter room)."""
    corner = np.where(base >= 0.5, 0.05, 0.95)
    return corner


def generate_synthetic_corpus(
    n: int, geometry: CorpusGeometry | None = None, seed: int = 0
) -> list[CorpusImage]:
    """Generate ``n`` synthetic images with recorded attack regions.

    Deterministic for a given (n, geometry, seed). Each image is checked at
    generation time: the toy segmenter prompted at the region center must
    produce a nonempty mask.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    geo = geometry or CorpusGeometry()
    rh, rw = geo.region_size()
    if rh > geo.height or rw > geo.width:
        raise ValueError(f"region {rh}x{rw} does not fit image {geo.height}x{geo.width}")
    toy = ToySegmenter()
    images = []
    for idx in range(n):
        rng = np.random.default_rng(np.random.SeedSequence((seed, _CORPUS_TAG, idx)))
        base = rng.uniform(0.25, 0.75, size=3)

        top = int(rng.integers(0, geo.height - rh + 1))
        left = int(rng.integers(0, geo.width - rw + 1))
        region = Region(top=top, left=left, height=rh, width=rw)

        bg = np.clip(_far_corner(base) + rng.uniform(-0.02, 0.02, size=3), 0.0, 1.0)
        img = np.broadcast_to(bg, (geo.height, geo.width, 3)).copy()
        img += rng.uniform(-0.015, 0.015, size=img.shape)
        img = np.clip(img, 0.0, 1.0)

        # decorative disks, placed clear of the region so they never carry a prompt
        n_deco = int(rng.integers(geo.min_decorations, geo.max_decorations + 1))
        rows, cols = np.mgrid[0 : geo.height, 0 : geo.width]
        for _ in range(n_deco):
            for _attempt in range(50):
                radius = int(rng.integers(4, max(5, min(geo.height, geo.width) // 6)))
                cy = int(rng.integers(radius, geo.height - radius))
                cx = int(rng.integers(radius, geo.width - radius))
                if (
                    cy + radius < top
                    or cy - radius > top + rh - 1
                    or cx + radius < left
                    or cx - radius > left + rw - 1
                ):
                    t = rng.uniform(0.75, 0.9)
                    deco = np.clip(
                        base + t * (_far_corner(base) - base) + rng.uniform(-0.02, 0.02, 3),
                        0.0,
                        1.0,
                    )
                    disk = (rows - cy) ** 2 + (cols - cx) ** 2 <= radius**2
                    img[disk] = deco
                    break

        img[top : top + rh, left : left + rw] = _textured_target(rng, base, rh, rw, geo)
        img = np.clip(img, 0.0, 1.0)

        center = PointPrompt(row=top + rh // 2, col=left + rw // 2)
        mask = binarize(toy.forward(center, img))
        if not mask.any():
            raise RuntimeError(f"generated image {idx} has an empty clean mask at the region center")

        images.append(CorpusImage(image_id=f"img{idx:04d}", image=img, region=region))
    return images


def save_corpus(images: list[CorpusImage], out_dir: str | Path, seed: int | None = None) -> Path:
    """Write a corpus directory: one .npy per image, 8-bit previews, and a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"images": []}
    if seed is not None:
        manifest["seed"] = seed
    for item in images:
        np.save(out / f"{item.image_id}.npy", item.image)
        preview = np.clip(np.rint(item.image * 255.0), 0, 255).astype(np.uint8)
        PILImage.fromarray(preview).save(out / f"{item.image_id}.png")
        manifest["images"].append(
            {
                "id": item.image_id,
                "file": f"{item.image_id}.npy",
                "region": asdict(item.region),
            }
        )
    (out / "corpus.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return out


def load_corpus(corpus_dir: str | Path) -> list[CorpusImage]:
    """Load a corpus directory written by :func:`save_corpus`."""
    root = Path(corpus_dir)
    manifest_path = root / "corpus.json"
    if not manifest_path.is_file():
        raise FileNotFoundError(f"no corpus manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    images = []
    for entry in manifest["images"]:
        arr = np.load(root / entry["file"])
        images.append(
            CorpusImage(
                image_id=entry["id"],
                image=np.asarray(arr, dtype=np.float64),
                region=Region(**entry["region"]),
            )
        )
    return images
