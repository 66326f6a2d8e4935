"""Checkpoint-backed adapter for SAM-family models (optional dependency).

Requires ``torch`` and the ``segment-anything`` package plus a local
checkpoint file; none of these ship with this library. The adapter exposes a
point-prompted forward pass returning the full-resolution logit map of the
highest-scoring mask head, and a vector-Jacobian product computed with torch
autograd through the image encoder, so white-box attacks work on real
checkpoints. See the README adapter guide for setup and caveats.
"""

from __future__ import annotations

import numpy as np

from .segmenter import PointPrompt


class SamPointAdapter:
    """Point-prompt adapter around a segment-anything checkpoint.

    Mask-head selection: SAM emits several candidate masks per prompt; this
    adapter always works with the head whose predicted IoU score is highest
    on the clean forward pass convention (argmax per call). Images are
    resized so the longest side is 1024, normalized with the model's pixel
    statistics and padded, matching the upstream preprocessing.
    """

    def __init__(self, variant: str, checkpoint: str, device: str | None = None):
        try:
            import torch
            from segment_anything import sam_model_registry
        except ImportError as exc:
            raise ImportError(
                "SAM adapters need the optional dependencies 'torch' and "
                "'segment-anything' (pip install segment-anything)"
            ) from exc

        self._torch = torch
        self.name = f"{variant}:{checkpoint}"
        self.has_gradient = True
        self.concurrent_safe = False
        self.device = device or ("cuda" if torch.cuda.is_available() else "cpu")
        self._sam = sam_model_registry[variant](checkpoint=checkpoint)
        self._sam.to(self.device)
        self._sam.eval()

    def _embed(self, image: np.ndarray, prompt: PointPrompt, needs_grad: bool):
        torch = self._torch
        sam = self._sam
        h, w = image.shape[:2]
        scale = sam.image_encoder.img_size / max(h, w)
        new_h, new_w = int(round(h * scale)), int(round(w * scale))

        x = torch.from_numpy(image).to(self.device, dtype=torch.float32)
        x = x.permute(2, 0, 1).unsqueeze(0) * 255.0
        if needs_grad:
            x.requires_grad_(True)
        resized = torch.nn.functional.interpolate(
            x, size=(new_h, new_w), mode="bilinear", align_corners=False
        )
        padded = torch.nn.functional.pad(
            (resized - sam.pixel_mean) / sam.pixel_std,
            (0, sam.image_encoder.img_size - new_w, 0, sam.image_encoder.img_size - new_h),
        )
        embedding = sam.image_encoder(padded)

        coords = torch.tensor(
            [[[(prompt.col + 0.5) * scale, (prompt.row + 0.5) * scale]]],
            dtype=torch.float32,
            device=self.device,
        )
        labels = torch.ones((1, 1), dtype=torch.int64, device=self.device)
        sparse, dense = sam.prompt_encoder(points=(coords, labels), boxes=None, masks=None)
        low_res, iou_pred = sam.mask_decoder(
            image_embeddings=embedding,
            image_pe=sam.prompt_encoder.get_dense_pe(),
            sparse_prompt_embeddings=sparse,
            dense_prompt_embeddings=dense,
            multimask_output=True,
        )
        best = int(iou_pred[0].argmax())
        logits = sam.postprocess_masks(
            low_res[:, best : best + 1], input_size=(new_h, new_w), original_size=(h, w)
        )[0, 0]
        return x, logits

    def forward(self, prompt: PointPrompt, image: np.ndarray) -> np.ndarray:
        with self._torch.no_grad():
            _, logits = self._embed(image, prompt, needs_grad=False)
        return logits.detach().cpu().numpy().astype(np.float64)

    def gradient(
        self, prompt: PointPrompt, image: np.ndarray, cotangent: np.ndarray
    ) -> np.ndarray:
        torch = self._torch
        x, logits = self._embed(image, prompt, needs_grad=True)
        cot = torch.from_numpy(np.asarray(cotangent)).to(logits)
        (logits * cot).sum().backward()
        grad = x.grad[0].permute(1, 2, 0).detach().cpu().numpy().astype(np.float64)
        return grad * 255.0  # forward scales [0,1] pixels by 255
