"""Linear latent-to-RGB preview decoding.

A diffusion pipeline's intermediate latents can be previewed without the
full image decoder: an affine-free per-pixel matrix multiply from the C
latent channels to RGB is a good enough approximation for a VLM to answer
coarse questions about. The shipped preset maps the common 4-channel
latent space; other latent spaces take their matrix from the session
config.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeMismatch

# Preset 3x4 map from 4 latent channels to RGB; columns are per-channel
# colors (channel 0 contributes equally to R, G and B).
SDXL_PREVIEW_MATRIX = np.array(
    [
        [60.0, -60.0, 25.0, -70.0],
        [60.0, -5.0, 15.0, -50.0],
        [60.0, 10.0, -5.0, -35.0],
    ]
)

DISPLAY_RANGE = (0.0, 255.0)


def _validate(latent: np.ndarray, matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    latent = np.asarray(latent, dtype=float)
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != 3:
        raise ShapeMismatch(f"matrix must be 3 x C, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ShapeMismatch("matrix entries must be finite")
    if latent.ndim != 3:
        raise ShapeMismatch(f"latent must be C x H x W, got shape {latent.shape}")
    if latent.shape[0] != matrix.shape[1]:
        raise ShapeMismatch(
            f"latent has {latent.shape[0]} channels, matrix expects {matrix.shape[1]}"
        )
    return latent, matrix


def linear_decode(
    latent: np.ndarray,
    matrix: np.ndarray = SDXL_PREVIEW_MATRIX,
    clamp: bool = True,
) -> np.ndarray:
    """Per-pixel matrix multiply from a C x H x W latent to a 3 x H x W RGB
    preview, clamped to the display range unless ``clamp=False``.

    The pre-clamp map is exactly linear in the latent.
    """
    latent, matrix = _validate(latent, matrix)
    rgb = np.einsum("rc,chw->rhw", matrix, latent)
    if clamp:
        rgb = np.clip(rgb, *DISPLAY_RANGE)
    return rgb
