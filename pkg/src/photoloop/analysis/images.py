"""Seeded synthetic photographs for offline experiments and fixtures."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from ..core import PixelImage


def synthetic_photo(seed: int, height: int = 96, width: int = 128) -> PixelImage:
    """A smooth multi-scale colour field with a few hard-edged shapes.

    Exposure, contrast and saturation vary with the seed so that a batch
    covers under-, over- and well-exposed inputs.
    """
    rng = np.random.default_rng(seed)
    px = np.zeros((height, width, 3))
    for sigma, amp in ((16.0, 1.0), (4.0, 0.35), (1.0, 0.12)):
        field = gaussian_filter(rng.standard_normal((height, width, 3)), sigma=(sigma, sigma, 0), mode="reflect")
        px += amp * field / (field.std() + 1e-12)
    px = px / (np.abs(px).max() + 1e-12)
    for _ in range(int(rng.integers(2, 6))):
        y0, x0 = int(rng.integers(0, height - 8)), int(rng.integers(0, width - 8))
        h, w = int(rng.integers(6, height // 2)), int(rng.integers(6, width // 2))
        px[y0:y0 + h, x0:x0 + w] = rng.uniform(-1, 1, 3)
    exposure = rng.uniform(0.25, 0.7)
    spread = rng.uniform(0.1, 0.35)
    grey = px.mean(axis=2, keepdims=True)
    px = grey + rng.uniform(0.3, 1.2) * (px - grey)
    return PixelImage.from_array(exposure + spread * px, clip=True)


def synthetic_photos(n: int, seed: int = 0, height: int = 96, width: int = 128) -> list[PixelImage]:
    return [synthetic_photo(seed * 1000 + i, height, width) for i in range(n)]
