"""Handcrafted per-pixel features for the logistic classifier."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..imaging import GrayImage

FEATURE_NAMES = ("bias", "intensity", "blur", "gradient", "local_min")
FEATURE_COUNT = len(FEATURE_NAMES)


def extract_features(img: GrayImage) -> np.ndarray:
    """Per-pixel feature stack, shape (height, width, 5).

    Features: a constant 1, the intensity, a sigma-2 Gaussian blur, the
    gradient magnitude, and the 3x3 local minimum.  Intensity-like values
    are scaled into [0, 1] and the gradient magnitude is divided by
    sqrt(2) so no feature exceeds 1.
    """
    scaled = img.intensities.astype(np.float64) / 255.0
    blurred = ndimage.gaussian_filter(scaled, sigma=2.0, mode="nearest")
    gy, gx = np.gradient(scaled)
    grad = np.hypot(gx, gy) / np.sqrt(2.0)
    local_min = ndimage.minimum_filter(scaled, size=3, mode="nearest")
    return np.stack([np.ones_like(scaled), scaled, blurred, grad, local_min], axis=-1)
