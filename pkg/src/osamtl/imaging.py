"""Pixel-level data model and one-step target abduction.

The first target is the rasterized polygon annotation (everything the
annotators circled); the second is the refinement inside it: dark pixels
(gray threshold) that sit on or next to a sharp edge (Canny, dilated).
By construction the second target's foreground is a subset of the first's.

File formats: images are 8-bit grayscale PNG; masks are 8-bit PNG with values
{0, 255}; polygons are a JSON file per image, {"polygons": [[[x, y], ...], ...]}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit grayscale image; 0 is black, 255 is white."""

    intensities: np.ndarray  # (height, width) uint8, row-major

    def __post_init__(self) -> None:
        arr = np.asarray(self.intensities, dtype=np.uint8)
        if arr.ndim != 2:
            raise ValueError("intensities must be a 2-D row-major array")
        object.__setattr__(self, "intensities", arr)

    @property
    def width(self) -> int:
        return self.intensities.shape[1]

    @property
    def height(self) -> int:
        return self.intensities.shape[0]


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Per-pixel booleans; true marks a positive pixel."""

    bits: np.ndarray  # (height, width) bool, row-major

    def __post_init__(self) -> None:
        arr = np.asarray(self.bits, dtype=bool)
        if arr.ndim != 2:
            raise ValueError("bits must be a 2-D row-major array")
        object.__setattr__(self, "bits", arr)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class Polygon:
    """Closed polygon in continuous pixel coordinates."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        vertices = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(vertices) < 3:
            raise ValueError("a polygon needs at least 3 vertices")
        object.__setattr__(self, "vertices", vertices)


@dataclass(frozen=True, eq=False)
class TargetSet:
    """The abduced training targets and their loss weights."""

    target1: BinaryMask
    target2: BinaryMask
    alphas: tuple[float, ...] = (0.5, 0.5)

    def __post_init__(self) -> None:
        alphas = tuple(float(a) for a in self.alphas)
        object.__setattr__(self, "alphas", alphas)
        if abs(sum(alphas) - 1.0) > 1e-9:
            raise ValueError("target weights must sum to 1")
        if self.target1.bits.shape != self.target2.bits.shape:
            raise ValueError("targets must share dimensions")
        if np.any(self.target2.bits & ~self.target1.bits):
            raise ValueError("the second target must be contained in the first")


@dataclass(frozen=True)
class AbductionParams:
    """Knobs of the refinement pipeline (dark-dot regime defaults)."""

    gray_threshold: int = 80
    canny_sigma: float = 1.0
    canny_low_q: float = 0.70
    canny_high_q: float = 0.90
    edge_dilate_radius: int = 1
    alphas: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self) -> None:
        if not 0.0 < self.canny_low_q < self.canny_high_q < 1.0:
            raise ValueError("quantiles must satisfy 0 < low < high < 1")
        if self.edge_dilate_radius < 0:
            raise ValueError("dilation radius must be non-negative")


def rasterize_polygons(polygons: list[Polygon], width: int, height: int) -> BinaryMask:
    """A pixel is set iff its center (x + 0.5, y + 0.5) lies inside or on the
    boundary of the union of the polygons."""
    if width <= 0 or height <= 0:
        raise ValueError("dimensions must be positive")
    mask = np.zeros((height, width), dtype=bool)
    if not polygons:
        return BinaryMask(mask)
    cx, cy = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    for polygon in polygons:
        vertices = np.asarray(polygon.vertices, dtype=np.float64)
        x1, y1 = vertices[:, 0], vertices[:, 1]
        x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
        inside = np.zeros((height, width), dtype=bool)
        on_edge = np.zeros((height, width), dtype=bool)
        for ax, ay, bx, by in zip(x1, y1, x2, y2):
            # even-odd crossing count for the open interior
            crosses = (ay > cy) != (by > cy)
            if np.any(crosses):
                xi = (bx - ax) * (cy - ay) / np.where(by == ay, 1.0, by - ay) + ax
                inside ^= crosses & (cx < xi)
            # boundary-inclusive: ties break toward inclusion
            cross = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
            within = (
                (cx >= min(ax, bx) - 1e-9)
                & (cx <= max(ax, bx) + 1e-9)
                & (cy >= min(ay, by) - 1e-9)
                & (cy <= max(ay, by) + 1e-9)
            )
            on_edge |= (np.abs(cross) <= 1e-9) & within
        mask |= inside | on_edge
    return BinaryMask(mask)


def gray_threshold(img: GrayImage, threshold: int) -> BinaryMask:
    """Dark pixels are candidate positives: true iff intensity <= threshold."""
    return BinaryMask(img.intensities <= threshold)


def _nms(magnitude: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Suppress pixels that are not local maxima along the gradient direction,
    quantized to 4 directions; out-of-border neighbors count as zero."""
    angle = np.mod(np.arctan2(gy, gx), np.pi)
    quantized = np.zeros(angle.shape, dtype=np.int8)
    quantized[(angle >= np.pi / 8) & (angle < 3 * np.pi / 8)] = 1   # diagonal /
    quantized[(angle >= 3 * np.pi / 8) & (angle < 5 * np.pi / 8)] = 2  # vertical gradient
    quantized[(angle >= 5 * np.pi / 8) & (angle < 7 * np.pi / 8)] = 3  # diagonal \

    padded = np.pad(magnitude, 1, mode="constant")
    offsets = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}  # (dy, dx) per direction
    keep = np.zeros(magnitude.shape, dtype=bool)
    h, w = magnitude.shape
    for direction, (dy, dx) in offsets.items():
        ahead = padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        behind = padded[1 - dy : 1 - dy + h, 1 - dx : 1 - dx + w]
        selected = quantized == direction
        keep |= selected & (magnitude >= ahead) & (magnitude >= behind)
    return keep & (magnitude > 0)


def canny(img: GrayImage, sigma: float = 1.0, low_q: float = 0.70, high_q: float = 0.90) -> BinaryMask:
    """Edge mask: Gaussian smoothing, central-difference gradient, non-maximum
    suppression over 4 quantized directions, hysteresis with thresholds at the
    low_q/high_q quantiles of the nonzero gradient magnitudes.

    Quantile thresholds make the result invariant under positive affine
    intensity rescaling that does not saturate. An all-constant image has zero
    gradient everywhere and yields an empty mask.
    """
    if img.height < 3 or img.width < 3:
        raise ValueError("image must be at least 3x3")
    if not 0.0 < low_q < high_q < 1.0:
        raise ValueError("quantiles must satisfy 0 < low < high < 1")
    smoothed = ndimage.gaussian_filter(img.intensities.astype(np.float64) / 255.0, sigma, mode="nearest")
    gy, gx = np.gradient(smoothed)
    magnitude = np.hypot(gx, gy)
    nonzero = magnitude[magnitude > 0]
    if nonzero.size == 0:
        return BinaryMask(np.zeros(magnitude.shape, dtype=bool))
    low, high = np.quantile(nonzero, [low_q, high_q])
    maxima = _nms(magnitude, gx, gy)
    weak = maxima & (magnitude >= low)
    strong = maxima & (magnitude >= high)
    # keep weak components connected (8-way) to a strong pixel
    labels, _ = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    strong_labels = np.unique(labels[strong])
    edges = weak & np.isin(labels, strong_labels[strong_labels > 0])
    return BinaryMask(edges)


def dilate(mask: BinaryMask, radius: int) -> BinaryMask:
    """Chebyshev dilation: grow by a (2r+1) x (2r+1) square."""
    if radius < 0:
        raise ValueError("dilation radius must be non-negative")
    if radius == 0:
        return BinaryMask(mask.bits.copy())
    footprint = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    return BinaryMask(ndimage.binary_dilation(mask.bits, structure=footprint))


def abduce_targets(img: GrayImage, polygons: list[Polygon], params: AbductionParams | None = None) -> TargetSet:
    """One-step target abduction.

    target1 rasterizes the polygon annotations; target2 keeps only its dark
    pixels on or next to a sharp edge. target2 is a subset of target1 by
    construction (conjunction), whatever the image contains.
    """
    params = params or AbductionParams()
    target1 = rasterize_polygons(polygons, img.width, img.height)
    dark = gray_threshold(img, params.gray_threshold)
    edges = canny(img, params.canny_sigma, params.canny_low_q, params.canny_high_q)
    band = dilate(edges, params.edge_dilate_radius)
    target2 = BinaryMask(target1.bits & dark.bits & band.bits)
    return TargetSet(target1, target2, params.alphas)


# ---------------------------------------------------------------------------
# file formats


def load_image(path: Path | str) -> GrayImage:
    """Load a PNG; color inputs collapse to the channel mean."""
    with Image.open(path) as handle:
        arr = np.asarray(handle)
    if arr.ndim == 3:
        arr = np.round(arr[..., :3].astype(np.float64).mean(axis=2)).astype(np.uint8)
    return GrayImage(arr.astype(np.uint8))


def save_image(img: GrayImage, path: Path | str) -> None:
    Image.fromarray(img.intensities, mode="L").save(path, format="PNG")


def load_mask(path: Path | str, like: GrayImage | None = None) -> BinaryMask:
    """Load a {0, 255} mask PNG; dimensions must match `like` when given."""
    with Image.open(path) as handle:
        arr = np.asarray(handle)
    if arr.ndim != 2:
        raise ValueError(f"mask {path} must be single-channel")
    values = np.unique(arr)
    if not np.isin(values, (0, 255)).all():
        raise ValueError(f"mask {path} must contain only 0 and 255")
    if like is not None and arr.shape != like.intensities.shape:
        raise ValueError(f"mask {path} dimensions do not match the paired image")
    return BinaryMask(arr == 255)


def save_mask(mask: BinaryMask, path: Path | str) -> None:
    Image.fromarray(np.where(mask.bits, 255, 0).astype(np.uint8), mode="L").save(path, format="PNG")


def load_polygons(path: Path | str, like: GrayImage | None = None) -> list[Polygon]:
    with open(path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    if not isinstance(payload, dict) or "polygons" not in payload:
        raise ValueError(f"{path} must be an object with a 'polygons' list")
    polygons = [Polygon(tuple((float(x), float(y)) for x, y in ring)) for ring in payload["polygons"]]
    if like is not None:
        for polygon in polygons:
            for x, y in polygon.vertices:
                if not (0 <= x <= like.width and 0 <= y <= like.height):
                    raise ValueError(f"{path} has vertices outside the paired image")
    return polygons


def save_polygons(polygons: list[Polygon], path: Path | str) -> None:
    payload = {"polygons": [[[x, y] for x, y in polygon.vertices] for polygon in polygons]}
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, sort_keys=True)
        handle.write("\n")
