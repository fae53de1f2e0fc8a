"""Synthetic dot corpus with loose polygon labels and exact ground truth.

Each patch is a bright textured field carrying several object populations:

* sharp dark dots inside the labeled regions (the real targets),
* faint blurred dots inside the regions whose dark cores sit below the
  edge detector's reach, so the refined target only clips their rims,
* sharp decoy dots strictly outside every labeled region (lookalikes a
  per-pixel feature model cannot tell apart from the real thing),
* mid-gray distractor blobs, mostly inside the regions, that are too
  bright to pass the darkness threshold.

Polygons are convex hulls of the true-dot clusters inflated by
``polygon_slack``, which guarantees label recall 1.0 by construction
while keeping label precision below one half.  Generation is a pure
function of (seed, index), so any parallel schedule produces identical
bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull

from .imaging import (
    BinaryMask,
    GrayImage,
    Polygon,
    load_image,
    load_mask,
    load_polygons,
    rasterize_polygons,
    save_image,
    save_mask,
    save_polygons,
)

DARK_LEVEL = 80  # true dot cores are stamped at or below this intensity


class GenerationError(RuntimeError):
    """Raised when a patch cannot satisfy the labeling invariants."""


def _check_range(name: str, lo, hi, minimum=None) -> None:
    if lo > hi:
        raise ValueError(f"{name} range is empty")
    if minimum is not None and lo < minimum:
        raise ValueError(f"{name} must be at least {minimum}")


@dataclass(frozen=True)
class GenParams:
    """Knobs of the synthetic regime; defaults give 64x64 patches."""

    patch_size: int = 64
    dots_per_patch: tuple[int, int] = (7, 12)
    dot_radius: tuple[float, float] = (1.7, 3.4)
    dot_intensity: tuple[int, int] = (10, 45)
    background_intensity: tuple[int, int] = (185, 215)
    texture_noise_std: float = 5.0
    polygon_slack: float = 6.0
    seed: int = 0
    soft_dots_per_patch: tuple[int, int] = (3, 6)
    soft_dot_intensity: tuple[int, int] = (48, 62)
    soft_dot_sigma: tuple[float, float] = (1.8, 2.6)
    decoys_per_patch: tuple[int, int] = (3, 6)
    decoy_radius: tuple[float, float] = (1.7, 2.3)
    distractors_per_patch: tuple[int, int] = (2, 4)
    distractor_intensity: tuple[int, int] = (115, 150)
    distractor_radius: tuple[float, float] = (3.0, 5.0)
    distractor_inside_fraction: float = 0.7

    def __post_init__(self) -> None:
        if self.patch_size < 32:
            raise ValueError("patch_size must be at least 32")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        _check_range("dots_per_patch", *self.dots_per_patch, minimum=1)
        _check_range("dot_radius", *self.dot_radius, minimum=1.0)
        _check_range("dot_intensity", *self.dot_intensity, minimum=0)
        if self.dot_intensity[1] > DARK_LEVEL - 20:
            raise ValueError(f"dot_intensity must stay below {DARK_LEVEL - 20}")
        _check_range("background_intensity", *self.background_intensity, minimum=150)
        if self.background_intensity[1] > 255:
            raise ValueError("background_intensity must stay within 8 bits")
        if self.texture_noise_std < 0:
            raise ValueError("texture_noise_std must be non-negative")
        if self.polygon_slack < self.dot_radius[1]:
            raise ValueError("polygon_slack must be at least the largest dot radius")
        _check_range("soft_dots_per_patch", *self.soft_dots_per_patch, minimum=0)
        _check_range("soft_dot_intensity", *self.soft_dot_intensity, minimum=20)
        if self.soft_dot_intensity[1] > DARK_LEVEL:
            raise ValueError(f"soft_dot_intensity must stay at or below {DARK_LEVEL}")
        _check_range("soft_dot_sigma", *self.soft_dot_sigma, minimum=1.0)
        _check_range("decoys_per_patch", *self.decoys_per_patch, minimum=0)
        _check_range("decoy_radius", *self.decoy_radius, minimum=1.0)
        _check_range("distractors_per_patch", *self.distractors_per_patch, minimum=0)
        _check_range("distractor_intensity", *self.distractor_intensity,
                     minimum=DARK_LEVEL + 30)
        _check_range("distractor_radius", *self.distractor_radius, minimum=1.0)
        if not 0.0 <= self.distractor_inside_fraction <= 1.0:
            raise ValueError("distractor_inside_fraction must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class LabeledPatch:
    """A generated patch: image, exact ground truth, and loose labels."""

    image: GrayImage
    true_mask: BinaryMask
    polygons: tuple[Polygon, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "polygons", tuple(self.polygons))


def _centre_distances(size: int, x: float, y: float) -> np.ndarray:
    """Distance from every pixel centre to the point (x, y)."""
    ys, xs = np.mgrid[0:size, 0:size]
    return np.hypot(xs + 0.5 - x, ys + 0.5 - y)


def _sample_count(rng: np.random.Generator, bounds: tuple[int, int]) -> int:
    return int(rng.integers(bounds[0], bounds[1], endpoint=True))


def _cluster_hull(points: np.ndarray) -> Polygon:
    hull = ConvexHull(points)
    vertices = [(float(points[i, 0]), float(points[i, 1])) for i in hull.vertices]
    return Polygon(tuple(vertices))


def gen_patch(params: GenParams, index: int) -> LabeledPatch:
    """One deterministic patch; see the module docstring for the regime.

    Raises GenerationError if the recall-1 or label-looseness invariant
    cannot be met, which only happens for adversarial parameter choices.
    """
    size = params.patch_size
    rng = np.random.default_rng([params.seed, index])

    base = float(rng.uniform(*params.background_intensity))
    n_sharp = _sample_count(rng, params.dots_per_patch)
    n_soft = _sample_count(rng, params.soft_dots_per_patch)
    n_decoy = _sample_count(rng, params.decoys_per_patch)
    n_distract = _sample_count(rng, params.distractors_per_patch)

    centres = rng.uniform(size * 0.25, size * 0.75, size=(2, 2))

    # True dots: (x, y, nominal radius, cluster id, kind-specific extras).
    sharp = []
    for _ in range(n_sharp):
        cluster = int(rng.integers(0, 2))
        x, y = np.clip(centres[cluster] + rng.normal(0.0, 5.0, size=2),
                       4.0, size - 4.0)
        radius = float(rng.uniform(*params.dot_radius))
        value = float(rng.uniform(*params.dot_intensity))
        sharp.append((x, y, radius, cluster, value))
    soft = []
    for _ in range(n_soft):
        cluster = int(rng.integers(0, 2))
        x, y = np.clip(centres[cluster] + rng.normal(0.0, 5.0, size=2),
                       4.0, size - 4.0)
        sigma = float(rng.uniform(*params.soft_dot_sigma))
        peak = float(rng.uniform(*params.soft_dot_intensity))
        soft.append((x, y, 2.0 * sigma, cluster, sigma, peak))

    # Loose labels: per cluster, the convex hull of 16-gon rings of radius
    # (dot radius + slack) around each member dot.
    angles = np.linspace(0.0, 2.0 * math.pi, 16, endpoint=False)
    polygons = []
    for cluster in (0, 1):
        points = []
        for x, y, radius, dot_cluster, *_ in [*sharp, *soft]:
            if dot_cluster != cluster:
                continue
            ring = radius + params.polygon_slack
            points.extend(
                (x + ring * math.cos(a), y + ring * math.sin(a)) for a in angles
            )
        if points:
            polygons.append(_cluster_hull(np.asarray(points)))
    if not polygons:
        raise GenerationError("no dots were placed, so no labels exist")

    union = rasterize_polygons(polygons, size, size).bits
    # Keep a guard band so outside objects never graze the labeled area.
    guard = ndimage.binary_dilation(union, structure=np.ones((5, 5), dtype=bool))

    def _place_outside(radius: float) -> tuple[float, float] | None:
        for _ in range(60):
            x, y = rng.uniform(radius + 1.5, size - radius - 1.5, size=2)
            d = _centre_distances(size, x, y)
            if not np.any((d <= radius + 1.5) & guard):
                return x, y
        return None

    decoys = []
    for _ in range(n_decoy):
        radius = float(rng.uniform(*params.decoy_radius))
        value = float(rng.uniform(*params.dot_intensity))
        spot = _place_outside(radius)
        if spot is not None:
            decoys.append((*spot, radius, value))

    dot_xy = np.array([(x, y) for x, y, *_ in [*sharp, *soft]])
    dot_r = np.array([r for _, _, r, *_ in [*sharp, *soft]])

    def _place_inside(radius: float) -> tuple[float, float] | None:
        for _ in range(60):
            x, y = rng.uniform(radius + 1.5, size - radius - 1.5, size=2)
            d = _centre_distances(size, x, y)
            if np.any((d <= radius + 0.5) & ~union):
                continue
            if np.min(np.hypot(dot_xy[:, 0] - x, dot_xy[:, 1] - y) - dot_r) < radius + 1.0:
                continue
            return x, y
        return None

    distractors = []
    for _ in range(n_distract):
        radius = float(rng.uniform(*params.distractor_radius))
        value = float(rng.uniform(*params.distractor_intensity))
        inside = bool(rng.random() < params.distractor_inside_fraction)
        spot = _place_inside(radius) if inside else _place_outside(radius)
        if spot is not None:
            distractors.append((*spot, radius, value))

    # Compose: darker stamps win, so overlaps stay physically plausible.
    image = np.full((size, size), base, dtype=np.float64)
    for x, y, radius, value in distractors:
        d = _centre_distances(size, x, y)
        image = np.where(d <= radius, np.minimum(image, value), image)
    footprint = np.zeros((size, size), dtype=bool)
    for x, y, _nominal, _cluster, sigma, peak in soft:
        d = _centre_distances(size, x, y)
        profile = base - (base - peak) * np.exp(-(d ** 2) / (2.0 * sigma * sigma))
        image = np.minimum(image, profile)
        # The analytically dark core: where the noiseless profile is at or
        # below the darkness level.
        core = 2.0 * sigma * sigma * math.log((base - peak) / (base - DARK_LEVEL))
        footprint |= d <= math.sqrt(max(core, 0.0))
    for x, y, radius, _cluster, value in sharp:
        d = _centre_distances(size, x, y)
        image = np.where(d <= radius, np.minimum(image, value), image)
        footprint |= d <= radius
    for x, y, radius, value in decoys:
        d = _centre_distances(size, x, y)
        image = np.where(d <= radius, np.minimum(image, value), image)

    noise_cap = 3.0 * params.texture_noise_std
    noise = np.clip(
        rng.normal(0.0, params.texture_noise_std, size=(size, size)),
        -noise_cap,
        noise_cap,
    )
    pixels = np.clip(np.rint(image + noise), 0, 255).astype(np.uint8)

    true_mask = footprint
    if np.any(true_mask & ~union):
        raise GenerationError("a true pixel escaped the labeled regions")
    n_true = int(true_mask.sum())
    if n_true == 0:
        raise GenerationError("patch has no true pixels")
    if int(union.sum()) < 2 * n_true + 1:
        raise GenerationError("labels are not loose enough (precision >= 0.5)")

    return LabeledPatch(GrayImage(pixels), BinaryMask(true_mask), tuple(polygons))


def gen_corpus(
    params: GenParams,
    n_train: int,
    n_val: int,
    n_test: int,
    out_dir: Path | str,
) -> dict:
    """Write a split corpus to disk and return its manifest.

    Layout: ``patch_00000.png`` plus ``_true.png`` and ``_polygons.json``
    companions per patch; ``manifest.json`` maps split names to relative
    image paths.  Indices are global, so splits are disjoint and reruns
    with equal params are byte-identical.
    """
    for name, count in (("n_train", n_train), ("n_val", n_val), ("n_test", n_test)):
        if count < 0:
            raise ValueError(f"{name} must be non-negative")
    if n_train + n_val + n_test == 0:
        raise ValueError("corpus must contain at least one patch")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"train": [], "val": [], "test": []}
    index = 0
    for split, count in (("train", n_train), ("val", n_val), ("test", n_test)):
        for _ in range(count):
            patch = gen_patch(params, index)
            stem = f"patch_{index:05d}"
            save_image(patch.image, out / f"{stem}.png")
            save_mask(patch.true_mask, out / f"{stem}_true.png")
            save_polygons(list(patch.polygons), out / f"{stem}_polygons.json")
            manifest[split].append(f"{stem}.png")
            index += 1
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    return manifest


def load_corpus(manifest_path: Path | str) -> dict[str, list[LabeledPatch]]:
    """Read the patches of a generated corpus back, keyed by split."""
    path = Path(manifest_path)
    manifest = json.loads(path.read_text(encoding="utf-8"))
    root = path.parent
    splits: dict[str, list[LabeledPatch]] = {}
    for split in ("train", "val", "test"):
        patches = []
        for rel in manifest.get(split, []):
            image_path = root / rel
            stem = image_path.name.removesuffix(".png")
            image = load_image(image_path)
            true_mask = load_mask(root / f"{stem}_true.png", like=image)
            # Hull vertices may stick out past the patch border; the
            # rasterizer clips them, so no bounds check against the image.
            polygons = load_polygons(root / f"{stem}_polygons.json")
            patches.append(LabeledPatch(image, true_mask, tuple(polygons)))
        splits[split] = patches
    return splits
