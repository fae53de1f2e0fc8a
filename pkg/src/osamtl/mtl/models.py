"""Pixel classifiers with hand-written forward and backward passes.

Both models map a grayscale patch to per-pixel foreground probabilities.
``LogisticFeatures`` is the default: a logistic regression over five
handcrafted features, convex and cheap.  ``TinyConvNet`` is a small
three-layer convolutional alternative for when a learned feature stack
is wanted.  Probabilities are clipped away from 0 and 1; where the clip
is active the gradient is zeroed, matching what finite differences see.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ..imaging import GrayImage
from .features import FEATURE_COUNT, extract_features
from .losses import EPS

MODEL_FORMAT = "osamtl-model-v1"


class Prediction:
    """Per-pixel foreground probabilities, strictly inside (EPS, 1-EPS)."""

    def __init__(self, probs: np.ndarray) -> None:
        arr = np.asarray(probs, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("probs must be a 2-D row-major array")
        self.probs = np.clip(arr, EPS, 1.0 - EPS)

    @property
    def width(self) -> int:
        return self.probs.shape[1]

    @property
    def height(self) -> int:
        return self.probs.shape[0]


def _sigmoid_with_clip(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Clipped sigmoid plus the mask of pixels where gradient still flows."""
    raw = expit(logits)
    clipped = np.clip(raw, EPS, 1.0 - EPS)
    active = (raw > EPS) & (raw < 1.0 - EPS)
    return clipped, active


class LogisticFeatures:
    """Logistic regression over the handcrafted feature stack.

    weights[0] multiplies the constant feature and so acts as the bias.
    Zero initialization is fine here: the objective is convex in the
    weights for either base loss against fixed targets.
    """

    kind = "logistic"

    def __init__(self, weights: np.ndarray | None = None) -> None:
        if weights is None:
            weights = np.zeros(FEATURE_COUNT)
        arr = np.asarray(weights, dtype=np.float64).reshape(-1)
        if arr.shape != (FEATURE_COUNT,):
            raise ValueError(f"expected {FEATURE_COUNT} weights, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("weights must be finite")
        self.weights = arr.copy()

    def parameter_count(self) -> int:
        return FEATURE_COUNT

    def get_params(self) -> np.ndarray:
        return self.weights.copy()

    def set_params(self, flat: np.ndarray) -> None:
        arr = np.asarray(flat, dtype=np.float64).reshape(-1)
        if arr.shape != self.weights.shape:
            raise ValueError("parameter vector has the wrong length")
        if not np.all(np.isfinite(arr)):
            raise ValueError("weights must be finite")
        self.weights = arr.copy()

    def prepare(self, img: GrayImage) -> np.ndarray:
        return extract_features(img)

    def forward(self, prepared: np.ndarray) -> tuple[np.ndarray, dict]:
        logits = prepared @ self.weights
        probs, active = _sigmoid_with_clip(logits)
        return probs, {"features": prepared, "probs": probs, "active": active}

    def backward(self, cache: dict, dprobs: np.ndarray) -> np.ndarray:
        probs = cache["probs"]
        dlogits = np.where(cache["active"], dprobs * probs * (1.0 - probs), 0.0)
        return np.einsum("hw,hwf->f", dlogits, cache["features"])


def _conv_same(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    # x: (c_in, h, w), w: (c_out, c_in, 3, 3), zero padding keeps h and w.
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    windows = sliding_window_view(padded, (3, 3), axis=(1, 2))
    return np.einsum("ihwkl,oikl->ohw", windows, w) + b[:, None, None]


def _conv_same_backward(
    x: np.ndarray, w: np.ndarray, dout: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    windows = sliding_window_view(padded, (3, 3), axis=(1, 2))
    dw = np.einsum("ohw,ihwkl->oikl", dout, windows)
    db = dout.sum(axis=(1, 2))
    dpad = np.pad(dout, ((0, 0), (1, 1), (1, 1)))
    dwin = sliding_window_view(dpad, (3, 3), axis=(1, 2))
    dx = np.einsum("ohwkl,oikl->ihw", dwin, w[:, :, ::-1, ::-1])
    return dw, db, dx


class TinyConvNet:
    """Three same-padded 3x3 convolutions (8 and 16 hidden channels) with
    ReLU activations and a sigmoid output."""

    kind = "tinyconv"
    CHANNELS = (1, 8, 16, 1)
    TENSOR_ORDER = ("w1", "b1", "w2", "b2", "w3", "b3")

    def __init__(self, tensors: dict[str, np.ndarray] | None = None, seed: int = 0) -> None:
        if tensors is None:
            tensors = self._init_tensors(seed)
        shaped = {}
        for name in self.TENSOR_ORDER:
            if name not in tensors:
                raise ValueError(f"missing tensor {name!r}")
            arr = np.asarray(tensors[name], dtype=np.float64)
            if arr.shape != self._shape_of(name):
                raise ValueError(f"tensor {name!r} has shape {arr.shape}, "
                                 f"expected {self._shape_of(name)}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"tensor {name!r} must be finite")
            shaped[name] = arr.copy()
        self.tensors = shaped

    @classmethod
    def _shape_of(cls, name: str) -> tuple[int, ...]:
        layer = int(name[1])
        c_in, c_out = cls.CHANNELS[layer - 1], cls.CHANNELS[layer]
        return (c_out,) if name[0] == "b" else (c_out, c_in, 3, 3)

    @classmethod
    def _init_tensors(cls, seed: int) -> dict[str, np.ndarray]:
        # Weights uniform in (-r, r) with r = 1/sqrt(fan_in); biases zero.
        rng = np.random.default_rng(seed)
        tensors: dict[str, np.ndarray] = {}
        for layer in (1, 2, 3):
            c_in, c_out = cls.CHANNELS[layer - 1], cls.CHANNELS[layer]
            r = 1.0 / math.sqrt(c_in * 9)
            tensors[f"w{layer}"] = rng.uniform(-r, r, size=(c_out, c_in, 3, 3))
            tensors[f"b{layer}"] = np.zeros(c_out)
        return tensors

    def parameter_count(self) -> int:
        return sum(self.tensors[name].size for name in self.TENSOR_ORDER)

    def get_params(self) -> np.ndarray:
        return np.concatenate([self.tensors[name].ravel() for name in self.TENSOR_ORDER])

    def set_params(self, flat: np.ndarray) -> None:
        arr = np.asarray(flat, dtype=np.float64).reshape(-1)
        if arr.size != self.parameter_count():
            raise ValueError("parameter vector has the wrong length")
        if not np.all(np.isfinite(arr)):
            raise ValueError("weights must be finite")
        offset = 0
        for name in self.TENSOR_ORDER:
            size = self.tensors[name].size
            self.tensors[name] = arr[offset:offset + size].reshape(self.tensors[name].shape).copy()
            offset += size

    def prepare(self, img: GrayImage) -> np.ndarray:
        return (img.intensities.astype(np.float64) / 255.0)[None, :, :]

    def forward(self, prepared: np.ndarray) -> tuple[np.ndarray, dict]:
        t = self.tensors
        z1 = _conv_same(prepared, t["w1"], t["b1"])
        a1 = np.maximum(z1, 0.0)
        z2 = _conv_same(a1, t["w2"], t["b2"])
        a2 = np.maximum(z2, 0.0)
        z3 = _conv_same(a2, t["w3"], t["b3"])
        probs, active = _sigmoid_with_clip(z3[0])
        cache = {"x": prepared, "z1": z1, "a1": a1, "z2": z2, "a2": a2,
                 "probs": probs, "active": active}
        return probs, cache

    def backward(self, cache: dict, dprobs: np.ndarray) -> np.ndarray:
        t = self.tensors
        probs = cache["probs"]
        dlogits = np.where(cache["active"], dprobs * probs * (1.0 - probs), 0.0)[None]
        dw3, db3, da2 = _conv_same_backward(cache["a2"], t["w3"], dlogits)
        dz2 = da2 * (cache["z2"] > 0.0)
        dw2, db2, da1 = _conv_same_backward(cache["a1"], t["w2"], dz2)
        dz1 = da1 * (cache["z1"] > 0.0)
        dw1, db1, _ = _conv_same_backward(cache["x"], t["w1"], dz1)
        grads = {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2, "w3": dw3, "b3": db3}
        return np.concatenate([grads[name].ravel() for name in self.TENSOR_ORDER])


PixelClassifier = LogisticFeatures | TinyConvNet


def predict(model: PixelClassifier, img: GrayImage) -> Prediction:
    """Run a classifier over a full image."""
    probs, _ = model.forward(model.prepare(img))
    return Prediction(probs)


def save_model(model: PixelClassifier, path: Path | str) -> None:
    """Write a model as versioned JSON (architecture tag plus weights)."""
    if model.kind == "logistic":
        weights = model.weights.tolist()
    else:
        weights = {name: model.tensors[name].tolist() for name in model.TENSOR_ORDER}
    payload = {"format": MODEL_FORMAT, "kind": model.kind, "weights": weights}
    Path(path).write_text(json.dumps(payload) + "\n", encoding="utf-8")


def load_model(path: Path | str) -> PixelClassifier:
    """Read a model checkpoint written by ``save_model``."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != MODEL_FORMAT:
        raise ValueError(f"not a {MODEL_FORMAT} checkpoint: {path}")
    kind = payload.get("kind")
    if kind == "logistic":
        return LogisticFeatures(np.asarray(payload["weights"]))
    if kind == "tinyconv":
        return TinyConvNet({k: np.asarray(v) for k, v in payload["weights"].items()})
    raise ValueError(f"unknown model kind {kind!r}")
