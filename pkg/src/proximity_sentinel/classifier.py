"""Mask classification of face crops.

Three pieces live here: preprocessing to the 150x150 network input,
the soft-attention spatial pooling math, and the interchangeable
classification backends. Backends are immutable after load and safe for
concurrent inference.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import BackendError, ClassifierError

#: Side length of the square network input.
INPUT_SIZE = 150

#: Tolerance on the sum of classification scores.
SCORE_SUM_TOL = 1e-6


class MaskLabel(Enum):
    # declaration order doubles as the argmax tie-break order
    WITH_MASK = "with_mask"
    WITHOUT_MASK = "without_mask"
    WORN_INCORRECTLY = "worn_incorrectly"


LABELS = tuple(MaskLabel)


@dataclass(frozen=True)
class Classification:
    label: MaskLabel
    scores: tuple[float, float, float]

    @classmethod
    def from_scores(cls, scores) -> "Classification":
        values = [float(s) for s in scores]
        if len(values) != len(LABELS):
            raise ClassifierError(f"expected {len(LABELS)} scores, got {len(values)}")
        total = 0.0
        for s in values:
            if not (0.0 <= s <= 1.0) or not np.isfinite(s):
                raise ClassifierError(f"score {s!r} outside [0, 1]")
            total += s
        if abs(total - 1.0) > SCORE_SUM_TOL:
            raise ClassifierError(f"scores sum to {total!r}, expected 1")
        best = 0
        for i in range(1, len(values)):
            if values[i] > values[best]:  # strict: ties keep the earlier label
                best = i
        return cls(label=LABELS[best], scores=tuple(values))


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the flattened input."""
    flat = np.asarray(logits, dtype=np.float64).reshape(-1)
    shifted = flat - flat.max()
    e = np.exp(shifted)
    return e / e.sum()


def resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample with half-pixel-aligned sample centers.

    Same-size inputs are returned as an exact float copy so a 150x150
    crop passes through unchanged.
    """
    img = np.asarray(image, dtype=np.float64)
    in_h, in_w = img.shape[:2]
    if (in_h, in_w) == (out_h, out_w):
        return img.copy()
    ys = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    y0 = np.clip(np.floor(ys), 0, in_h - 1).astype(np.intp)
    x0 = np.clip(np.floor(xs), 0, in_w - 1).astype(np.intp)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :, None]
    top = img[y0[:, None], x0[None, :]] * (1 - wx) + img[y0[:, None], x1[None, :]] * wx
    bottom = img[y1[:, None], x0[None, :]] * (1 - wx) + img[y1[:, None], x1[None, :]] * wx
    return top * (1 - wy) + bottom * wy


def preprocess(crop: np.ndarray) -> np.ndarray:
    """Resize a crop to 150x150 and map channel values to [-1, 1].

    The value mapping is x -> x / 127.5 - 1, the convention of the
    feature extractor the trained backends are built on.
    """
    arr = np.asarray(crop)
    if arr.size == 0 or arr.ndim != 3 or arr.shape[2] != 3:
        raise ClassifierError(f"empty or non-RGB crop with shape {arr.shape}")
    resized = resize_bilinear(arr, INPUT_SIZE, INPUT_SIZE)
    return np.clip(resized / 127.5 - 1.0, -1.0, 1.0)


def attention_pool(features: np.ndarray, attention_logits: np.ndarray) -> np.ndarray:
    """Softmax-weighted spatial pooling of an (H, W, C) feature map.

    Weights are the softmax of the (H, W) logits over all spatial
    positions; the output is the weighted channel-wise sum, a C-vector.
    """
    feats = np.asarray(features, dtype=np.float64)
    logits = np.asarray(attention_logits, dtype=np.float64)
    if feats.ndim != 3:
        raise ClassifierError(f"feature map must be (H, W, C), got shape {feats.shape}")
    if logits.shape != feats.shape[:2]:
        raise ClassifierError(
            f"attention logits shape {logits.shape} does not match spatial dims {feats.shape[:2]}"
        )
    weights = softmax(logits)
    pooled = weights[:, None] * feats.reshape(-1, feats.shape[2])
    return pooled.sum(axis=0)


class ReferenceBackend:
    """Deterministic test-double backend, version 1.

    This is NOT a mask detector. It exists so the pipeline, reports and
    golden files can be exercised without any trained model. The rule is
    fixed and versioned; changing it invalidates golden files.

    Rule (v1): take the per-channel means (mR, mG, mB) of the
    preprocessed tensor and score the classes from logits
    (2*mG, 2*mR, 2*mB) via softmax, in label order
    (with_mask, without_mask, worn_incorrectly). Green-dominant crops
    read as masked, red-dominant as unmasked, blue-dominant as worn
    incorrectly, matching the synthetic scene renderer's fill colors.
    """

    VERSION = 1
    name = "reference"

    def scores(self, tensor: np.ndarray) -> np.ndarray:
        means = tensor.reshape(-1, 3).mean(axis=0)
        logits = 2.0 * np.array([means[1], means[0], means[2]])
        return softmax(logits)


class OnnxBackend:
    """Runs a trained model exported to ONNX.

    Contract: single input "input" of shape 1x150x150x3 (float32, values
    already preprocessed to [-1, 1]), single output "scores" of shape
    1x3 with softmax applied inside the graph.

    onnxruntime is used when importable; otherwise the file is executed
    by the bundled numpy evaluator (see ``onnx_eval``), which covers the
    op subset the trainer emits.
    """

    name = "onnx"

    def __init__(self, model_path):
        self._runner = self._load(model_path)

    @staticmethod
    def _load(model_path):
        try:
            import onnxruntime  # type: ignore
        except ImportError:
            onnxruntime = None
        if onnxruntime is not None:
            try:
                session = onnxruntime.InferenceSession(
                    str(model_path), providers=["CPUExecutionProvider"]
                )
            except Exception as exc:
                raise BackendError(f"failed to load ONNX model {model_path}: {exc}") from exc
            names = [i.name for i in session.get_inputs()]
            if names != ["input"]:
                raise BackendError(f"model inputs {names} do not match the contract ['input']")

            def run(batch: np.ndarray) -> np.ndarray:
                return session.run(["scores"], {"input": batch})[0]

            return run

        from . import onnx_eval

        try:
            graph = onnx_eval.load_model(model_path)
        except onnx_eval.OnnxFormatError as exc:
            raise BackendError(f"failed to load ONNX model {model_path}: {exc}") from exc
        if graph.input_names != ["input"] or graph.output_names != ["scores"]:
            raise BackendError(
                f"model interface {graph.input_names} -> {graph.output_names} "
                "does not match the contract ['input'] -> ['scores']"
            )

        def run(batch: np.ndarray) -> np.ndarray:
            return graph.run({"input": batch})["scores"]

        return run

    def scores(self, tensor: np.ndarray) -> np.ndarray:
        if tensor.shape != (INPUT_SIZE, INPUT_SIZE, 3):
            raise BackendError(f"expected a preprocessed {INPUT_SIZE}x{INPUT_SIZE}x3 tensor")
        batch = np.ascontiguousarray(tensor[None, ...], dtype=np.float32)
        try:
            out = self._runner(batch)
        except Exception as exc:
            raise BackendError(f"ONNX inference failed: {exc}") from exc
        out = np.asarray(out, dtype=np.float64)
        if out.shape != (1, len(LABELS)):
            raise BackendError(f"model returned shape {out.shape}, expected (1, {len(LABELS)})")
        return out[0]


def classify(crop: np.ndarray, backend) -> Classification:
    """Preprocess a crop and score it with the given backend."""
    tensor = preprocess(crop)
    scores = backend.scores(tensor)
    return Classification.from_scores(scores)
