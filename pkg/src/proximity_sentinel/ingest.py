"""Frame and detection acquisition.

Frames come from image-sequence directories (PPM P6 and PNG); detections
come from a JSONL playback stream or any object implementing the
:class:`Detector` protocol. Sources are single-consumer iterators;
decoded frames are immutable by convention and may be handed to
concurrent pipeline stages.

Detection stream schema, one JSON object per line::

    {"frame": int,
     "detections": [{"box": [x1, y1, x2, y2],
                     "conf": float,                      # [0, 1]
                     "truth_label": "with_mask" | "without_mask"
                                    | "worn_incorrectly",  # optional
                     "truth_violation": bool}]}            # optional
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Protocol

import numpy as np

from .classifier import MaskLabel
from .errors import DecodeError, EmptyCropError, StreamOrderError, StreamParseError
from .geometry import BoundingBox
from .ppm import read_ppm

#: Synthetic inter-frame spacing assigned when a source has no timing
#: metadata; 40 ms is the nominal 25 fps frame period.
DEFAULT_FRAME_PERIOD_MS = 40


@dataclass(frozen=True, eq=False)
class Frame:
    """A decoded RGB frame. ``pixels`` is an (H, W, 3) uint8 array."""

    index: int
    timestamp_ms: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3 or self.pixels.dtype != np.uint8:
            raise ValueError(f"frame pixels must be (H, W, 3) uint8, got {self.pixels.shape}")
        if self.pixels.shape[0] < 1 or self.pixels.shape[1] < 1:
            raise ValueError("frame must be at least 1x1")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class RawDetection:
    box: BoundingBox
    confidence: float = 1.0
    truth_label: MaskLabel | None = None
    truth_violation: bool | None = None


@dataclass(frozen=True)
class FrameRecord:
    frame: int
    detections: tuple[RawDetection, ...] = field(default_factory=tuple)


class Detector(Protocol):
    """Pluggable face-detector interface.

    No detector ships with this package; the localization stage is a
    deliberate extension point. Anything yielding boxes for a frame can
    drive the pipeline without touching downstream modules.
    """

    def detect(self, frame: Frame) -> list[RawDetection]: ...


def _decode_image(path: str) -> np.ndarray:
    lower = path.lower()
    if lower.endswith(".ppm"):
        return read_ppm(path)
    if lower.endswith(".png"):
        try:
            from PIL import Image

            with Image.open(path) as img:
                return np.asarray(img.convert("RGB"), dtype=np.uint8)
        except DecodeError:
            raise
        except Exception as exc:
            raise DecodeError(f"{path}: failed to decode PNG: {exc}") from exc
    raise DecodeError(f"{path}: unsupported image format")


def open_frame_source(
    directory, timestamp_step_ms: int = DEFAULT_FRAME_PERIOD_MS
) -> Iterator[Frame]:
    """Yield frames from a directory in lexicographic filename order.

    Indices are assigned 0, 1, 2, ...; timestamps advance by
    ``timestamp_step_ms`` per frame. Every regular file in the directory
    must be a decodable .ppm or .png.
    """
    names = sorted(n for n in os.listdir(directory) if os.path.isfile(os.path.join(directory, n)))
    for index, name in enumerate(names):
        pixels = _decode_image(os.path.join(directory, name))
        yield Frame(index=index, timestamp_ms=index * timestamp_step_ms, pixels=pixels)


_LABELS_BY_WIRE = {label.value: label for label in MaskLabel}


def detection_from_json_dict(data: dict) -> RawDetection:
    box = data["box"]
    if not isinstance(box, (list, tuple)) or len(box) != 4:
        raise ValueError(f"box must be [x1, y1, x2, y2], got {box!r}")
    coords = [float(c) for c in box]
    if not all(math.isfinite(c) for c in coords):
        raise ValueError(f"non-finite box coordinate in {box!r}")
    conf = float(data.get("conf", 1.0))
    if not (0.0 <= conf <= 1.0):
        raise ValueError(f"confidence {conf} outside [0, 1]")
    truth_label = None
    if "truth_label" in data and data["truth_label"] is not None:
        wire = data["truth_label"]
        if wire not in _LABELS_BY_WIRE:
            raise ValueError(f"unknown truth_label {wire!r}")
        truth_label = _LABELS_BY_WIRE[wire]
    truth_violation = data.get("truth_violation")
    if truth_violation is not None and not isinstance(truth_violation, bool):
        raise ValueError(f"truth_violation must be a bool, got {truth_violation!r}")
    return RawDetection(
        box=BoundingBox(*coords),
        confidence=conf,
        truth_label=truth_label,
        truth_violation=truth_violation,
    )


def detection_to_json_dict(det: RawDetection) -> dict:
    out: dict = {
        "box": [det.box.x1, det.box.y1, det.box.x2, det.box.y2],
        "conf": det.confidence,
    }
    if det.truth_label is not None:
        out["truth_label"] = det.truth_label.value
    if det.truth_violation is not None:
        out["truth_violation"] = det.truth_violation
    return out


def record_from_json_dict(data: dict) -> FrameRecord:
    frame = data["frame"]
    if not isinstance(frame, int) or frame < 0:
        raise ValueError(f"frame index must be a non-negative int, got {frame!r}")
    detections = data.get("detections", [])
    if not isinstance(detections, list):
        raise ValueError("detections must be a list")
    return FrameRecord(
        frame=frame,
        detections=tuple(detection_from_json_dict(d) for d in detections),
    )


def record_to_json_dict(record: FrameRecord) -> dict:
    return {
        "frame": record.frame,
        "detections": [detection_to_json_dict(d) for d in record.detections],
    }


def load_detection_stream(path) -> Iterator[FrameRecord]:
    """Yield FrameRecords from a JSONL file, enforcing strict frame order."""
    last_frame = -1
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = record_from_json_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise StreamParseError(f"{path}:{lineno}: {exc}") from exc
            if record.frame <= last_frame:
                raise StreamOrderError(
                    f"{path}:{lineno}: frame {record.frame} after frame {last_frame}"
                )
            last_frame = record.frame
            yield record


def dump_detection_stream(records: Iterable[FrameRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_json_dict(record), sort_keys=True))
            fh.write("\n")


def crop_face(frame: Frame, box: BoundingBox) -> np.ndarray:
    """Extract the box's pixels, clamped to the frame bounds.

    Partially-outside boxes are clamped, never rejected; a box fully
    outside the frame raises :class:`EmptyCropError`. The crop is a copy.
    """
    x1 = max(0, math.floor(box.x1))
    y1 = max(0, math.floor(box.y1))
    x2 = min(frame.width, math.ceil(box.x2))
    y2 = min(frame.height, math.ceil(box.y2))
    if x2 <= x1 or y2 <= y1:
        raise EmptyCropError(f"box {box} lies outside {frame.width}x{frame.height} frame")
    return frame.pixels[y1:y2, x1:x2].copy()
