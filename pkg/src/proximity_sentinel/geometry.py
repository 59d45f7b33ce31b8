"""Distance mathematics: pixel widths, the Euclidean metric, pinhole
calibration from a reference image, per-person depth, and inter-person
distance in meters.

Coordinate conventions
======================
Image frame: origin at the top-left corner, u right, v down, units px.
Camera frame (back-projection): X right, Y down, Z forward (optical
axis), units meters. A face of real width W at depth Z appears with
pixel width P = F * W / Z for focal length F in pixels.

Two distance modes are exposed:

* ``REFERENCE_SCALE`` converts the pixel separation of box centroids to
  meters with the local meters-per-pixel scale implied by the two face
  widths. Depth differences between the two people do not contribute.
* ``BACK_PROJECTION`` reconstructs each person's camera-frame position
  from their box and takes the 3D Euclidean distance, so depth
  differences do contribute.

All functions are pure; all values are immutable after construction and
safe to share across concurrent frame workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .errors import (
    CalibrationError,
    DimensionMismatchError,
    GeometryError,
    InvalidBoxError,
)

#: Real-world face width assumed when none is configured, in meters.
DEFAULT_FACE_WIDTH_M = 0.15

Point = Sequence[float]


@dataclass(frozen=True)
class BoundingBox:
    """Pixel-space box, top-left (x1, y1) to bottom-right (x2, y2).

    Instances are not validated on construction; operations that need the
    invariants (x2 > x1, y2 > y1, finite coordinates) call :meth:`validate`
    and raise :class:`InvalidBoxError`, so degenerate boxes coming from
    noisy detectors surface as per-person errors rather than crashes.
    """

    x1: float
    y1: float
    x2: float
    y2: float

    def validate(self) -> "BoundingBox":
        for c in (self.x1, self.y1, self.x2, self.y2):
            if not math.isfinite(c):
                raise InvalidBoxError(f"non-finite box coordinate in {self}")
        if self.x2 <= self.x1 or self.y2 <= self.y1:
            raise InvalidBoxError(f"degenerate box {self}")
        return self

    def centroid(self) -> tuple[float, float]:
        return ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)


class DistanceMode(Enum):
    REFERENCE_SCALE = "reference-scale"
    BACK_PROJECTION = "back-projection"


@dataclass(frozen=True)
class CameraCalibration:
    """Pinhole calibration derived from a reference image.

    ``focal_length_px`` is the pinhole scale factor F. ``known_face_width_m``
    is the real face width W the detector boxes are assumed to span.
    ``reference_distance_m`` records the distance D of the reference shot.
    ``principal_point`` is only used in back-projection mode; it defaults to
    (0, 0) because plain calibration has no image in hand, and callers that
    do (e.g. the simulator) set the image center.
    """

    focal_length_px: float
    known_face_width_m: float
    reference_distance_m: float
    principal_point: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not (self.focal_length_px > 0 and math.isfinite(self.focal_length_px)):
            raise CalibrationError(f"focal length must be positive, got {self.focal_length_px}")
        if not (self.known_face_width_m > 0 and math.isfinite(self.known_face_width_m)):
            raise CalibrationError(f"face width must be positive, got {self.known_face_width_m}")
        if not (self.reference_distance_m > 0 and math.isfinite(self.reference_distance_m)):
            raise CalibrationError(
                f"reference distance must be positive, got {self.reference_distance_m}"
            )

    def to_json_dict(self) -> dict:
        return {
            "focal_length_px": self.focal_length_px,
            "known_face_width_m": self.known_face_width_m,
            "reference_distance_m": self.reference_distance_m,
            "principal_point": list(self.principal_point),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "CameraCalibration":
        try:
            cx, cy = data.get("principal_point", (0.0, 0.0))
            return cls(
                focal_length_px=float(data["focal_length_px"]),
                known_face_width_m=float(data["known_face_width_m"]),
                reference_distance_m=float(data["reference_distance_m"]),
                principal_point=(float(cx), float(cy)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CalibrationError(f"malformed calibration document: {exc}") from exc


def save_calibration(calib: CameraCalibration, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(calib.to_json_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_calibration(path) -> CameraCalibration:
    with open(path, "r", encoding="utf-8") as fh:
        return CameraCalibration.from_json_dict(json.load(fh))


def pixel_width(box: BoundingBox) -> float:
    """Face width in pixels, x2 - x1. Raises on degenerate boxes."""
    box.validate()
    return box.x2 - box.x1


def euclidean_distance(p: Point, q: Point) -> float:
    """d(p, q) = sqrt(sum (q_i - p_i)^2) over n dimensions."""
    if len(p) != len(q):
        raise DimensionMismatchError(f"dimension mismatch: {len(p)} vs {len(q)}")
    if len(p) < 1:
        raise DimensionMismatchError("points must have at least one dimension")
    for values in (p, q):
        for v in values:
            if not math.isfinite(v):
                raise GeometryError(f"non-finite coordinate {v!r}")
    return math.dist(p, q)


def calibrate_focal_length(
    known_face_width_m: float,
    reference_distance_m: float,
    measured_width_px: float,
    principal_point: tuple[float, float] = (0.0, 0.0),
) -> CameraCalibration:
    """Solve the pinhole relation F = P * D / W from a reference image.

    The reference image shows a face of known real width W at known
    distance D spanning P pixels.
    """
    if not (measured_width_px > 0 and math.isfinite(measured_width_px)):
        raise CalibrationError(f"measured width must be positive, got {measured_width_px}")
    # W and D positivity is re-checked by CameraCalibration itself
    if known_face_width_m <= 0 or reference_distance_m <= 0:
        raise CalibrationError("face width and reference distance must be positive")
    focal = measured_width_px * reference_distance_m / known_face_width_m
    return CameraCalibration(
        focal_length_px=focal,
        known_face_width_m=known_face_width_m,
        reference_distance_m=reference_distance_m,
        principal_point=principal_point,
    )


def estimate_depth(calib: CameraCalibration, box: BoundingBox) -> float:
    """Depth along the optical axis: Z = W * F / P."""
    return calib.known_face_width_m * calib.focal_length_px / pixel_width(box)


def back_project(calib: CameraCalibration, box: BoundingBox) -> tuple[float, float, float]:
    """Camera-frame position of the face center: inverse pinhole at Z = W*F/P."""
    z = estimate_depth(calib, box)
    u, v = box.centroid()
    cx, cy = calib.principal_point
    x = (u - cx) * z / calib.focal_length_px
    y = (v - cy) * z / calib.focal_length_px
    return (x, y, z)


def inter_person_distance(
    a: BoundingBox,
    b: BoundingBox,
    calib: CameraCalibration,
    mode: DistanceMode = DistanceMode.REFERENCE_SCALE,
) -> float:
    """Estimated separation of two people in meters; symmetric in (a, b)."""
    if mode is DistanceMode.REFERENCE_SCALE:
        width_a = pixel_width(a)
        width_b = pixel_width(b)
        separation_px = euclidean_distance(a.centroid(), b.centroid())
        meters_per_px = calib.known_face_width_m / ((width_a + width_b) / 2.0)
        return separation_px * meters_per_px
    if mode is DistanceMode.BACK_PROJECTION:
        return euclidean_distance(back_project(calib, a), back_project(calib, b))
    raise GeometryError(f"unknown distance mode {mode!r}")
