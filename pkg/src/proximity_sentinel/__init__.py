"""Real-time social-distancing and mask-compliance monitoring.

Estimates inter-person distances from face detections via pinhole
calibration, classifies mask wearing per face, flags violations with
green/red box semantics, and emits annotated frames plus
precision/recall/F1/FPS reports. A synthetic scene simulator provides
geometric ground truth for verification.
"""

from .classifier import Classification, MaskLabel, OnnxBackend, ReferenceBackend, classify
from .geometry import (
    BoundingBox,
    CameraCalibration,
    DistanceMode,
    calibrate_focal_length,
    estimate_depth,
    euclidean_distance,
    inter_person_distance,
    pixel_width,
)
from .ingest import Frame, FrameRecord, RawDetection, crop_face, load_detection_stream
from .violation import (
    BoxColor,
    FrameAssessment,
    Metrics,
    PersonAssessment,
    ViolationPolicy,
    assess_frame,
    compliance_metrics,
    fps_meter,
)

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "BoxColor",
    "CameraCalibration",
    "Classification",
    "DistanceMode",
    "Frame",
    "FrameAssessment",
    "FrameRecord",
    "MaskLabel",
    "Metrics",
    "OnnxBackend",
    "PersonAssessment",
    "RawDetection",
    "ReferenceBackend",
    "ViolationPolicy",
    "assess_frame",
    "calibrate_focal_length",
    "classify",
    "compliance_metrics",
    "crop_face",
    "estimate_depth",
    "euclidean_distance",
    "fps_meter",
    "inter_person_distance",
    "pixel_width",
]
