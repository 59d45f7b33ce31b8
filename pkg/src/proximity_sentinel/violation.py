"""Per-frame compliance assessment and run-level metrics.

``assess_frame`` evaluates every pair of detected people against the
distance threshold (strict: a pair exactly at the threshold is
compliant) and assigns the green/red box policy: a person is red iff
they are in a distance violation or, when masks are required, their
label is anything other than ``with_mask``.

Metrics are counted per person per frame: the binary prediction is
"flagged red", the binary truth comes from the stream's
``truth_violation``/``truth_label`` fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .classifier import Classification, MaskLabel
from .errors import AlignmentError, GeometryError, UndefinedRateError
from .geometry import (
    BoundingBox,
    CameraCalibration,
    DistanceMode,
    inter_person_distance,
    pixel_width,
)
from .ingest import FrameRecord

#: 6 feet in meters, the default social-distance threshold.
SIX_FEET_M = 1.8288


class BoxColor(Enum):
    GREEN = "green"
    RED = "red"


@dataclass(frozen=True)
class ViolationPolicy:
    distance_threshold_m: float = SIX_FEET_M
    mode: DistanceMode = DistanceMode.REFERENCE_SCALE
    mask_required: bool = True

    def __post_init__(self):
        if not (self.distance_threshold_m > 0 and math.isfinite(self.distance_threshold_m)):
            raise ValueError(f"threshold must be positive, got {self.distance_threshold_m}")


@dataclass(frozen=True)
class PersonAssessment:
    """Outcome for one person. ``index`` is the position in the frame's
    detection list, so assessments stay aligned with ground truth even
    when other detections in the frame failed."""

    index: int
    box: BoundingBox
    classification: Classification
    sd_violation: bool
    box_color: BoxColor
    violating_partners: frozenset[int]


@dataclass(frozen=True)
class FrameAssessment:
    frame_index: int
    persons: tuple[PersonAssessment, ...]
    distances: np.ndarray  # square matrix over `persons`, meters
    violation_pairs: tuple[tuple[int, int], ...]  # detection indices, i < j
    failed: tuple[tuple[int, str], ...] = field(default_factory=tuple)

    def pair_distance(self, i: int, j: int) -> float:
        """Distance for a pair given by detection indices."""
        order = {p.index: k for k, p in enumerate(self.persons)}
        return float(self.distances[order[i], order[j]])


def assess_frame(
    persons: Sequence[tuple[BoundingBox, Classification]],
    calib: CameraCalibration,
    policy: ViolationPolicy,
    frame_index: int = 0,
    indices: Sequence[int] | None = None,
) -> FrameAssessment:
    """Assess one frame's classified detections.

    ``indices`` maps positions in ``persons`` back to detection-list
    positions (defaults to 0..n-1); the pipeline uses it after dropping
    detections that failed cropping. People whose boxes fail geometry
    are excluded, reported in ``failed``, and the rest of the frame is
    still assessed.
    """
    if indices is None:
        indices = list(range(len(persons)))

    failed: list[tuple[int, str]] = []
    kept: list[tuple[int, BoundingBox, Classification]] = []
    for idx, (box, classification) in zip(indices, persons):
        try:
            pixel_width(box)
        except GeometryError as exc:
            failed.append((idx, str(exc)))
            continue
        kept.append((idx, box, classification))

    n = len(kept)
    distances = np.zeros((n, n), dtype=np.float64)
    pairs: list[tuple[int, int]] = []
    partners: dict[int, set[int]] = {idx: set() for idx, _, _ in kept}
    for a in range(n):
        for b in range(a + 1, n):
            d = inter_person_distance(kept[a][1], kept[b][1], calib, policy.mode)
            distances[a, b] = distances[b, a] = d
            if d < policy.distance_threshold_m:  # strict: d == threshold is compliant
                ia, ib = kept[a][0], kept[b][0]
                pairs.append((ia, ib) if ia < ib else (ib, ia))
                partners[ia].add(ib)
                partners[ib].add(ia)

    assessed = []
    for idx, box, classification in kept:
        sd_violation = bool(partners[idx])
        masked_ok = (not policy.mask_required) or classification.label is MaskLabel.WITH_MASK
        color = BoxColor.RED if (sd_violation or not masked_ok) else BoxColor.GREEN
        assessed.append(
            PersonAssessment(
                index=idx,
                box=box,
                classification=classification,
                sd_violation=sd_violation,
                box_color=color,
                violating_partners=frozenset(partners[idx]),
            )
        )

    return FrameAssessment(
        frame_index=frame_index,
        persons=tuple(assessed),
        distances=distances,
        violation_pairs=tuple(sorted(pairs)),
        failed=tuple(failed),
    )


def merge_failures(
    assessment: FrameAssessment, extra: Sequence[tuple[int, str]]
) -> FrameAssessment:
    if not extra:
        return assessment
    return replace(assessment, failed=tuple(sorted((*assessment.failed, *extra))))


@dataclass(frozen=True)
class Metrics:
    true_positives: int
    false_positives: int
    false_negatives: int
    true_negatives: int
    precision: float
    recall: float
    f1: float
    fps: float = 0.0
    degenerate_denominators: bool = False

    @classmethod
    def from_counts(
        cls, tp: int, fp: int, fn: int, tn: int = 0, fps: float = 0.0
    ) -> "Metrics":
        degenerate = False
        if tp + fp > 0:
            precision = tp / (tp + fp)
        else:
            precision, degenerate = 0.0, True
        if tp + fn > 0:
            recall = tp / (tp + fn)
        else:
            recall, degenerate = 0.0, True
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        return cls(
            true_positives=tp,
            false_positives=fp,
            false_negatives=fn,
            true_negatives=tn,
            precision=precision,
            recall=recall,
            f1=f1,
            fps=fps,
            degenerate_denominators=degenerate,
        )


def _truth_positive(det, mask_required: bool) -> bool:
    violation = bool(det.truth_violation) if det.truth_violation is not None else False
    mask_bad = (
        mask_required
        and det.truth_label is not None
        and det.truth_label is not MaskLabel.WITH_MASK
    )
    return violation or mask_bad


def compliance_metrics(
    predicted: Sequence[FrameAssessment],
    truth: Sequence[FrameRecord],
    mask_required: bool = True,
    fps: float = 0.0,
) -> Metrics:
    """Confusion counts of per-person red flags against stream truth.

    Predictions and truth must cover identical frame indices with the
    same number of detections per frame. Persons the pipeline excluded
    (``failed``) count as not flagged.
    """
    truth_by_frame = {r.frame: r for r in truth}
    pred_by_frame = {a.frame_index: a for a in predicted}
    if set(truth_by_frame) != set(pred_by_frame):
        missing = set(truth_by_frame) ^ set(pred_by_frame)
        raise AlignmentError(f"prediction/truth frame mismatch, e.g. frames {sorted(missing)[:5]}")

    tp = fp = fn = tn = 0
    for frame_idx in sorted(truth_by_frame):
        record = truth_by_frame[frame_idx]
        assessment = pred_by_frame[frame_idx]
        known = {p.index for p in assessment.persons} | {i for i, _ in assessment.failed}
        if known != set(range(len(record.detections))):
            raise AlignmentError(
                f"frame {frame_idx}: {len(record.detections)} truth detections vs "
                f"predicted indices {sorted(known)}"
            )
        flagged = {p.index for p in assessment.persons if p.box_color is BoxColor.RED}
        for det_idx, det in enumerate(record.detections):
            predicted_pos = det_idx in flagged
            actual_pos = _truth_positive(det, mask_required)
            if predicted_pos and actual_pos:
                tp += 1
            elif predicted_pos:
                fp += 1
            elif actual_pos:
                fn += 1
            else:
                tn += 1
    return Metrics.from_counts(tp, fp, fn, tn, fps=fps)


def fps_meter(timestamps_s: Sequence[float]) -> float:
    """Frames per second from per-frame completion timestamps:
    (count - 1) / elapsed seconds between first and last."""
    if len(timestamps_s) < 2:
        raise UndefinedRateError(f"need at least 2 completions, got {len(timestamps_s)}")
    elapsed = timestamps_s[-1] - timestamps_s[0]
    if elapsed <= 0:
        raise UndefinedRateError(f"non-positive elapsed time {elapsed}")
    return (len(timestamps_s) - 1) / elapsed


def fps_from_millis(timestamps_ms: Sequence[int]) -> float:
    """fps_meter over integer millisecond stamps, with the division done
    on exact integers so nominal rates (e.g. 40 ms -> 25.0) come out exact."""
    if len(timestamps_ms) < 2:
        raise UndefinedRateError(f"need at least 2 timestamps, got {len(timestamps_ms)}")
    elapsed_ms = timestamps_ms[-1] - timestamps_ms[0]
    if elapsed_ms <= 0:
        raise UndefinedRateError(f"non-positive elapsed time {elapsed_ms} ms")
    return 1000.0 * (len(timestamps_ms) - 1) / elapsed_ms
