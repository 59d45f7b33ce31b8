"""Concurrent frame pipeline: decode -> classify -> assess -> render.

Frames are processed by a worker pool behind a bounded in-flight window
and consumed strictly in frame-index order, so output artifacts are
byte-identical at any worker count. All per-frame work is pure; the
consumer (writer) runs on the calling thread.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

from .classifier import Classification, classify
from .errors import SentinelError
from .geometry import BoundingBox, CameraCalibration
from .ingest import Frame, FrameRecord, crop_face
from .render import AnnotationStyle, annotate, write_annotated_frame
from .violation import FrameAssessment, ViolationPolicy, assess_frame, merge_failures

#: In-flight frames per worker; bounds pipeline memory.
INFLIGHT_PER_WORKER = 4


def ordered_map(fn: Callable, items: Iterable, workers: int) -> Iterator:
    """Map ``fn`` over ``items`` with a worker pool, yielding results in
    input order with at most ``workers * INFLIGHT_PER_WORKER`` items in
    flight."""
    if workers <= 1:
        for item in items:
            yield fn(item)
        return
    window = workers * INFLIGHT_PER_WORKER
    with ThreadPoolExecutor(max_workers=workers) as pool:
        pending = []
        iterator = iter(items)
        for item in iterator:
            pending.append(pool.submit(fn, item))
            if len(pending) >= window:
                yield pending.pop(0).result()
        while pending:
            yield pending.pop(0).result()


def clamp_box(box: BoundingBox, width: int, height: int) -> BoundingBox:
    """Clamp a detector box to the frame; may become degenerate."""
    return BoundingBox(
        x1=max(0.0, box.x1),
        y1=max(0.0, box.y1),
        x2=min(float(width), box.x2),
        y2=min(float(height), box.y2),
    )


@dataclass
class FrameResult:
    frame: Frame
    assessment: FrameAssessment
    annotated: Frame | None = None
    record: FrameRecord | None = None


@dataclass
class RunOutcome:
    frames: int = 0
    assessments: list[FrameAssessment] = field(default_factory=list)
    matched_records: list[FrameRecord] = field(default_factory=list)
    frame_timestamps_ms: list[int] = field(default_factory=list)
    completion_timestamps_s: list[float] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def total_violation_pairs(self) -> int:
        return sum(len(a.violation_pairs) for a in self.assessments)


def process_frame(
    frame: Frame,
    record: FrameRecord | None,
    calib: CameraCalibration,
    policy: ViolationPolicy,
    backend,
    style: AnnotationStyle | None,
) -> FrameResult:
    """Pure per-frame work: crop, classify, assess, optionally annotate."""
    detections = record.detections if record is not None else ()
    persons: list[tuple[BoundingBox, Classification]] = []
    indices: list[int] = []
    failures: list[tuple[int, str]] = []
    for det_idx, det in enumerate(detections):
        boxed = clamp_box(det.box, frame.width, frame.height)
        try:
            crop = crop_face(frame, boxed)
            classification = classify(crop, backend)
        except SentinelError as exc:
            failures.append((det_idx, str(exc)))
            continue
        persons.append((boxed, classification))
        indices.append(det_idx)
    assessment = assess_frame(persons, calib, policy, frame.index, indices=indices)
    assessment = merge_failures(assessment, failures)
    annotated = annotate(frame, assessment, style) if style is not None else None
    return FrameResult(frame=frame, assessment=assessment, annotated=annotated, record=record)


def _merge_jobs(
    frames: Iterable[Frame], records: Iterable[FrameRecord], outcome: RunOutcome
) -> Iterator[tuple[Frame, FrameRecord | None]]:
    """Join frames with records on frame index (both strictly increasing)."""
    record_iter = iter(records)
    pending: FrameRecord | None = next(record_iter, None)
    for frame in frames:
        while pending is not None and pending.frame < frame.index:
            outcome.errors.append(f"record for frame {pending.frame} has no frame image")
            pending = next(record_iter, None)
        if pending is not None and pending.frame == frame.index:
            yield frame, pending
            pending = next(record_iter, None)
        else:
            yield frame, None
    while pending is not None:
        outcome.errors.append(f"record for frame {pending.frame} has no frame image")
        pending = next(record_iter, None)


def run_pipeline(
    frames: Iterable[Frame],
    records: Iterable[FrameRecord],
    calib: CameraCalibration,
    policy: ViolationPolicy,
    backend,
    style: AnnotationStyle | None = None,
    out_dir=None,
    workers: int = 1,
    on_result: Callable[[FrameResult], None] | None = None,
) -> RunOutcome:
    """Run the full pipeline; returns the accumulated outcome.

    Annotated frames are written to ``out_dir`` when both a style and an
    output directory are given. Completion timestamps are recorded as
    each in-order result is consumed, for throughput measurement.
    """
    outcome = RunOutcome()
    jobs = _merge_jobs(frames, records, outcome)

    def work(job: tuple[Frame, FrameRecord | None]) -> FrameResult:
        return process_frame(job[0], job[1], calib, policy, backend, style)

    for result in ordered_map(work, jobs, workers=max(1, workers)):
        outcome.frames += 1
        outcome.assessments.append(result.assessment)
        outcome.frame_timestamps_ms.append(result.frame.timestamp_ms)
        if result.record is not None:
            outcome.matched_records.append(result.record)
        for det_idx, msg in result.assessment.failed:
            outcome.errors.append(
                f"frame {result.frame.index} person {det_idx} excluded: {msg}"
            )
        if result.annotated is not None and out_dir is not None:
            write_annotated_frame(out_dir, result.annotated)
        if on_result is not None:
            on_result(result)
        outcome.completion_timestamps_s.append(time.monotonic())
    return outcome


def stream_has_truth(records: Sequence[FrameRecord]) -> bool:
    return any(
        det.truth_label is not None or det.truth_violation is not None
        for record in records
        for det in record.detections
    )
