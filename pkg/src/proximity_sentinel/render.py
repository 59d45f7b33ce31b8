"""Annotated-frame rendering and report emission.

Rendering is pure: the same (frame, assessment, style) produces byte-
identical output, and only box-outline and label pixels differ from the
input frame. Out-of-bounds pixels are clipped, never wrapped.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .classifier import Classification, MaskLabel
from .ingest import Frame
from .ppm import write_ppm
from .violation import BoxColor, FrameAssessment, Metrics, PersonAssessment

LABEL_TEXT = {
    MaskLabel.WITH_MASK: "MASK",
    MaskLabel.WITHOUT_MASK: "NO MASK",
    MaskLabel.WORN_INCORRECTLY: "INCORRECT",
}

# 5x7 bitmap glyphs, one int per row, bit 4 = leftmost column. Covers
# exactly the letters used by the label strings.
_GLYPHS = {
    "A": (0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11),
    "C": (0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E),
    "E": (0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F),
    "I": (0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E),
    "K": (0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11),
    "M": (0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11),
    "N": (0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11),
    "O": (0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E),
    "R": (0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11),
    "S": (0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E),
    "T": (0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04),
    " ": (0, 0, 0, 0, 0, 0, 0),
}
_GLYPH_W, _GLYPH_H, _GLYPH_ADVANCE = 5, 7, 6


@dataclass(frozen=True)
class AnnotationStyle:
    compliant_rgb: tuple[int, int, int] = (0, 255, 0)
    violation_rgb: tuple[int, int, int] = (255, 0, 0)
    thickness: int = 2
    draw_labels: bool = True

    def __post_init__(self):
        if self.thickness < 1:
            raise ValueError(f"thickness must be >= 1, got {self.thickness}")


def _fill(pixels: np.ndarray, x1: int, y1: int, x2: int, y2: int, rgb) -> None:
    h, w = pixels.shape[:2]
    x1, y1 = max(0, x1), max(0, y1)
    x2, y2 = min(w, x2), min(h, y2)
    if x2 > x1 and y2 > y1:
        pixels[y1:y2, x1:x2] = rgb


def _draw_outline(pixels: np.ndarray, person: PersonAssessment, rgb, t: int) -> None:
    x1 = math.floor(person.box.x1)
    y1 = math.floor(person.box.y1)
    x2 = math.ceil(person.box.x2)
    y2 = math.ceil(person.box.y2)
    _fill(pixels, x1, y1, x2, y1 + t, rgb)  # top
    _fill(pixels, x1, y2 - t, x2, y2, rgb)  # bottom
    _fill(pixels, x1, y1, x1 + t, y2, rgb)  # left
    _fill(pixels, x2 - t, y1, x2, y2, rgb)  # right


def _draw_text(pixels: np.ndarray, text: str, x: int, y: int, rgb) -> None:
    h, w = pixels.shape[:2]
    for ch in text:
        glyph = _GLYPHS.get(ch)
        if glyph is None:
            glyph = _GLYPHS[" "]
        for row in range(_GLYPH_H):
            bits = glyph[row]
            py = y + row
            if not 0 <= py < h:
                continue
            for col in range(_GLYPH_W):
                if bits & (1 << (_GLYPH_W - 1 - col)):
                    px = x + col
                    if 0 <= px < w:
                        pixels[py, px] = rgb
        x += _GLYPH_ADVANCE


def annotate(
    frame: Frame, assessment: FrameAssessment, style: AnnotationStyle = AnnotationStyle()
) -> Frame:
    """Copy the frame and draw each person's outline (and label text) in
    the color dictated by their assessment. The source frame is untouched."""
    pixels = frame.pixels.copy()
    for person in assessment.persons:
        rgb = style.violation_rgb if person.box_color is BoxColor.RED else style.compliant_rgb
        _draw_outline(pixels, person, rgb, style.thickness)
        if style.draw_labels:
            text = LABEL_TEXT[person.classification.label]
            _draw_text(
                pixels,
                text,
                math.floor(person.box.x1),
                math.floor(person.box.y1) - _GLYPH_H - 2,
                rgb,
            )
    return Frame(index=frame.index, timestamp_ms=frame.timestamp_ms, pixels=pixels)


def annotated_frame_path(out_dir, frame_index: int) -> str:
    return os.path.join(out_dir, f"frame_{frame_index:06d}.ppm")


def write_annotated_frame(out_dir, frame: Frame) -> str:
    path = annotated_frame_path(out_dir, frame.index)
    write_ppm(path, frame.pixels)
    return path


def violation_events(assessment: FrameAssessment) -> list[dict]:
    return [
        {
            "frame": assessment.frame_index,
            "pair": [i, j],
            "distance_m": assessment.pair_distance(i, j),
        }
        for i, j in assessment.violation_pairs
    ]


def person_to_json_dict(person: PersonAssessment) -> dict:
    return {
        "index": person.index,
        "box": [person.box.x1, person.box.y1, person.box.x2, person.box.y2],
        "label": person.classification.label.value,
        "scores": list(person.classification.scores),
        "sd_violation": person.sd_violation,
        "color": person.box_color.value,
        "partners": sorted(person.violating_partners),
    }


def assessment_to_json_dict(assessment: FrameAssessment) -> dict:
    return {
        "frame": assessment.frame_index,
        "persons": [person_to_json_dict(p) for p in assessment.persons],
        "failed": [[i, msg] for i, msg in assessment.failed],
    }


def write_run_report(
    assessments: Sequence[FrameAssessment],
    metrics: Metrics,
    out_dir,
    n_frames: int | None = None,
) -> tuple[str, str]:
    """Write the violation event log (JSONL) and summary JSON.

    Both files are deterministic: frames in index order, pairs sorted,
    keys sorted. Returns (events_path, summary_path).
    """
    os.makedirs(out_dir, exist_ok=True)
    events_path = os.path.join(out_dir, "violations.jsonl")
    ordered = sorted(assessments, key=lambda a: a.frame_index)
    n_pairs = 0
    with open(events_path, "w", encoding="utf-8") as fh:
        for assessment in ordered:
            for event in violation_events(assessment):
                fh.write(json.dumps(event, sort_keys=True))
                fh.write("\n")
                n_pairs += 1
    summary = {
        "frames": len(ordered) if n_frames is None else n_frames,
        "violations": n_pairs,
        "precision": metrics.precision,
        "recall": metrics.recall,
        "f1": metrics.f1,
        "fps": metrics.fps,
        "degenerate_denominators": metrics.degenerate_denominators,
    }
    summary_path = os.path.join(out_dir, "summary.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return events_path, summary_path


def write_assessments(assessments: Sequence[FrameAssessment], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for assessment in sorted(assessments, key=lambda a: a.frame_index):
            fh.write(json.dumps(assessment_to_json_dict(assessment), sort_keys=True))
            fh.write("\n")


def load_assessments(path) -> list[FrameAssessment]:
    """Rebuild assessments from an assessments.jsonl file.

    Distances are not persisted; the loaded objects carry everything the
    evaluation command needs (indices, labels, colors, failures).
    """
    from .geometry import BoundingBox

    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            data = json.loads(line)
            persons = []
            for p in data["persons"]:
                classification = Classification(
                    label=MaskLabel(p["label"]), scores=tuple(p["scores"])
                )
                persons.append(
                    PersonAssessment(
                        index=int(p["index"]),
                        box=BoundingBox(*p["box"]),
                        classification=classification,
                        sd_violation=bool(p["sd_violation"]),
                        box_color=BoxColor(p["color"]),
                        violating_partners=frozenset(p["partners"]),
                    )
                )
            out.append(
                FrameAssessment(
                    frame_index=int(data["frame"]),
                    persons=tuple(persons),
                    distances=np.zeros((len(persons), len(persons))),
                    violation_pairs=(),
                    failed=tuple((int(i), str(m)) for i, m in data.get("failed", [])),
                )
            )
    return out
