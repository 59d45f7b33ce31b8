"""The fixed synthetic scene behind the annotated-frame golden file.

Shared by the regression test and scripts/regen_golden.py so both sides
always compute the same frame.
"""

from proximity_sentinel.classifier import ReferenceBackend
from proximity_sentinel.geometry import DistanceMode
from proximity_sentinel.ingest import Frame
from proximity_sentinel.pipeline import process_frame
from proximity_sentinel.render import AnnotationStyle
from proximity_sentinel.simulator import (
    generate_scene,
    render_scene_frame,
    scene_frame_record,
    simulation_calibration,
)
from proximity_sentinel.violation import ViolationPolicy

GOLDEN_SEED = 42
GOLDEN_AGENTS = 5


def build_annotated_seed42() -> Frame:
    scene = generate_scene(GOLDEN_AGENTS, seed=GOLDEN_SEED)
    frame = render_scene_frame(scene, 0, 0)
    record = scene_frame_record(scene, 0, threshold_m=1.8288)
    calib = simulation_calibration(scene)
    policy = ViolationPolicy(mode=DistanceMode.BACK_PROJECTION)
    result = process_frame(frame, record, calib, policy, ReferenceBackend(), AnnotationStyle())
    return result.annotated
