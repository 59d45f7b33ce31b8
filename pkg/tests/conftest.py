import hypothesis
import numpy as np
import pytest

from proximity_sentinel.geometry import CameraCalibration

hypothesis.settings.register_profile("ci", max_examples=200)
hypothesis.settings.register_profile("fast", max_examples=20)


@pytest.fixture
def calib():
    # f=800px, W=0.15m, reference shot at 2m, 640x480 principal point
    return CameraCalibration(
        focal_length_px=800.0,
        known_face_width_m=0.15,
        reference_distance_m=2.0,
        principal_point=(320.0, 240.0),
    )


@pytest.fixture
def black_frame():
    from proximity_sentinel.ingest import Frame

    return Frame(index=0, timestamp_ms=0, pixels=np.zeros((100, 100, 3), dtype=np.uint8))
