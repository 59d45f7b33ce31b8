import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from proximity_sentinel.classifier import MaskLabel
from proximity_sentinel.errors import (
    DecodeError,
    EmptyCropError,
    StreamOrderError,
    StreamParseError,
)
from proximity_sentinel.geometry import BoundingBox
from proximity_sentinel.ingest import (
    Frame,
    FrameRecord,
    RawDetection,
    crop_face,
    dump_detection_stream,
    load_detection_stream,
    open_frame_source,
    record_from_json_dict,
    record_to_json_dict,
)
from proximity_sentinel.ppm import read_ppm, write_ppm


def solid_pixels(h, w, rgb):
    px = np.empty((h, w, 3), dtype=np.uint8)
    px[:, :] = rgb
    return px


class TestPpm:
    def test_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(7)
        pixels = rng.integers(0, 256, size=(33, 21, 3), dtype=np.uint8)
        path = tmp_path / "img.ppm"
        write_ppm(path, pixels)
        assert np.array_equal(read_ppm(path), pixels)

    def test_truncated_raster_names_file(self, tmp_path):
        path = tmp_path / "broken.ppm"
        path.write_bytes(b"P6\n4 4\n255\n" + b"\x00" * 10)
        with pytest.raises(DecodeError, match="broken.ppm"):
            read_ppm(path)

    def test_header_comments_are_skipped(self, tmp_path):
        path = tmp_path / "c.ppm"
        path.write_bytes(b"P6\n# a comment\n2 1\n255\n" + bytes(6))
        assert read_ppm(path).shape == (1, 2, 3)

    def test_wrong_magic_rejected(self, tmp_path):
        path = tmp_path / "p5.ppm"
        path.write_bytes(b"P5\n2 2\n255\n" + bytes(4))
        with pytest.raises(DecodeError):
            read_ppm(path)


class TestFrameSource:
    def test_lexicographic_order_and_indices(self, tmp_path):
        write_ppm(tmp_path / "b.ppm", solid_pixels(2, 2, (1, 2, 3)))
        write_ppm(tmp_path / "a.ppm", solid_pixels(3, 2, (9, 9, 9)))
        frames = list(open_frame_source(tmp_path))
        assert [f.index for f in frames] == [0, 1]
        assert frames[0].height == 3  # a.ppm first
        assert [f.timestamp_ms for f in frames] == [0, 40]

    def test_empty_dir_yields_nothing(self, tmp_path):
        assert list(open_frame_source(tmp_path)) == []

    def test_truncated_file_raises_with_name(self, tmp_path):
        (tmp_path / "bad.ppm").write_bytes(b"P6\n9 9\n255\nxx")
        with pytest.raises(DecodeError, match="bad.ppm"):
            list(open_frame_source(tmp_path))

    def test_unsupported_format_rejected(self, tmp_path):
        (tmp_path / "notes.txt").write_text("hello")
        with pytest.raises(DecodeError, match="unsupported"):
            list(open_frame_source(tmp_path))

    def test_png_decoding(self, tmp_path):
        from PIL import Image

        pixels = solid_pixels(4, 6, (10, 20, 30))
        Image.fromarray(pixels).save(tmp_path / "f.png")
        frames = list(open_frame_source(tmp_path))
        assert np.array_equal(frames[0].pixels, pixels)


class TestDetectionStream:
    def test_single_line_example(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text('{"frame":0,"detections":[{"box":[10,5,70,80],"conf":0.9}]}\n')
        records = list(load_detection_stream(path))
        assert len(records) == 1
        det = records[0].detections[0]
        assert det.box.x2 - det.box.x1 == 60
        assert det.confidence == 0.9

    def test_empty_detections_allowed(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text('{"frame":1,"detections":[]}\n')
        assert list(load_detection_stream(path)) == [FrameRecord(frame=1)]

    def test_decreasing_frame_rejected(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text('{"frame":5,"detections":[]}\n{"frame":3,"detections":[]}\n')
        with pytest.raises(StreamOrderError, match=":2"):
            list(load_detection_stream(path))

    def test_malformed_line_number_reported(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text('{"frame":0,"detections":[]}\nnot json\n')
        with pytest.raises(StreamParseError, match=":2"):
            list(load_detection_stream(path))

    def test_bad_confidence_rejected(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text('{"frame":0,"detections":[{"box":[0,0,1,1],"conf":1.5}]}\n')
        with pytest.raises(StreamParseError):
            list(load_detection_stream(path))

    def test_truth_fields_parsed(self, tmp_path):
        path = tmp_path / "d.jsonl"
        line = {
            "frame": 0,
            "detections": [
                {"box": [0, 0, 5, 5], "conf": 1.0, "truth_label": "without_mask", "truth_violation": True}
            ],
        }
        path.write_text(json.dumps(line) + "\n")
        det = next(iter(load_detection_stream(path))).detections[0]
        assert det.truth_label is MaskLabel.WITHOUT_MASK
        assert det.truth_violation is True

    def test_unknown_truth_label_rejected(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text('{"frame":0,"detections":[{"box":[0,0,1,1],"conf":1,"truth_label":"hat"}]}\n')
        with pytest.raises(StreamParseError):
            list(load_detection_stream(path))

    def test_file_round_trip(self, tmp_path):
        records = [
            FrameRecord(
                frame=0,
                detections=(
                    RawDetection(BoundingBox(1.5, 2.5, 20.0, 25.0), 0.75, MaskLabel.WITH_MASK, False),
                ),
            ),
            FrameRecord(frame=2),
        ]
        path = tmp_path / "d.jsonl"
        dump_detection_stream(records, path)
        assert list(load_detection_stream(path)) == records


detections_strategy = st.builds(
    RawDetection,
    box=st.builds(
        lambda x1, y1, w, h: BoundingBox(x1, y1, x1 + w, y1 + h),
        st.floats(-50, 500, allow_nan=False),
        st.floats(-50, 500, allow_nan=False),
        st.floats(0.001, 200),
        st.floats(0.001, 200),
    ),
    confidence=st.floats(0, 1),
    truth_label=st.none() | st.sampled_from(list(MaskLabel)),
    truth_violation=st.none() | st.booleans(),
)


@given(st.integers(0, 10_000), st.lists(detections_strategy, max_size=5))
def test_record_json_round_trip(frame, detections):
    record = FrameRecord(frame=frame, detections=tuple(detections))
    assert record_from_json_dict(record_to_json_dict(record)) == record


class TestCropFace:
    def test_interior_crop(self, black_frame):
        crop = crop_face(black_frame, BoundingBox(10, 10, 60, 60))
        assert crop.shape == (50, 50, 3)

    def test_clamped_at_origin(self, black_frame):
        crop = crop_face(black_frame, BoundingBox(-10, -10, 20, 20))
        assert crop.shape == (20, 20, 3)

    def test_fully_outside_rejected(self, black_frame):
        with pytest.raises(EmptyCropError):
            crop_face(black_frame, BoundingBox(200, 200, 300, 300))

    def test_pixels_match_source(self):
        rng = np.random.default_rng(3)
        pixels = rng.integers(0, 256, size=(40, 50, 3), dtype=np.uint8)
        frame = Frame(index=0, timestamp_ms=0, pixels=pixels)
        crop = crop_face(frame, BoundingBox(5, 7, 20, 31))
        assert np.array_equal(crop, pixels[7:31, 5:20])

    def test_crop_is_a_copy(self, black_frame):
        crop = crop_face(black_frame, BoundingBox(0, 0, 10, 10))
        crop[:] = 255
        assert black_frame.pixels[0, 0, 0] == 0

    @given(
        st.floats(-30, 120, allow_nan=False),
        st.floats(-30, 120, allow_nan=False),
        st.floats(0.5, 150),
        st.floats(0.5, 150),
    )
    def test_dims_equal_clamped_box(self, x1, y1, w, h):
        import math

        frame = Frame(index=0, timestamp_ms=0, pixels=np.zeros((100, 100, 3), dtype=np.uint8))
        box = BoundingBox(x1, y1, x1 + w, y1 + h)
        cx1 = max(0, math.floor(box.x1))
        cy1 = max(0, math.floor(box.y1))
        cx2 = min(100, math.ceil(box.x2))
        cy2 = min(100, math.ceil(box.y2))
        if cx2 <= cx1 or cy2 <= cy1:
            with pytest.raises(EmptyCropError):
                crop_face(frame, box)
        else:
            assert crop_face(frame, box).shape == (cy2 - cy1, cx2 - cx1, 3)
