import json

import numpy as np
import pytest

from proximity_sentinel.classifier import MaskLabel
from proximity_sentinel.errors import BehindCameraError, GeometryError
from proximity_sentinel.geometry import estimate_depth
from proximity_sentinel.ingest import record_to_json_dict
from proximity_sentinel.rng import Xoshiro256StarStar, derive_seed
from proximity_sentinel.simulator import (
    Agent,
    NoiseModel,
    Scene,
    SceneBounds,
    SimCamera,
    generate_scene,
    ground_truth_distances,
    ground_truth_violation_pairs,
    project_agent,
    render_scene_frame,
    sample_streams,
    scene_frame_record,
    simulation_calibration,
)

CAMERA = SimCamera(focal_length_px=800.0, width=640, height=480)


class TestProjection:
    def test_centered_agent(self):
        camera = SimCamera(focal_length_px=800.0, width=640, height=640)  # cx = cy = 320
        box = project_agent(Agent(position=(0.0, 0.0, 2.0)), camera)
        assert box.x2 - box.x1 == pytest.approx(60.0)
        assert box.centroid() == pytest.approx((320.0, 320.0))

    def test_width_halves_with_depth(self):
        box = project_agent(Agent(position=(0.0, 0.0, 4.0)), CAMERA)
        assert box.x2 - box.x1 == pytest.approx(30.0)

    def test_aspect_ratio(self):
        box = project_agent(Agent(position=(0.3, -0.1, 3.0)), CAMERA)
        assert (box.y2 - box.y1) / (box.x2 - box.x1) == pytest.approx(1.2)

    def test_behind_camera_rejected(self):
        with pytest.raises(BehindCameraError):
            project_agent(Agent(position=(0.0, 0.0, -1.0)), CAMERA)

    def test_quantize_rounds_half_up(self):
        agent = Agent(position=(0.013, 0.027, 2.0))
        box = project_agent(agent, CAMERA, noise=NoiseModel(quantize=True))
        for c in (box.x1, box.y1, box.x2, box.y2):
            assert c == int(c)

    def test_jitter_is_deterministic_per_stream(self):
        noise = NoiseModel(jitter_sigma_px=1.5)
        agent = Agent(position=(0.0, 0.0, 3.0))
        a = project_agent(agent, CAMERA, noise=noise, rng=Xoshiro256StarStar(9))
        b = project_agent(agent, CAMERA, noise=noise, rng=Xoshiro256StarStar(9))
        assert a == b

    def test_depth_round_trip_through_estimator(self):
        calib = simulation_calibration(
            Scene(camera=CAMERA, agents=(Agent(position=(0.4, 0.1, 5.5)),))
        )
        agent = Agent(position=(0.4, 0.1, 5.5))
        box = project_agent(agent, CAMERA)
        assert estimate_depth(calib, box) == pytest.approx(5.5, rel=1e-9)


class TestGroundTruth:
    def test_axial_pair(self):
        scene = Scene(
            camera=CAMERA,
            agents=(Agent(position=(0, 0, 2.0)), Agent(position=(0, 0, 4.0))),
        )
        assert ground_truth_distances(scene)[0, 1] == 2.0

    def test_known_diagonal(self):
        scene = Scene(
            camera=CAMERA,
            agents=(Agent(position=(2, 0, 4)), Agent(position=(-1, 0, 5))),
        )
        assert ground_truth_distances(scene)[0, 1] == pytest.approx(3.1622776601683795)

    def test_single_agent(self):
        scene = Scene(camera=CAMERA, agents=(Agent(position=(0, 0, 3)),))
        assert ground_truth_distances(scene).shape == (1, 1)
        assert ground_truth_distances(scene)[0, 0] == 0.0

    def test_violation_pairs_strictly_below_threshold(self):
        scene = Scene(
            camera=CAMERA,
            agents=(Agent(position=(0, 0, 2.0)), Agent(position=(0, 0, 4.0))),
        )
        assert ground_truth_violation_pairs(scene, 2.0) == []
        assert ground_truth_violation_pairs(scene, 2.0001) == [(0, 1)]


class TestGenerateScene:
    def test_deterministic_per_seed(self):
        a = generate_scene(12, seed=42)
        b = generate_scene(12, seed=42)
        assert json.dumps(a.to_json_dict(), sort_keys=True) == json.dumps(
            b.to_json_dict(), sort_keys=True
        )
        assert generate_scene(12, seed=43) != a

    def test_zero_agents(self):
        assert generate_scene(0, seed=1).agents == ()

    def test_agents_respect_bounds(self):
        bounds = SceneBounds(x=(-1, 1), y=(-0.5, 0.5), z=(1, 10))
        scene = generate_scene(1000, seed=7, bounds=bounds)
        f, w = CAMERA.focal_length_px, 0.15
        for agent in scene.agents:
            x, y, z = agent.position
            assert -1 <= x <= 1 and -0.5 <= y <= 0.5 and 1 <= z <= 10
            box = project_agent(agent, CAMERA)
            assert f * w / 10 <= box.x2 - box.x1 <= f * w / 1

    def test_bad_bounds_rejected(self):
        with pytest.raises(GeometryError):
            SceneBounds(z=(0.0, 5.0))

    def test_scene_json_round_trip(self):
        scene = generate_scene(5, seed=3)
        assert Scene.from_json_dict(scene.to_json_dict()) == scene


class TestSceneStreams:
    def test_record_carries_truth(self):
        scene = Scene(
            camera=CAMERA,
            agents=(
                Agent(position=(0, 0, 2.0), label=MaskLabel.WITHOUT_MASK),
                Agent(position=(0.1, 0, 2.0), label=MaskLabel.WITH_MASK),
            ),
        )
        record = scene_frame_record(scene, 4, threshold_m=1.8288)
        assert record.frame == 4
        assert record.detections[0].truth_label is MaskLabel.WITHOUT_MASK
        assert all(d.truth_violation for d in record.detections)  # 0.1 m apart

    def test_streams_deterministic(self):
        a = sample_streams(4, 3, seed=42, threshold_m=1.8288)
        b = sample_streams(4, 3, seed=42, threshold_m=1.8288)
        for (sa, fa, ra), (sb, fb, rb) in zip(a, b):
            assert sa == sb
            assert np.array_equal(fa.pixels, fb.pixels)
            assert record_to_json_dict(ra) == record_to_json_dict(rb)

    def test_distinct_frames_differ(self):
        streams = sample_streams(4, 2, seed=42, threshold_m=1.8288)
        assert streams[0][0] != streams[1][0]

    def test_rendered_crop_is_pure_fill(self):
        scene = Scene(
            camera=CAMERA,
            agents=(Agent(position=(0.2, 0.05, 3.0), label=MaskLabel.WORN_INCORRECTLY),),
        )
        frame = render_scene_frame(scene, 0, 0)
        from proximity_sentinel.ingest import crop_face
        from proximity_sentinel.simulator import FILL_RGB

        crop = crop_face(frame, project_agent(scene.agents[0], CAMERA))
        assert np.all(crop.reshape(-1, 3) == FILL_RGB[MaskLabel.WORN_INCORRECTLY])

    def test_quantized_depth_error_within_analytic_bound(self):
        # |Z_hat - Z| <= W*f / (P*(P-1)) when each corner moves < 0.5 px
        calib_scene = Scene(camera=CAMERA, agents=(Agent(position=(0, 0, 2.0)),))
        calib = simulation_calibration(calib_scene)
        gen = Xoshiro256StarStar(derive_seed(99))
        f, w = CAMERA.focal_length_px, 0.15
        for _ in range(500):
            z = gen.uniform(1.0, 6.0)
            agent = Agent(position=(gen.uniform(-0.5, 0.5), gen.uniform(-0.3, 0.3), z))
            true_width = f * w / z
            assert true_width >= 20
            box = project_agent(agent, CAMERA, noise=NoiseModel(quantize=True))
            err = abs(estimate_depth(calib, box) - z)
            assert err <= w * f / (true_width * (true_width - 1))


class TestRngContract:
    def test_uniform_range_and_determinism(self):
        a = Xoshiro256StarStar(123)
        b = Xoshiro256StarStar(123)
        seq = [a.uniform01() for _ in range(1000)]
        assert seq == [b.uniform01() for _ in range(1000)]
        assert all(0.0 <= u < 1.0 for u in seq)

    def test_derive_seed_separates_streams(self):
        assert derive_seed(1, 2) != derive_seed(1, 3)
        assert derive_seed(1, 2) != derive_seed(2, 1)

    def test_normal_moments_are_sane(self):
        gen = Xoshiro256StarStar(7)
        samples = np.array([gen.normal() for _ in range(20000)])
        assert abs(samples.mean()) < 0.05
        assert abs(samples.std() - 1.0) < 0.05
