"""Synthetic-scene oracle.

Agents with known camera-frame positions and face widths are projected
through an ideal pinhole camera into detections, giving ground-truth
depths, separations and violation labels against which the estimation
pipeline is verified. Everything is driven by the package's fixed PRNG
(see ``rng``) so identical seeds produce identical scenes, detections
and downstream assessments on every platform.

Camera frame: X right, Y down, Z forward, meters. An agent's face of
width W at depth Z projects to a box of width P = F * W / Z centered at
(F*X/Z + cx, F*Y/Z + cy); the box height is ``BOX_ASPECT`` times its
width (only the width enters any distance math).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .classifier import LABELS, MaskLabel
from .errors import BehindCameraError, GeometryError
from .geometry import BoundingBox, DEFAULT_FACE_WIDTH_M, euclidean_distance
from .ingest import Frame, FrameRecord, RawDetection
from .rng import Xoshiro256StarStar, derive_seed

#: Height/width ratio of projected face boxes. Arbitrary but fixed.
BOX_ASPECT = 1.2

#: Flat background for rendered synthetic frames.
BACKGROUND_RGB = (24, 24, 24)

#: Fill colors by true label; co-designed with the reference backend's
#: channel rule so synthetic crops classify back to their true label.
FILL_RGB = {
    MaskLabel.WITH_MASK: (0, 176, 0),
    MaskLabel.WITHOUT_MASK: (176, 0, 0),
    MaskLabel.WORN_INCORRECTLY: (0, 0, 176),
}


@dataclass(frozen=True)
class Agent:
    position: tuple[float, float, float]  # (X, Y, Z) meters, camera frame
    face_width_m: float = DEFAULT_FACE_WIDTH_M
    label: MaskLabel = MaskLabel.WITH_MASK

    def __post_init__(self):
        if self.face_width_m <= 0:
            raise GeometryError(f"face width must be positive, got {self.face_width_m}")


@dataclass(frozen=True)
class SimCamera:
    focal_length_px: float = 800.0
    width: int = 640
    height: int = 480
    principal_point: tuple[float, float] | None = None  # None -> image center

    def __post_init__(self):
        if self.focal_length_px <= 0 or self.width <= 0 or self.height <= 0:
            raise GeometryError("camera focal length and dimensions must be positive")
        if self.principal_point is None:
            object.__setattr__(self, "principal_point", (self.width / 2.0, self.height / 2.0))


@dataclass(frozen=True)
class NoiseModel:
    quantize: bool = False  # round box coordinates to integer pixels
    jitter_sigma_px: float = 0.0  # Gaussian noise added to each coordinate

    def __post_init__(self):
        if self.jitter_sigma_px < 0:
            raise GeometryError(f"jitter sigma must be >= 0, got {self.jitter_sigma_px}")


@dataclass(frozen=True)
class SceneBounds:
    x: tuple[float, float] = (-0.9, 0.9)
    y: tuple[float, float] = (-0.35, 0.35)
    z: tuple[float, float] = (2.5, 8.0)

    def __post_init__(self):
        if self.z[0] <= 0:
            raise GeometryError(f"z range must start above 0, got {self.z}")
        for lo, hi in (self.x, self.y, self.z):
            if hi < lo:
                raise GeometryError(f"empty bound ({lo}, {hi})")


@dataclass(frozen=True)
class Scene:
    camera: SimCamera = field(default_factory=SimCamera)
    agents: tuple[Agent, ...] = ()
    noise: NoiseModel = field(default_factory=NoiseModel)

    def to_json_dict(self) -> dict:
        return {
            "camera": {
                "focal_length_px": self.camera.focal_length_px,
                "width": self.camera.width,
                "height": self.camera.height,
                "principal_point": list(self.camera.principal_point),
            },
            "agents": [
                {
                    "position": list(a.position),
                    "face_width_m": a.face_width_m,
                    "label": a.label.value,
                }
                for a in self.agents
            ],
            "noise": {
                "quantize": self.noise.quantize,
                "jitter_sigma_px": self.noise.jitter_sigma_px,
            },
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Scene":
        cam = data["camera"]
        return cls(
            camera=SimCamera(
                focal_length_px=float(cam["focal_length_px"]),
                width=int(cam["width"]),
                height=int(cam["height"]),
                principal_point=tuple(cam["principal_point"]),
            ),
            agents=tuple(
                Agent(
                    position=tuple(a["position"]),
                    face_width_m=float(a["face_width_m"]),
                    label=MaskLabel(a["label"]),
                )
                for a in data["agents"]
            ),
            noise=NoiseModel(
                quantize=bool(data["noise"]["quantize"]),
                jitter_sigma_px=float(data["noise"]["jitter_sigma_px"]),
            ),
        )


def _round_half_up(x: float) -> float:
    return math.floor(x + 0.5)


def project_agent(
    agent: Agent,
    camera: SimCamera,
    noise: NoiseModel | None = None,
    rng: Xoshiro256StarStar | None = None,
) -> BoundingBox:
    """Project an agent's face into a pixel box; noise applied if given.

    Jitter draws four normals in (x1, y1, x2, y2) order from ``rng``;
    quantization rounds half-up, platform-independently. Noise can make
    a box degenerate; downstream assessment reports such people as
    failed rather than this function rejecting them.
    """
    x, y, z = agent.position
    if z <= 0:
        raise BehindCameraError(f"agent at Z={z} is behind the camera")
    f = camera.focal_length_px
    cx, cy = camera.principal_point
    width = f * agent.face_width_m / z
    height = BOX_ASPECT * width
    u = f * x / z + cx
    v = f * y / z + cy
    coords = [u - width / 2, v - height / 2, u + width / 2, v + height / 2]
    if noise is not None and noise.jitter_sigma_px > 0:
        if rng is None:
            raise GeometryError("jitter noise requires an rng")
        coords = [c + rng.normal(0.0, noise.jitter_sigma_px) for c in coords]
    if noise is not None and noise.quantize:
        coords = [_round_half_up(c) for c in coords]
    return BoundingBox(*coords)


def ground_truth_distances(scene: Scene) -> np.ndarray:
    """Exact 3D separation for every agent pair; symmetric, zero diagonal."""
    n = len(scene.agents)
    out = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            d = euclidean_distance(scene.agents[i].position, scene.agents[j].position)
            out[i, j] = out[j, i] = d
    return out


def ground_truth_violation_pairs(scene: Scene, threshold_m: float) -> list[tuple[int, int]]:
    """Agent pairs strictly closer than the threshold, by true 3D distance."""
    dists = ground_truth_distances(scene)
    n = len(scene.agents)
    return [(i, j) for i in range(n) for j in range(i + 1, n) if dists[i, j] < threshold_m]


def generate_scene(
    n_agents: int,
    seed: int,
    bounds: SceneBounds = SceneBounds(),
    camera: SimCamera = SimCamera(),
    face_width_m: float = DEFAULT_FACE_WIDTH_M,
    noise: NoiseModel = NoiseModel(),
) -> Scene:
    """Uniformly place agents in the bounds; deterministic per seed.

    Draw order per agent is x, y, z, label; changing it would invalidate
    golden files.
    """
    if n_agents < 0:
        raise GeometryError(f"agent count must be >= 0, got {n_agents}")
    gen = Xoshiro256StarStar(derive_seed(seed))
    agents = []
    for _ in range(n_agents):
        x = gen.uniform(*bounds.x)
        y = gen.uniform(*bounds.y)
        z = gen.uniform(*bounds.z)
        label = LABELS[gen.randint(len(LABELS))]
        agents.append(Agent(position=(x, y, z), face_width_m=face_width_m, label=label))
    return Scene(camera=camera, agents=tuple(agents), noise=noise)


def scene_frame_record(
    scene: Scene,
    frame_index: int,
    threshold_m: float,
    rng: Xoshiro256StarStar | None = None,
) -> FrameRecord:
    """Project the scene into the detection-stream schema with truth labels."""
    violating: set[int] = set()
    for i, j in ground_truth_violation_pairs(scene, threshold_m):
        violating.update((i, j))
    detections = []
    for idx, agent in enumerate(scene.agents):
        box = project_agent(agent, scene.camera, noise=scene.noise, rng=rng)
        detections.append(
            RawDetection(
                box=box,
                confidence=1.0,
                truth_label=agent.label,
                truth_violation=idx in violating,
            )
        )
    return FrameRecord(frame=frame_index, detections=tuple(detections))


def render_scene_frame(scene: Scene, frame_index: int, timestamp_ms: int) -> Frame:
    """Flat-render the scene: background plus one filled box per agent.

    Agents are painted far to near so overlaps resolve deterministically.
    Fill rasterization matches ``ingest.crop_face`` (floor/ceil), so a
    noiseless crop of a non-overlapped agent is pure fill color.
    """
    cam = scene.camera
    pixels = np.empty((cam.height, cam.width, 3), dtype=np.uint8)
    pixels[:, :] = BACKGROUND_RGB
    order = sorted(range(len(scene.agents)), key=lambda i: -scene.agents[i].position[2])
    for idx in order:
        agent = scene.agents[idx]
        box = project_agent(agent, cam)  # rendering shows the true, noiseless extent
        x1 = max(0, math.floor(box.x1))
        y1 = max(0, math.floor(box.y1))
        x2 = min(cam.width, math.ceil(box.x2))
        y2 = min(cam.height, math.ceil(box.y2))
        if x2 > x1 and y2 > y1:
            pixels[y1:y2, x1:x2] = FILL_RGB[agent.label]
    return Frame(index=frame_index, timestamp_ms=timestamp_ms, pixels=pixels)


def save_scene(scene: Scene, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scene.to_json_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_scene(path) -> Scene:
    with open(path, "r", encoding="utf-8") as fh:
        return Scene.from_json_dict(json.load(fh))


def simulation_calibration(scene: Scene):
    """Calibration consistent with the scene's camera and face width.

    The stored reference distance is the pinhole-consistent distance at
    which a face would span ``focal_length_px * face_width`` pixels / F,
    i.e. 1 m; only F and W enter depth estimation.
    """
    from .geometry import CameraCalibration

    widths = {a.face_width_m for a in scene.agents} or {DEFAULT_FACE_WIDTH_M}
    if len(widths) != 1:
        raise GeometryError("scene agents have mixed face widths; calibration is ambiguous")
    return CameraCalibration(
        focal_length_px=scene.camera.focal_length_px,
        known_face_width_m=widths.pop(),
        reference_distance_m=1.0,
        principal_point=scene.camera.principal_point,
    )


def sample_streams(
    n_agents: int,
    n_frames: int,
    seed: int,
    threshold_m: float,
    bounds: SceneBounds = SceneBounds(),
    camera: SimCamera = SimCamera(),
    face_width_m: float = DEFAULT_FACE_WIDTH_M,
    noise: NoiseModel = NoiseModel(),
    frame_period_ms: int = 40,
) -> Sequence[tuple[Scene, Frame, FrameRecord]]:
    """Independent per-frame scenes from substreams of one seed.

    Frame k uses scene seed ``derive_seed(seed, k)`` and, when noise is
    enabled, detection-noise stream ``derive_seed(seed, k, 1)``.
    """
    out = []
    for k in range(n_frames):
        scene = generate_scene(
            n_agents,
            derive_seed(seed, k),
            bounds=bounds,
            camera=camera,
            face_width_m=face_width_m,
            noise=noise,
        )
        noise_rng = Xoshiro256StarStar(derive_seed(seed, k, 1))
        record = scene_frame_record(scene, k, threshold_m, rng=noise_rng)
        frame = render_scene_frame(scene, k, k * frame_period_ms)
        out.append((scene, frame, record))
    return out
