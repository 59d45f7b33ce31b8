"""Run configuration: defaults, TOML config file, flag overrides.

Precedence is flags > config file > defaults. The config file path
comes from ``--config`` or the ``PROXIMITY_SENTINEL_CONFIG`` environment
variable and contains a single ``[run]`` table::

    [run]
    frames = "sim/frames"
    detections = "sim/detections.jsonl"
    calibration = "sim/calibration.json"
    out = "out"
    threshold_m = 1.8288
    mode = "reference-scale"        # or "back-projection"
    mask_required = true
    backend = "reference"           # or "onnx"
    model = "model.onnx"
    workers = 0                     # 0 -> logical CPU count
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields

from .errors import UsageError
from .geometry import DistanceMode
from .violation import SIX_FEET_M

try:
    import tomllib  # Python 3.11+
except ModuleNotFoundError:  # pragma: no cover - version dependent
    import tomli as tomllib

CONFIG_ENV_VAR = "PROXIMITY_SENTINEL_CONFIG"

#: Registry for pluggable detectors selectable from the CLI. Empty by
#: default: no face detector ships with this package.
DETECTOR_REGISTRY: dict[str, object] = {}

_MODES = {m.value: m for m in DistanceMode}


@dataclass
class RunConfig:
    frames_dir: str | None = None
    detections_path: str | None = None
    detector: str | None = None
    calibration_path: str | None = None
    out_dir: str | None = None
    threshold_m: float = SIX_FEET_M
    mode: DistanceMode = DistanceMode.REFERENCE_SCALE
    mask_required: bool = True
    backend: str = "reference"
    model_path: str | None = None
    workers: int = 0

    def resolved_workers(self) -> int:
        if self.workers < 0:
            raise UsageError(f"workers must be >= 0, got {self.workers}")
        return self.workers or (os.cpu_count() or 1)


_FILE_KEYS = {
    "frames": "frames_dir",
    "detections": "detections_path",
    "detector": "detector",
    "calibration": "calibration_path",
    "out": "out_dir",
    "threshold_m": "threshold_m",
    "mode": "mode",
    "mask_required": "mask_required",
    "backend": "backend",
    "model": "model_path",
    "workers": "workers",
}


def _parse_mode(value) -> DistanceMode:
    if isinstance(value, DistanceMode):
        return value
    if value not in _MODES:
        raise UsageError(f"unknown distance mode {value!r}; expected one of {sorted(_MODES)}")
    return _MODES[value]


def load_config_file(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"malformed config file {path}: {exc}")
    table = doc.get("run", {})
    unknown = set(table) - set(_FILE_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys in {path}: {sorted(unknown)}")
    return {_FILE_KEYS[k]: v for k, v in table.items()}


def resolve_run_config(cli_overrides: dict, config_path: str | None = None) -> RunConfig:
    """Merge defaults, optional config file, and CLI flags (highest)."""
    values: dict = {}
    path = config_path or os.environ.get(CONFIG_ENV_VAR)
    if path:
        values.update(load_config_file(path))
    values.update({k: v for k, v in cli_overrides.items() if v is not None})
    if "mode" in values:
        values["mode"] = _parse_mode(values["mode"])
    known = {f.name for f in fields(RunConfig)}
    config = RunConfig(**{k: v for k, v in values.items() if k in known})
    _validate(config)
    return config


def _validate(config: RunConfig) -> None:
    if config.threshold_m <= 0:
        raise UsageError(f"threshold must be positive, got {config.threshold_m}")
    if config.frames_dir is None:
        raise UsageError("an input frame directory is required (--frames)")
    if not os.path.isdir(config.frames_dir):
        raise UsageError(f"frame directory not found: {config.frames_dir}")
    sources = [s for s in (config.detections_path, config.detector) if s]
    if len(sources) != 1:
        raise UsageError("exactly one detection source is required (--detections or --detector)")
    if config.detector is not None and config.detector not in DETECTOR_REGISTRY:
        raise UsageError(
            f"unknown detector {config.detector!r}; registered: {sorted(DETECTOR_REGISTRY)}"
        )
    if config.detections_path is not None and not os.path.isfile(config.detections_path):
        raise UsageError(f"detection stream not found: {config.detections_path}")
    if config.calibration_path is None:
        raise UsageError("a calibration file is required (--calibration)")
    if not os.path.isfile(config.calibration_path):
        raise UsageError(f"calibration file not found: {config.calibration_path}")
    if config.backend not in ("reference", "onnx"):
        raise UsageError(f"unknown backend {config.backend!r}; expected reference or onnx")
    if config.backend == "onnx":
        if not config.model_path:
            raise UsageError("--model is required with the onnx backend")
        if not os.path.isfile(config.model_path):
            raise UsageError(f"model file not found: {config.model_path}")
