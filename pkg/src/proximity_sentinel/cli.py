"""Command-line surface wiring the pipeline end to end.

Subcommands: calibrate, run, simulate, bench, evaluate. Exit codes:
0 success, 1 runtime/data failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import simulator
from .classifier import OnnxBackend, ReferenceBackend
from .config import RunConfig, resolve_run_config
from .errors import SentinelError, UndefinedRateError, UsageError
from .geometry import (
    CameraCalibration,
    DistanceMode,
    calibrate_focal_length,
    load_calibration,
    save_calibration,
)
from .ingest import dump_detection_stream, load_detection_stream, open_frame_source
from .pipeline import run_pipeline, stream_has_truth
from .ppm import write_ppm
from .render import (
    AnnotationStyle,
    load_assessments,
    write_assessments,
    write_run_report,
)
from .violation import (
    Metrics,
    SIX_FEET_M,
    ViolationPolicy,
    compliance_metrics,
    fps_from_millis,
    fps_meter,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proximity-sentinel",
        description="Social-distancing and mask-compliance monitoring over frame streams.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    cal = sub.add_parser("calibrate", help="solve focal length from a reference image")
    cal.add_argument("--face-width-m", type=float, required=True)
    cal.add_argument("--distance-m", type=float, required=True)
    cal.add_argument("--width-px", type=float, required=True)
    cal.add_argument("--cx", type=float, default=0.0, help="principal point x (default 0)")
    cal.add_argument("--cy", type=float, default=0.0, help="principal point y (default 0)")
    cal.add_argument("--out", required=True, help="output calibration JSON path")

    def add_run_flags(p):
        p.add_argument("--config", help="TOML config file (or $PROXIMITY_SENTINEL_CONFIG)")
        p.add_argument("--frames", dest="frames_dir", help="input frame directory")
        p.add_argument("--detections", dest="detections_path", help="detection JSONL stream")
        p.add_argument("--detector", help="registered detector name (none ship by default)")
        p.add_argument("--calibration", dest="calibration_path", help="calibration JSON")
        p.add_argument("--threshold-m", dest="threshold_m", type=float)
        p.add_argument("--mode", choices=[m.value for m in DistanceMode])
        p.add_argument(
            "--mask-required",
            dest="mask_required",
            action=argparse.BooleanOptionalAction,
            default=None,
        )
        p.add_argument("--backend", choices=["reference", "onnx"])
        p.add_argument("--model", dest="model_path", help="ONNX model (onnx backend)")
        p.add_argument("--workers", type=int, help="worker threads (0 = logical CPUs)")

    run = sub.add_parser("run", help="process a stream and write annotated frames + reports")
    add_run_flags(run)
    run.add_argument("--out", dest="out_dir", help="output directory")
    run.add_argument(
        "--no-render",
        action="store_true",
        help="skip annotated-frame output (reports are still written)",
    )

    bench = sub.add_parser("bench", help="measure pipeline throughput (no outputs written)")
    add_run_flags(bench)

    sim = sub.add_parser("simulate", help="emit a synthetic stream with ground truth")
    sim.add_argument("--agents", type=int, required=True)
    sim.add_argument("--frames", type=int, required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True)
    sim.add_argument("--width", type=int, default=640)
    sim.add_argument("--height", type=int, default=480)
    sim.add_argument("--focal-px", type=float, default=800.0)
    sim.add_argument("--face-width-m", type=float, default=0.15)
    sim.add_argument("--threshold-m", type=float, default=SIX_FEET_M)
    sim.add_argument("--quantize", action="store_true", help="round boxes to integer pixels")
    sim.add_argument("--jitter-px", type=float, default=0.0, help="Gaussian box jitter sigma")

    ev = sub.add_parser("evaluate", help="score predictions against a ground-truth stream")
    ev.add_argument("--pred", required=True, help="assessments.jsonl from a run")
    ev.add_argument("--truth", required=True, help="detection JSONL with truth labels")
    ev.add_argument(
        "--mask-required", action=argparse.BooleanOptionalAction, default=True
    )
    return parser


def cmd_calibrate(args) -> int:
    for name in ("face_width_m", "distance_m", "width_px"):
        if getattr(args, name) <= 0:
            raise UsageError(f"--{name.replace('_', '-')} must be positive")
    calib = calibrate_focal_length(
        args.face_width_m, args.distance_m, args.width_px, principal_point=(args.cx, args.cy)
    )
    save_calibration(calib, args.out)
    print(f"focal_length_px={calib.focal_length_px!r} written to {args.out}")
    return 0


def _make_backend(config: RunConfig):
    if config.backend == "onnx":
        return OnnxBackend(config.model_path)
    return ReferenceBackend()


def _run_common(args, need_out: bool):
    overrides = {
        k: getattr(args, k, None)
        for k in (
            "frames_dir",
            "detections_path",
            "detector",
            "calibration_path",
            "threshold_m",
            "mode",
            "mask_required",
            "backend",
            "model_path",
            "workers",
        )
    }
    if need_out:
        overrides["out_dir"] = getattr(args, "out_dir", None)
    config = resolve_run_config(overrides, config_path=args.config)
    if need_out and config.out_dir is None:
        raise UsageError("an output directory is required (--out)")
    calib = load_calibration(config.calibration_path)
    policy = ViolationPolicy(
        distance_threshold_m=config.threshold_m,
        mode=config.mode,
        mask_required=config.mask_required,
    )
    backend = _make_backend(config)
    frames = open_frame_source(config.frames_dir)
    records = load_detection_stream(config.detections_path)
    return config, calib, policy, backend, frames, records


def cmd_run(args) -> int:
    config, calib, policy, backend, frames, records = _run_common(args, need_out=True)
    frames_out = None
    style = None
    if not args.no_render:
        frames_out = os.path.join(config.out_dir, "frames")
        os.makedirs(frames_out, exist_ok=True)
        style = AnnotationStyle()
    os.makedirs(config.out_dir, exist_ok=True)

    outcome = run_pipeline(
        frames,
        records,
        calib,
        policy,
        backend,
        style=style,
        out_dir=frames_out,
        workers=config.resolved_workers(),
    )

    try:
        # input-stream timestamps, not wall clock: reports must be
        # byte-identical across runs and worker counts
        fps = fps_from_millis(outcome.frame_timestamps_ms)
    except UndefinedRateError:
        fps = 0.0
    if stream_has_truth(outcome.matched_records):
        matched_frames = {r.frame for r in outcome.matched_records}
        metrics = compliance_metrics(
            [a for a in outcome.assessments if a.frame_index in matched_frames],
            outcome.matched_records,
            mask_required=config.mask_required,
            fps=fps,
        )
    else:
        metrics = Metrics.from_counts(0, 0, 0, 0, fps=fps)

    write_run_report(outcome.assessments, metrics, config.out_dir, n_frames=outcome.frames)
    write_assessments(outcome.assessments, os.path.join(config.out_dir, "assessments.jsonl"))
    for message in outcome.errors:
        print(f"error: {message}", file=sys.stderr)
    print(f"frames={outcome.frames} violations={outcome.total_violation_pairs} fps={fps:.1f}")
    return 1 if outcome.errors else 0


def cmd_bench(args) -> int:
    config, calib, policy, backend, frames, records = _run_common(args, need_out=False)
    outcome = run_pipeline(
        frames,
        records,
        calib,
        policy,
        backend,
        style=None,
        out_dir=None,
        workers=config.resolved_workers(),
    )
    fps = fps_meter(outcome.completion_timestamps_s)  # wall clock
    print(f"frames={outcome.frames} fps={fps:.2f}")
    return 0


def cmd_simulate(args) -> int:
    if args.agents < 0 or args.frames < 0:
        raise UsageError("--agents and --frames must be >= 0")
    if args.width <= 0 or args.height <= 0 or args.focal_px <= 0 or args.face_width_m <= 0:
        raise UsageError("camera dimensions, focal length and face width must be positive")
    if args.threshold_m <= 0:
        raise UsageError("--threshold-m must be positive")
    if args.jitter_px < 0:
        raise UsageError("--jitter-px must be >= 0")

    camera = simulator.SimCamera(
        focal_length_px=args.focal_px, width=args.width, height=args.height
    )
    noise = simulator.NoiseModel(quantize=args.quantize, jitter_sigma_px=args.jitter_px)
    streams = simulator.sample_streams(
        args.agents,
        args.frames,
        args.seed,
        args.threshold_m,
        camera=camera,
        face_width_m=args.face_width_m,
        noise=noise,
    )

    frames_dir = os.path.join(args.out, "frames")
    os.makedirs(frames_dir, exist_ok=True)
    records = []
    truth_pairs = []
    per_frame_counts = []
    with open(os.path.join(args.out, "scenes.jsonl"), "w", encoding="utf-8") as scenes_fh:
        for scene, frame, record in streams:
            write_ppm(os.path.join(frames_dir, f"frame_{frame.index:06d}.ppm"), frame.pixels)
            records.append(record)
            scenes_fh.write(json.dumps(scene.to_json_dict(), sort_keys=True))
            scenes_fh.write("\n")
            dists = simulator.ground_truth_distances(scene)
            pairs = simulator.ground_truth_violation_pairs(scene, args.threshold_m)
            per_frame_counts.append(len(pairs))
            for i, j in pairs:
                truth_pairs.append(
                    {"frame": frame.index, "pair": [i, j], "distance_m": float(dists[i, j])}
                )

    dump_detection_stream(records, os.path.join(args.out, "detections.jsonl"))
    calib = CameraCalibration(
        focal_length_px=args.focal_px,
        known_face_width_m=args.face_width_m,
        reference_distance_m=1.0,
        principal_point=camera.principal_point,
    )
    save_calibration(calib, os.path.join(args.out, "calibration.json"))
    with open(os.path.join(args.out, "truth_pairs.jsonl"), "w", encoding="utf-8") as fh:
        for event in truth_pairs:
            fh.write(json.dumps(event, sort_keys=True))
            fh.write("\n")
    report = {
        "agents": args.agents,
        "frames": args.frames,
        "seed": args.seed,
        "threshold_m": args.threshold_m,
        "violations": len(truth_pairs),
        "violations_per_frame": per_frame_counts,
    }
    with open(os.path.join(args.out, "truth_report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"frames={args.frames} agents={args.agents} violations={len(truth_pairs)}")
    return 0


def cmd_evaluate(args) -> int:
    predictions = load_assessments(args.pred)
    truth = list(load_detection_stream(args.truth))
    metrics = compliance_metrics(predictions, truth, mask_required=args.mask_required)
    print(
        f"precision={metrics.precision:.4f} recall={metrics.recall:.4f} f1={metrics.f1:.4f}"
        + (" (degenerate denominators)" if metrics.degenerate_denominators else "")
    )
    return 0


_COMMANDS = {
    "calibrate": cmd_calibrate,
    "run": cmd_run,
    "bench": cmd_bench,
    "simulate": cmd_simulate,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SentinelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
