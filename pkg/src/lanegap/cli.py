"""Command-line interface: one subcommand per evaluation, machine-readable reports.

Every subcommand accepts its keys either as flags or through --config (a
JSON object; unknown keys are rejected, flags win over config). Reports are
single JSON objects on stdout with deterministic key order, floats at 6
significant digits, and the fully resolved configuration for provenance.
Exit codes: 0 success, 1 validation error, 2 computation error, 64 usage.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    ComputationError,
    ImageSet,
    RegionOfInterest,
    ValidationError,
    load_image_set,
    resolve_threads,
)
from .fid import FeatureMatrix, fid_between_sets, fid_matrix, read_feature_file
from .fsim import FsimParams, LambdaCandidate, default_fsim_roi, fsim_score, mean_fsim, select_lambda
from .lane_eval import (
    DEFAULT_H_SAMPLES,
    DEFAULT_THRESHOLD_PX,
    SegmentationRaster,
    extract_ground_truth,
    read_lane_frames,
    tusimple_accuracy,
    write_lane_frames,
)
from .core import crop
from .trajectory import (
    RestoreSpec,
    SectionSpec,
    read_centerline_csv,
    read_trajectory_csv,
    restoring_verdict,
    section_rmse,
    success_rate,
    write_trajectory_csv,
)
from .synth import (
    STYLE_PRESETS,
    Arc,
    CameraSpec,
    ControllerParams,
    DetectorParams,
    SceneSpec,
    Straight,
    StylePreset,
    TrackSpec,
    VehicleState,
    render_frame,
    run_episode,
    track_centerline,
    write_manifest,
)
from .synth.render import _geometry
from .core import save_image

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_COMPUTATION = 2
EXIT_USAGE = 64


def _sig6(value):
    """Round floats to 6 significant digits, recursively, for stable reports."""
    if isinstance(value, float):
        if not math.isfinite(value):
            return str(value)
        return float(f"{value:.6g}")
    if isinstance(value, dict):
        return {k: _sig6(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sig6(v) for v in value]
    return value


def emit_report(report: dict, out: str | None = None, csv_rows: list[list] | None = None, csv_out: str | None = None) -> None:
    """Print the report as stable JSON; optionally write it (and a CSV) to files."""
    if not report:
        raise ValidationError("empty report")
    payload = {"tool": "lanegap", "version": __version__}
    payload.update(_sig6(report))
    text = json.dumps(payload, indent=2)
    print(text)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    if csv_out:
        if csv_rows is None:
            raise ValidationError("--csv requested but this subcommand has no tabular form")
        lines = [",".join(str(_sig6(c)) for c in row) for row in csv_rows]
        Path(csv_out).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_config(path: str | None, known: dict, parser_defaults: dict) -> dict:
    """Merge config-file keys under the CLI defaults, rejecting unknown keys."""
    if path is None:
        return dict(parser_defaults)
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"cannot read config {path}: {e}")
    if not isinstance(cfg, dict):
        raise ValidationError(f"config {path} must hold a JSON object")
    unknown = sorted(set(cfg) - set(known))
    if unknown:
        raise ValidationError(
            f"unknown config keys: {', '.join(unknown)}; known keys: {', '.join(sorted(known))}"
        )
    merged = dict(parser_defaults)
    merged.update(cfg)
    return merged


_META_KEYS = ("func", "config", "out", "csv", "threads", "subcommand")


def _resolve(args: argparse.Namespace, parser: argparse.ArgumentParser) -> dict:
    """Final key values: defaults < config file < explicit flags."""
    defaults = {k: parser.get_default(k) for k in vars(args) if k not in _META_KEYS}
    merged = _load_config(getattr(args, "config", None), defaults, defaults)
    for key in defaults:
        value = getattr(args, key)
        if value != parser.get_default(key):
            merged[key] = value
    return merged


def _image_or_features(path: str, d: int, seed: int, threads: int | None) -> ImageSet | FeatureMatrix:
    p = Path(path)
    if p.is_file() and p.suffix == ".s2rf":
        return read_feature_file(p)
    if p.is_dir():
        return load_image_set(p)
    raise ValidationError(f"{path} is neither an image directory nor a .s2rf feature file")


def _parse_roi(text: str | None) -> RegionOfInterest | None:
    if text is None or text == "":
        return None
    parts = text.split(",")
    if len(parts) != 4:
        raise ValidationError(f"ROI must be 'x0,y0,width,height', got {text!r}")
    x0, y0, w, h = (int(p) for p in parts)
    return RegionOfInterest(x0=x0, y0=y0, width=w, height=h)


def _scene_from(cfg: dict) -> SceneSpec:
    return SceneSpec(
        road_width=cfg["road_width"],
        line_length=cfg["line_length"],
        line_spacing=cfg["line_spacing"],
        line_width=cfg["line_width"],
        texture_sharpness=cfg["texture_sharpness"],
        connected_lines=cfg["connected_lines"],
    )


def _camera_from(cfg: dict) -> CameraSpec:
    return CameraSpec(width=cfg["cam_width"], height=cfg["cam_height"])


def _track_from(text: str) -> TrackSpec:
    """Track syntax: comma-separated 'straight:LEN' / 'arc:RADIUS:ANGLE'; '@closed' suffix."""
    closed = text.endswith("@closed")
    if closed:
        text = text[: -len("@closed")]
    segments = []
    for part in text.split(","):
        fields = part.strip().split(":")
        if fields[0] == "straight" and len(fields) == 2:
            segments.append(Straight(float(fields[1])))
        elif fields[0] == "arc" and len(fields) == 3:
            segments.append(Arc(float(fields[1]), float(fields[2])))
        else:
            raise ValidationError(f"bad track segment {part!r}")
    return TrackSpec(segments=tuple(segments), closed=closed)


def _style_from(name: str) -> StylePreset:
    if name in STYLE_PRESETS:
        return STYLE_PRESETS[name]
    parts = name.split(":")
    if len(parts) == 4:
        return StylePreset(parts[0], float(parts[1]), float(parts[2]), float(parts[3]))
    raise ValidationError(
        f"unknown style {name!r}; use one of {sorted(STYLE_PRESETS)} or 'name:blur:contrast:noise'"
    )


# ---------------------------------------------------------------- subcommands


def _cmd_fid(args, parser) -> dict:
    cfg = _resolve(args, parser)
    threads = resolve_threads(args.threads)
    a = _image_or_features(cfg["a"], cfg["d"], cfg["seed"], threads)
    b = _image_or_features(cfg["b"], cfg["d"], cfg["seed"], threads)
    report = fid_between_sets(a, b, d=cfg["d"], seed=cfg["seed"], threads=threads)
    return {
        "command": "fid",
        "config": cfg,
        "labels": list(report.labels),
        "value": report.value,
        "d": report.d,
        "n_a": report.n_a,
        "n_b": report.n_b,
        "regularized": report.regularized,
    }, None


def _cmd_fid_matrix(args, parser) -> dict:
    cfg = _resolve(args, parser)
    threads = resolve_threads(args.threads)
    sets = [_image_or_features(p, cfg["d"], cfg["seed"], threads) for p in cfg["sets"]]
    result = fid_matrix(sets, d=cfg["d"], seed=cfg["seed"], threads=threads)
    labels = list(result.labels)
    cells = {}
    for i in range(len(labels)):
        for j in range(i + 1, len(labels)):
            cells[f"{labels[i]}|{labels[j]}"] = float(result.values[i, j])
    rows = [[""] + labels]
    for i, lab in enumerate(labels):
        rows.append([lab] + [float(result.values[i, j]) if j >= i else "" for j in range(len(labels))])
    return {
        "command": "fid-matrix",
        "config": cfg,
        "labels": labels,
        "pairs": cells,
        "regularized": result.regularized,
    }, rows


def _cmd_fsim(args, parser) -> dict:
    cfg = _resolve(args, parser)
    threads = resolve_threads(args.threads)
    ref = load_image_set(cfg["ref"])
    gen = load_image_set(cfg["gen"])
    if len(ref) != len(gen):
        raise ValidationError(f"paired sets differ in length: {len(ref)} vs {len(gen)}")
    if cfg["roi"] == "auto":
        roi = default_fsim_roi(ref.images[0].width, ref.images[0].height)
    else:
        roi = _parse_roi(cfg["roi"])
    params = FsimParams()

    def score(pair):
        ra, gb = pair
        if roi is not None:
            ra, gb = crop(ra, roi), crop(gb, roi)
        return fsim_score(ra, gb, params)

    from concurrent.futures import ThreadPoolExecutor

    pairs = list(zip(ref.images, gen.images))
    workers = min(threads, len(pairs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_pair = list(pool.map(score, pairs))
    else:
        per_pair = [score(pair) for pair in pairs]
    mean = float(sum(per_pair) / len(per_pair))
    rows = [["index", "fsim"]] + [[i, s] for i, s in enumerate(per_pair)]
    roi_desc = [roi.x0, roi.y0, roi.width, roi.height] if roi else None
    return {
        "command": "fsim",
        "config": cfg,
        "roi": roi_desc,
        "pairs": len(per_pair),
        "mean_fsim": mean,
        "per_pair": per_pair,
    }, rows


def _cmd_select_lambda(args, parser) -> dict:
    cfg = _resolve(args, parser)
    threads = resolve_threads(args.threads)
    candidates = []
    if cfg["scores"]:
        scores = json.loads(Path(cfg["scores"]).read_text(encoding="utf-8"))
        if not isinstance(scores, dict):
            raise ValidationError("scores file must map lambda_id -> mean_fsim")
        for lam, val in scores.items():
            candidates.append(LambdaCandidate(lambda_id=str(lam), mean_fsim=float(val)))
    else:
        if not cfg["candidates"]:
            raise ValidationError("provide --scores or --candidates")
        for spec in cfg["candidates"]:
            try:
                lam, ref_dir, gen_dir = spec.split(":")
            except ValueError:
                raise ValidationError(f"candidate must be 'id:ref_dir:gen_dir', got {spec!r}")
            ref = load_image_set(ref_dir)
            gen = load_image_set(gen_dir)
            roi = default_fsim_roi(ref.images[0].width, ref.images[0].height) if cfg["roi"] == "auto" else _parse_roi(cfg["roi"])
            candidates.append(
                LambdaCandidate(
                    lambda_id=lam,
                    mean_fsim=mean_fsim(ref, gen, roi=roi, threads=threads),
                )
            )
    chosen = select_lambda(candidates)
    return {
        "command": "select-lambda",
        "config": cfg,
        "scores": {c.lambda_id: c.mean_fsim for c in candidates},
        "selected": chosen,
    }, None


def _cmd_extract_gt(args, parser) -> dict:
    cfg = _resolve(args, parser)
    directory = Path(cfg["masks"])
    image_set = load_image_set(directory, cfg["glob"])
    color = tuple(int(c) for c in cfg["lane_color"].split(","))
    h_samples = tuple(int(h) for h in cfg["h_samples"].split(",")) if cfg["h_samples"] else DEFAULT_H_SAMPLES
    frames = []
    for img, path in zip(image_set.images, image_set.paths):
        raster = SegmentationRaster(image=img, lane_color=color)
        frames.append(
            extract_ground_truth(
                raster, h_samples=h_samples, frame_id=Path(path).name,
                three_run_rule=cfg["three_run_rule"],
            )
        )
    write_lane_frames(frames, cfg["out_frames"])
    return {
        "command": "extract-gt",
        "config": cfg,
        "frames": len(frames),
        "out_frames": cfg["out_frames"],
    }, None


def _cmd_lane_accuracy(args, parser) -> dict:
    cfg = _resolve(args, parser)
    preds = read_lane_frames(cfg["pred"])
    gts = read_lane_frames(cfg["gt"])
    report = tusimple_accuracy(preds, gts, threshold=cfg["threshold"])
    return {
        "command": "lane-accuracy",
        "config": cfg,
        "accuracy": report.accuracy,
        "matched": report.matched,
        "total_gt": report.total_gt,
        "threshold": report.threshold,
    }, None


def _cmd_traj_rmse(args, parser) -> dict:
    cfg = _resolve(args, parser)
    traj = read_trajectory_csv(cfg["trajectory"], zone=cfg["zone"])
    center = read_centerline_csv(cfg["centerline"], zone=cfg["zone"])
    sections = []
    if cfg["sections"]:
        spec = json.loads(Path(cfg["sections"]).read_text(encoding="utf-8"))
        for item in spec:
            sections.append(SectionSpec(name=item["name"], start_s=item["start_s"], end_s=item["end_s"]))
    else:
        sections.append(SectionSpec(name="full", start_s=0.0, end_s=center.length))
    out_sections = {}
    rows = [["section", "rmse_x", "rmse_y", "n"]]
    for sec in sections:
        rx, ry, n = section_rmse(traj, center, sec)
        out_sections[sec.name] = {"rmse_x": rx, "rmse_y": ry, "n": n}
        rows.append([sec.name, rx, ry, n])
    return {
        "command": "traj-rmse",
        "config": cfg,
        "label": traj.label,
        "sections": out_sections,
    }, rows


def _cmd_restore_eval(args, parser) -> dict:
    cfg = _resolve(args, parser)
    spec = RestoreSpec(
        return_band=cfg["return_band"],
        t_max=cfg["t_max"],
        stable_window=cfg["stable_window"],
        stable_band=cfg["stable_band"],
    )
    center = read_centerline_csv(cfg["centerline"], zone=cfg["zone"])
    from .trajectory import lateral_offsets

    verdicts = {}
    outcomes = []
    for path in cfg["trajectories"]:
        traj = read_trajectory_csv(path, zone=cfg["zone"])
        verdict = restoring_verdict(lateral_offsets(traj, center), spec)
        verdicts[traj.label] = {
            "success": verdict.success,
            "return_time": verdict.return_time,
            "reason": verdict.reason,
        }
        outcomes.append(verdict.success)
    rows = [["label", "success", "return_time", "reason"]] + [
        [k, v["success"], v["return_time"], v["reason"]] for k, v in verdicts.items()
    ]
    return {
        "command": "restore-eval",
        "config": cfg,
        "verdicts": verdicts,
        "success_rate": success_rate(outcomes),
    }, rows


def _cmd_synth(args, parser) -> dict:
    cfg = _resolve(args, parser)
    scene = _scene_from(cfg)
    cam = _camera_from(cfg)
    track = _track_from(cfg["track"])
    geo = _geometry(track)
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    n = cfg["frames"]
    if n < 1:
        raise ValidationError("frames must be >= 1")
    s_values = np.linspace(0.0, max(geo.length - cfg["end_margin"], 0.0), n)
    for i, s in enumerate(s_values):
        x, y, heading = geo.pose(float(s))
        state = VehicleState(x=x, y=y, heading=heading, speed=0.0)
        frame = render_frame(scene, cam, state, track, channels=cfg["channels"])
        save_image(frame, out_dir / f"{i:06d}.png")
    return {
        "command": "synth",
        "config": cfg,
        "frames": n,
        "out_dir": str(out_dir),
        "track_length": geo.length,
    }, None


def _cmd_simulate(args, parser) -> dict:
    cfg = _resolve(args, parser)
    scene = _scene_from(cfg)
    cam = _camera_from(cfg)
    track = _track_from(cfg["track"])
    style = _style_from(cfg["style"])
    controller = ControllerParams()
    detector = DetectorParams(lum_threshold=cfg["lum_threshold"])
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    episodes = {}
    for i in range(cfg["episodes"]):
        seed = cfg["seed"] + i
        log = run_episode(
            track,
            scene,
            style,
            controller=controller,
            init_lateral_offset=cfg["init_offset"],
            duration=cfg["duration"],
            seed=seed,
            cam=cam,
            detector=detector,
        )
        name = f"ep{i:03d}"
        ep_dir = out_dir / name
        ep_dir.mkdir(exist_ok=True)
        write_trajectory_csv(log.trajectory(label=name), ep_dir / "trajectory.csv")
        with (ep_dir / "offsets.csv").open("w", encoding="utf-8", newline="\n") as fh:
            fh.write("t,s,offset\n")
            for t, s, off in log.offsets_series():
                fh.write(f"{t!r},{s!r},{off!r}\n")
        write_manifest(log, ep_dir / "manifest.json", track, scene, style, controller, cam)
        episodes[name] = {
            "seed": seed,
            "termination": log.termination,
            "steps": log.n_steps,
            "max_abs_offset": float(np.abs(log.offset).max()),
            "final_offset": float(log.offset[-1]),
            "detect_failures": int((~log.detected).sum()),
        }
    from .trajectory import write_centerline_csv

    write_centerline_csv(track_centerline(track), out_dir / "centerline.csv")
    rows = [["episode", "seed", "termination", "steps", "max_abs_offset", "final_offset"]]
    for name, ep in episodes.items():
        rows.append([name, ep["seed"], ep["termination"], ep["steps"], ep["max_abs_offset"], ep["final_offset"]])
    return {
        "command": "simulate",
        "config": cfg,
        "episodes": episodes,
        "out_dir": str(out_dir),
    }, rows


def _cmd_report(args, parser) -> dict:
    cfg = _resolve(args, parser)
    merged = {}
    rows = [["label", "section", "rmse_x", "rmse_y", "success_rate"]]
    for path in cfg["inputs"]:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        label = obj.get("label") or obj.get("command") or Path(path).stem
        merged[Path(path).stem] = obj
        sections = obj.get("sections", {})
        rate = obj.get("success_rate", "")
        if sections:
            for name, sec in sections.items():
                rows.append([label, name, sec.get("rmse_x", ""), sec.get("rmse_y", ""), rate])
        elif rate != "":
            rows.append([label, "", "", "", rate])
    if not merged:
        raise ValidationError("no input reports")
    return {"command": "report", "config": cfg, "reports": merged}, rows


# --------------------------------------------------------------------- wiring


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lanegap",
        description="Sim-to-real gap metrics for lane keeping: image-set distance, "
        "paired similarity, lane accuracy, trajectory fidelity and a synthetic simulator.",
    )
    parser.add_argument("--version", action="version", version=f"lanegap {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")

    def common(p):
        p.add_argument("--config", help="JSON config file; keys mirror the flags (default: none)")
        p.add_argument("--out", help="also write the JSON report to this path (default: none)")
        p.add_argument("--csv", help="write the tabular variant to this CSV path (default: none)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads; env SIM2REAL_THREADS, else machine parallelism (default: auto)")

    p = sub.add_parser("fid", help="FID between two image directories or .s2rf feature files")
    p.add_argument("--a", required=True, help="first image directory or .s2rf file (default: required)")
    p.add_argument("--b", required=True, help="second image directory or .s2rf file (default: required)")
    p.add_argument("--d", type=int, default=64, help="feature dimensionality (default: 64)")
    p.add_argument("--seed", type=int, default=0, help="extractor projection seed (default: 0)")
    common(p)
    p.set_defaults(func=_cmd_fid)

    p = sub.add_parser("fid-matrix", help="pairwise FID table over several sets")
    p.add_argument("--sets", nargs="+", required=True, help="image directories/.s2rf files (default: required)")
    p.add_argument("--d", type=int, default=64, help="feature dimensionality (default: 64)")
    p.add_argument("--seed", type=int, default=0, help="extractor projection seed (default: 0)")
    common(p)
    p.set_defaults(func=_cmd_fid_matrix)

    p = sub.add_parser("fsim", help="mean FSIM over filename-paired image directories")
    p.add_argument("--ref", required=True, help="reference image directory (default: required)")
    p.add_argument("--gen", required=True, help="generated image directory (default: required)")
    p.add_argument("--roi", default="auto",
                   help="ROI 'x0,y0,w,h', 'auto' for the bottom band, '' for full frames (default: auto)")
    common(p)
    p.set_defaults(func=_cmd_fsim)

    p = sub.add_parser("select-lambda", help="argmax of mean FSIM across candidates")
    p.add_argument("--scores", default=None,
                   help="JSON file mapping lambda_id -> mean_fsim (default: none)")
    p.add_argument("--candidates", nargs="*", default=[],
                   help="candidates as 'id:ref_dir:gen_dir' (default: none)")
    p.add_argument("--roi", default="auto", help="ROI for candidate scoring (default: auto)")
    common(p)
    p.set_defaults(func=_cmd_select_lambda)

    p = sub.add_parser("extract-gt", help="lane ground truth from segmentation masks")
    p.add_argument("--masks", required=True, help="directory of segmentation images (default: required)")
    p.add_argument("--glob", default="*.png", help="mask filename pattern (default: *.png)")
    p.add_argument("--lane-color", dest="lane_color", default="0,255,0",
                   help="lane RGB as 'r,g,b' (default: 0,255,0)")
    p.add_argument("--h-samples", dest="h_samples", default="",
                   help="comma-separated rows; empty uses 250..610 step 10 (default: '')")
    p.add_argument("--three-run-rule", dest="three_run_rule", default="pseudocode",
                   choices=("pseudocode", "prose"),
                   help="3-run line assignment rule (default: pseudocode)")
    p.add_argument("--out-frames", dest="out_frames", required=True,
                   help="output lane-frame JSONL path (default: required)")
    common(p)
    p.set_defaults(func=_cmd_extract_gt)

    p = sub.add_parser("lane-accuracy", help="point-match accuracy between lane-frame files")
    p.add_argument("--pred", required=True, help="predicted lane frames JSONL (default: required)")
    p.add_argument("--gt", required=True, help="ground-truth lane frames JSONL (default: required)")
    p.add_argument("--threshold", type=int, default=DEFAULT_THRESHOLD_PX,
                   help="pixel matching threshold (default: 20)")
    common(p)
    p.set_defaults(func=_cmd_lane_accuracy)

    p = sub.add_parser("traj-rmse", help="per-section easting/northing RMSE vs a centerline")
    p.add_argument("--trajectory", required=True, help="trajectory CSV (default: required)")
    p.add_argument("--centerline", required=True, help="centerline CSV (default: required)")
    p.add_argument("--sections", default=None,
                   help="JSON file: [{name,start_s,end_s},...]; default is one full-length section (default: none)")
    p.add_argument("--zone", type=int, default=52, help="UTM zone for planar files (default: 52)")
    common(p)
    p.set_defaults(func=_cmd_traj_rmse)

    p = sub.add_parser("restore-eval", help="lane-restoring verdicts for trajectories")
    p.add_argument("--trajectories", nargs="+", required=True,
                   help="trajectory CSVs to judge (default: required)")
    p.add_argument("--centerline", required=True, help="centerline CSV (default: required)")
    p.add_argument("--zone", type=int, default=52, help="UTM zone for planar files (default: 52)")
    p.add_argument("--return-band", dest="return_band", type=float, default=0.2,
                   help="|offset| to count as returned, meters (default: 0.2)")
    p.add_argument("--t-max", dest="t_max", type=float, default=120.0,
                   help="deadline for the return, seconds (default: 120)")
    p.add_argument("--stable-window", dest="stable_window", type=float, default=10.0,
                   help="post-return window that must stay in band, seconds (default: 10)")
    p.add_argument("--stable-band", dest="stable_band", type=float, default=0.3,
                   help="|offset| bound during the stable window, meters (default: 0.3)")
    common(p)
    p.set_defaults(func=_cmd_restore_eval)

    p = sub.add_parser("synth", help="render a dataset of frames along a track")
    p.add_argument("--track", default="straight:200", help="segments, e.g. 'straight:30,arc:150:45' (default: straight:200)")
    p.add_argument("--frames", type=int, default=100, help="number of frames (default: 100)")
    p.add_argument("--out-dir", dest="out_dir", required=True, help="output directory (default: required)")
    p.add_argument("--road-width", dest="road_width", type=float, default=3.5, help="lane width, m (default: 3.5)")
    p.add_argument("--line-length", dest="line_length", type=float, default=4.5, help="dash length, m (default: 4.5)")
    p.add_argument("--line-spacing", dest="line_spacing", type=float, default=4.0, help="dash gap, m (default: 4)")
    p.add_argument("--line-width", dest="line_width", type=float, default=0.125, help="line width, m (default: 0.125)")
    p.add_argument("--texture-sharpness", dest="texture_sharpness", type=float, default=1.0,
                   help="lane luminance scale 0..1 (default: 1.0)")
    p.add_argument("--connected-lines", dest="connected_lines", action="store_true",
                   help="solid lines instead of dashes (default: off)")
    p.add_argument("--cam-width", dest="cam_width", type=int, default=808, help="camera width px (default: 808)")
    p.add_argument("--cam-height", dest="cam_height", type=int, default=620, help="camera height px (default: 620)")
    p.add_argument("--channels", type=int, default=1, choices=(1, 3), help="output channels (default: 1)")
    p.add_argument("--end-margin", dest="end_margin", type=float, default=25.0,
                   help="unrendered tail of the track, m (default: 25)")
    common(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("simulate", help="closed-loop lane-keeping episodes")
    p.add_argument("--track", default="straight:20,arc:150:45,straight:40",
                   help="segments (default: straight:20,arc:150:45,straight:40)")
    p.add_argument("--style", default="crisp",
                   help="style preset name or 'name:blur:contrast:noise' (default: crisp)")
    p.add_argument("--episodes", type=int, default=1, help="episode count, seeds seed+i (default: 1)")
    p.add_argument("--seed", type=int, default=0, help="base seed (default: 0)")
    p.add_argument("--init-offset", dest="init_offset", type=float, default=0.0,
                   help="initial lateral offset, m left positive (default: 0)")
    p.add_argument("--duration", type=float, default=30.0, help="episode duration, s (default: 30)")
    p.add_argument("--out-dir", dest="out_dir", required=True, help="output directory (default: required)")
    p.add_argument("--road-width", dest="road_width", type=float, default=3.5, help="lane width, m (default: 3.5)")
    p.add_argument("--line-length", dest="line_length", type=float, default=4.5, help="dash length, m (default: 4.5)")
    p.add_argument("--line-spacing", dest="line_spacing", type=float, default=4.0, help="dash gap, m (default: 4)")
    p.add_argument("--line-width", dest="line_width", type=float, default=0.125, help="line width, m (default: 0.125)")
    p.add_argument("--texture-sharpness", dest="texture_sharpness", type=float, default=1.0,
                   help="lane luminance scale 0..1 (default: 1.0)")
    p.add_argument("--connected-lines", dest="connected_lines", action="store_true",
                   help="solid lines instead of dashes (default: off)")
    p.add_argument("--cam-width", dest="cam_width", type=int, default=808, help="camera width px (default: 808)")
    p.add_argument("--cam-height", dest="cam_height", type=int, default=620, help="camera height px (default: 620)")
    p.add_argument("--lum-threshold", dest="lum_threshold", type=int, default=150,
                   help="detector luminance threshold (default: 150)")
    common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("report", help="merge JSON reports into one summary")
    p.add_argument("--inputs", nargs="+", required=True, help="report JSON files (default: required)")
    common(p)
    p.set_defaults(func=_cmd_report)

    return parser


def dispatch(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 0 for --help, 2 for usage errors; map usage to 64.
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        sub_parser = _subparser_for(parser, args.subcommand)
        report, csv_rows = args.func(args, sub_parser)
        emit_report(report, out=args.out, csv_rows=csv_rows, csv_out=args.csv)
        return EXIT_OK
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except ComputationError as e:
        print(f"computation error: {e}", file=sys.stderr)
        return EXIT_COMPUTATION


def _subparser_for(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise ValidationError(f"unknown subcommand {name}")


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
