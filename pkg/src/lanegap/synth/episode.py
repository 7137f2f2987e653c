"""Lockstep closed-loop lane-keeping episodes.

One iteration = render -> style -> detect -> steer -> step. The world never
advances without a control command; when detection fails the previous steer
is held (config-exposed policy). Identical specs and seed produce a
bit-identical log.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..core import ValidationError, save_image
from ..trajectory import Centerline, Trajectory
from .control import DetectorParams, detect_lane_center, pure_pursuit, step_vehicle
from .render import _geometry, apply_style, render_frame
from .scene import CameraSpec, ControllerParams, SceneSpec, StylePreset, TrackSpec, VehicleState

DEFAULT_SPEED_MPS = 30.0 / 3.6  # data-collection speed, 30 km/h
SIM_UTM_ZONE = 52  # label for exported planar coordinates

# Seed spacing between consecutive frame noise streams within one episode.
_FRAME_SEED_STRIDE = 1_000_003

HOLD_POLICIES = ("hold", "zero")


@dataclass(frozen=True)
class SimLog:
    """Closed-loop episode record: trajectory, offsets, commands, termination."""

    t: np.ndarray  # (n,) seconds
    xy: np.ndarray  # (n, 2) planar meters
    s: np.ndarray  # (n,) matched arclength
    offset: np.ndarray  # (n,) signed lateral offset, left positive
    steer: np.ndarray  # (n,) commanded steer per frame
    detected: np.ndarray  # (n,) bool, detection success per frame
    termination: str
    n_frames: int
    n_commands: int
    n_steps: int
    seed: int
    init_lateral_offset: float
    style: str

    def offsets_series(self) -> list[tuple[float, float, float]]:
        return [(float(a), float(b), float(c)) for a, b, c in zip(self.t, self.s, self.offset)]

    def trajectory(self, label: str | None = None) -> Trajectory:
        return Trajectory(
            t=self.t,
            xy=self.xy,
            zone=SIM_UTM_ZONE,
            hemisphere="N",
            label=label if label is not None else f"{self.style}-seed{self.seed}",
        )


def track_centerline(track: TrackSpec, step: float = 1.0) -> Centerline:
    """The track's ego-lane center as a trajectory-module centerline."""
    return Centerline(
        xy=_geometry(track).centerline_polyline(step), zone=SIM_UTM_ZONE, hemisphere="N"
    )


def run_episode(
    track: TrackSpec,
    scene: SceneSpec,
    style: StylePreset,
    controller: ControllerParams = ControllerParams(),
    init_lateral_offset: float = 0.0,
    duration: float = 60.0,
    seed: int = 0,
    cam: CameraSpec = CameraSpec(),
    detector: DetectorParams = DetectorParams(),
    speed: float = DEFAULT_SPEED_MPS,
    hold_policy: str = "hold",
    frames_dir: str | Path | None = None,
) -> SimLog:
    """Run a lane-keeping episode until duration, lap completion, track end or off-road."""
    if duration <= 0:
        raise ValidationError("duration must be positive")
    if hold_policy not in HOLD_POLICIES:
        raise ValidationError(f"hold_policy must be one of {HOLD_POLICIES}")
    geo = _geometry(track)
    x0, y0, heading0 = geo.pose(0.0)
    state = VehicleState(
        x=x0 - init_lateral_offset * math.sin(heading0),
        y=y0 + init_lateral_offset * math.cos(heading0),
        heading=heading0,
        speed=speed,
    )

    if frames_dir is not None:
        frames_dir = Path(frames_dir)
        frames_dir.mkdir(parents=True, exist_ok=True)

    max_steps = int(round(duration / controller.dt))
    ts, xs, ys, ss, offs, steers, det_flags = [], [], [], [], [], [], []
    termination = "duration"
    steer = 0.0
    progress = 0.0
    prev_s = 0.0
    n_frames = n_commands = n_steps = 0

    for k in range(max_steps):
        s_arr, lat_arr = geo.project(np.array([[state.x, state.y]]))
        s_now, lat_now = float(s_arr[0]), float(lat_arr[0])

        if abs(lat_now) > scene.road_width:
            termination = "off_road"
            break
        if track.closed:
            ds = s_now - prev_s
            if ds < -geo.length / 2.0:
                ds += geo.length
            elif ds > geo.length / 2.0:
                ds -= geo.length
            progress += ds
            prev_s = s_now
            if progress >= geo.length:
                termination = "lap_complete"
                break
        elif s_now >= geo.length - 1.0:
            termination = "track_end"
            break

        frame = render_frame(scene, cam, state, track)
        styled = apply_style(frame, style, seed=seed * _FRAME_SEED_STRIDE + k)
        if frames_dir is not None:
            save_image(styled, frames_dir / f"{k:06d}.png")
        n_frames += 1

        detection = detect_lane_center(styled, cam, detector)
        if detection is None:
            if hold_policy == "zero":
                steer = 0.0
            # else hold the previous steer
        else:
            steer = pure_pursuit(detection[0], detection[1], state, controller)
        n_commands += 1

        ts.append(k * controller.dt)
        xs.append(state.x)
        ys.append(state.y)
        ss.append(s_now)
        offs.append(lat_now)
        steers.append(steer)
        det_flags.append(detection is not None)

        state = step_vehicle(state, steer, controller.dt, controller.wheelbase)
        n_steps += 1

    if not ts:
        raise ValidationError(f"episode terminated before the first step ({termination})")
    return SimLog(
        t=np.array(ts),
        xy=np.column_stack([xs, ys]),
        s=np.array(ss),
        offset=np.array(offs),
        steer=np.array(steers),
        detected=np.array(det_flags, dtype=bool),
        termination=termination,
        n_frames=n_frames,
        n_commands=n_commands,
        n_steps=n_steps,
        seed=seed,
        init_lateral_offset=init_lateral_offset,
        style=style.name,
    )


def write_manifest(
    log: SimLog,
    path: str | Path,
    track: TrackSpec,
    scene: SceneSpec,
    style: StylePreset,
    controller: ControllerParams,
    cam: CameraSpec,
) -> None:
    """Run manifest: resolved specs, seed and termination, as stable JSON."""
    manifest = {
        "scene": asdict(scene),
        "camera": asdict(cam),
        "style": asdict(style),
        "controller": asdict(controller),
        "track": {
            "closed": track.closed,
            "segments": [asdict(seg) | {"kind": type(seg).__name__.lower()} for seg in track.segments],
        },
        "seed": log.seed,
        "init_lateral_offset": log.init_lateral_offset,
        "termination": log.termination,
        "n_frames": log.n_frames,
        "n_commands": log.n_commands,
        "n_steps": log.n_steps,
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
