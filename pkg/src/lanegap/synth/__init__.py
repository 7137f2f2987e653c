"""Parametric lane-scene rendering and the lockstep lane-keeping simulator."""

from .control import DetectorParams, detect_lane_center, pure_pursuit, step_vehicle
from .episode import SimLog, run_episode, track_centerline, write_manifest
from .render import apply_style, render_frame, render_segmentation
from .scene import (
    CRISP,
    SOFT,
    STYLE_PRESETS,
    Arc,
    CameraSpec,
    ControllerParams,
    SceneSpec,
    Straight,
    StylePreset,
    TrackGeometry,
    TrackSpec,
    VehicleState,
)

__all__ = [
    "Arc",
    "CRISP",
    "CameraSpec",
    "ControllerParams",
    "DetectorParams",
    "SOFT",
    "STYLE_PRESETS",
    "SceneSpec",
    "SimLog",
    "Straight",
    "StylePreset",
    "TrackGeometry",
    "TrackSpec",
    "VehicleState",
    "apply_style",
    "detect_lane_center",
    "pure_pursuit",
    "render_frame",
    "render_segmentation",
    "run_episode",
    "step_vehicle",
    "track_centerline",
    "write_manifest",
]
