"""Ground-plane lane-scene rendering and the style degradation stage.

Rendering inverts the camera model once per camera: every sub-horizon pixel
is mapped to its flat-ground hit point in the vehicle frame (forward X,
left Y), cached, and then transformed per frame into track coordinates.
Lane lines are painted from the signed lateral distance field with
single-pixel coverage weighting, so distant sub-pixel lines neither alias
away nor jump between columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage

from ..core import ImageBuffer, ValidationError
from ..lane_eval import SegmentationRaster
from .scene import CameraSpec, SceneSpec, StylePreset, TrackGeometry, TrackSpec, VehicleState

ROAD_LUM = 60.0
LANE_LUM = 250.0
SKY_LUM = 140.0
MAX_RENDER_DIST_M = 400.0
OFFROAD_GUARD_FACTOR = 2.0


@dataclass(frozen=True)
class GroundMap:
    """Per-pixel flat-ground geometry for one camera, vehicle frame."""

    v0: int  # first image row with valid ground
    forward: np.ndarray  # (rows, width) forward distance X, meters
    left: np.ndarray  # (rows, width) lateral Y, meters (left positive)
    px_width: np.ndarray  # (rows, width) lateral ground width of one pixel
    valid: np.ndarray  # (rows, width) ground within render distance


@lru_cache(maxsize=4)
def _ground_map(cam: CameraSpec) -> GroundMap:
    f = cam.focal_px
    cx, cy = (cam.width - 1) / 2.0, (cam.height - 1) / 2.0
    pitch = math.radians(cam.pitch_deg)
    sin_p, cos_p = math.sin(pitch), math.cos(pitch)

    v = np.arange(cam.height, dtype=np.float64)
    y_cam = (v - cy) / f
    denom = y_cam * cos_p - sin_p
    min_denom = cam.mount_height / MAX_RENDER_DIST_M
    rows_valid = denom > 0.0
    if not rows_valid.any():
        raise ValidationError("camera sees no ground (pitch too high)")
    v0 = int(np.argmax(rows_valid))

    u = np.arange(cam.width, dtype=np.float64)
    x_cam = (u - cx) / f
    denom_col = denom[v0:][:, None]
    t = cam.mount_height / denom_col  # depth along camera axis
    y_cam_col = y_cam[v0:][:, None]
    ones_row = np.ones((1, cam.width))
    forward = (t * (y_cam_col * sin_p + cos_p) * ones_row).astype(np.float32)
    left = (-t * x_cam[None, :]).astype(np.float32)
    px_width = ((t / f) * ones_row).astype(np.float32)
    valid = np.broadcast_to(denom_col > min_denom, forward.shape).copy()
    for a in (forward, left, px_width, valid):
        a.setflags(write=False)
    return GroundMap(v0=v0, forward=forward, left=left, px_width=px_width, valid=valid)


@lru_cache(maxsize=16)
def _geometry(track: TrackSpec) -> TrackGeometry:
    return TrackGeometry(track)


def _lane_fields(
    scene: SceneSpec,
    cam: CameraSpec,
    state: VehicleState,
    track: TrackSpec,
    want: str,
) -> tuple[GroundMap, np.ndarray]:
    """Ground map plus the 2-D lane field below the horizon.

    `want="alpha"` returns per-pixel line coverage in [0, 1] (sub-pixel
    lines fade instead of aliasing); `want="hard"` returns the boolean
    segmentation mask, widened to the pixel footprint so every in-view line
    paints at least one pixel per row.
    """
    geo = _geometry(track)
    _, ego_lat = geo.project(np.array([[state.x, state.y]]))
    if abs(float(ego_lat[0])) > OFFROAD_GUARD_FACTOR * scene.road_width:
        raise ValidationError(
            f"vehicle {float(ego_lat[0]):.2f} m off centerline exceeds render guard"
        )

    gm = _ground_map(cam)
    cos_h, sin_h = np.float32(math.cos(state.heading)), np.float32(math.sin(state.heading))
    wx = np.float32(state.x) + gm.forward * cos_h - gm.left * sin_h
    wy = np.float32(state.y) + gm.forward * sin_h + gm.left * cos_h
    s, lat = geo.project_xy(wx, wy)

    w = np.float32(scene.road_width)
    # Boundary lines sit at (k + 0.5) * w for k in {-2..1}; fold to the nearest.
    k = np.clip(np.rint(lat / w - 0.5), -2.0, 1.0)
    delta = np.abs(lat - (k + np.float32(0.5)) * w)

    if scene.connected_lines:
        dash = True
    else:
        period = np.float32(scene.line_length + scene.line_spacing)
        dash = np.mod(s, period) < np.float32(scene.line_length)

    pxw = gm.px_width
    lw = np.float32(scene.line_width)
    if want == "alpha":
        overlap = np.clip(lw / 2 + pxw / 2 - delta, 0.0, None)
        np.minimum(overlap, np.minimum(lw, pxw), out=overlap)
        field = overlap / pxw
        field *= dash
        field *= gm.valid
    else:
        field = delta <= np.maximum(lw, pxw) / 2
        field &= dash
        field &= gm.valid
    return gm, field


def render_frame(
    scene: SceneSpec,
    cam: CameraSpec,
    state: VehicleState,
    track: TrackSpec,
    channels: int = 1,
) -> ImageBuffer:
    """Perspective view of the lane markings around the vehicle.

    Deterministic for identical inputs. Lane luminance is scaled by
    texture_sharpness and the sensor gamma of the camera is applied.
    """
    if channels not in (1, 3):
        raise ValidationError("channels must be 1 or 3")
    gm, alpha = _lane_fields(scene, cam, state, track, want="alpha")

    def g(lum: float) -> float:
        return 255.0 * (lum / 255.0) ** cam.gamma

    img = np.full((cam.height, cam.width), round(g(SKY_LUM)), dtype=np.uint8)
    ground = np.full(alpha.shape, round(g(ROAD_LUM)), dtype=np.uint8)

    painted = alpha > 0.0
    if painted.any():
        lum = ROAD_LUM + alpha[painted] * np.float32(
            scene.texture_sharpness * (LANE_LUM - ROAD_LUM)
        )
        ground[painted] = np.rint(255.0 * (lum / 255.0) ** np.float32(cam.gamma)).astype(np.uint8)
    img[gm.v0 :] = ground

    if channels == 3:
        img = np.repeat(img[:, :, None], 3, axis=2)
    return ImageBuffer.from_array(img)


def render_segmentation(
    scene: SceneSpec,
    cam: CameraSpec,
    state: VehicleState,
    track: TrackSpec,
    lane_color: tuple[int, int, int] = (0, 255, 0),
) -> SegmentationRaster:
    """Same projection as render_frame; lane pixels painted exactly lane_color."""
    gm, hard = _lane_fields(scene, cam, state, track, want="hard")
    img = np.zeros((cam.height, cam.width, 3), dtype=np.uint8)
    img[gm.v0 :][hard] = np.array(lane_color, dtype=np.uint8)
    return SegmentationRaster(image=ImageBuffer.from_array(img), lane_color=tuple(lane_color))


def apply_style(img: ImageBuffer, preset: StylePreset, seed: int = 0) -> ImageBuffer:
    """Blur, contrast compression about mid-gray, then seeded additive noise.

    The identity preset returns the input unchanged (bit-identical); any
    other preset is deterministic for a given seed.
    """
    if preset.is_identity:
        return img
    out = img.data.astype(np.float32)
    if preset.blur_sigma > 0:
        for c in range(img.channels):
            out[:, :, c] = ndimage.gaussian_filter(
                out[:, :, c], sigma=preset.blur_sigma, mode="nearest"
            )
    if preset.contrast != 1.0:
        out = 128.0 + preset.contrast * (out - 128.0)
    if preset.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        out += preset.noise_sigma * rng.standard_normal(out.shape, dtype=np.float32)
    return ImageBuffer.from_array(np.clip(np.rint(out), 0, 255).astype(np.uint8))
