"""Lane-center detection, pure-pursuit steering and the kinematic bicycle step.

The detector is a deliberately simple stand-in for a learned segmentation
stack: luminance thresholding inside a ground-distance window, inverse
perspective through the same flat-ground camera model used for rendering,
nearest-cluster boundary association on each side of the vehicle, and a
straight-line fit through the lane-center midpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import ImageBuffer, ValidationError, to_luminance
from .render import _ground_map
from .scene import CameraSpec, ControllerParams, VehicleState


@dataclass(frozen=True)
class DetectorParams:
    lum_threshold: int = 150
    near_m: float = 4.0
    far_m: float = 20.0
    bands: int = 8
    min_points: int = 3  # ground-plane points per boundary
    cluster_gap_m: float = 1.0

    def __post_init__(self):
        if not 0 < self.lum_threshold < 255:
            raise ValidationError("lum_threshold must be inside (0, 255)")
        if not 0 < self.near_m < self.far_m:
            raise ValidationError("need 0 < near_m < far_m")
        if self.bands < 2 or self.min_points < 1:
            raise ValidationError("need bands >= 2 and min_points >= 1")


def _nearest_cluster(ys: np.ndarray, gap: float) -> tuple[float, int] | None:
    """(mean, size) of the |y|-nearest cluster after splitting sorted values at gaps."""
    if ys.size == 0:
        return None
    ys = np.sort(ys)
    splits = np.flatnonzero(np.diff(ys) > gap)
    starts = np.concatenate([[0], splits + 1])
    stops = np.concatenate([splits + 1, [ys.size]])
    best, best_abs = None, math.inf
    for a, b in zip(starts, stops):
        m = float(ys[a:b].mean())
        if abs(m) < best_abs:
            best, best_abs = (m, int(b - a)), abs(m)
    return best


def detect_lane_center(
    img: ImageBuffer,
    cam: CameraSpec,
    params: DetectorParams = DetectorParams(),
) -> tuple[float, float] | None:
    """Estimate (lateral_error, heading_error) of the ego-lane center.

    lateral_error is the lane center's lateral position in the vehicle frame
    (positive left), i.e. the correction the controller should steer toward.
    Returns None when either lane boundary contributes fewer than
    `min_points` detections.
    """
    if (img.width, img.height) != (cam.width, cam.height):
        raise ValidationError(
            f"image {img.width}x{img.height} does not match camera {cam.width}x{cam.height}"
        )
    lum = to_luminance(img).plane()
    gm = _ground_map(cam)
    bright = lum[gm.v0 :] > params.lum_threshold
    cand = bright & gm.valid & (gm.forward >= params.near_m) & (gm.forward <= params.far_m)
    if not cand.any():
        return None
    fx = gm.forward[cand]
    fy = gm.left[cand]

    edges = np.linspace(params.near_m, params.far_m, params.bands + 1)
    centers_x, centers_y = [], []
    n_left = n_right = 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (fx >= lo) & (fx < hi)
        if not sel.any():
            continue
        ys = fy[sel]
        left = _nearest_cluster(ys[ys > 0.0], params.cluster_gap_m)
        right = _nearest_cluster(ys[ys <= 0.0], params.cluster_gap_m)
        if left is not None:
            n_left += left[1]
        if right is not None:
            n_right += right[1]
        if left is not None and right is not None:
            centers_x.append(float(fx[sel].mean()))
            centers_y.append((left[0] + right[0]) / 2.0)
    if n_left < params.min_points or n_right < params.min_points:
        return None
    if len(centers_x) < 2:
        return None

    slope, intercept = np.polyfit(np.array(centers_x), np.array(centers_y), 1)
    return float(intercept), float(math.atan(slope))


def pure_pursuit(
    lateral_error: float,
    heading_error: float,
    state: VehicleState,
    params: ControllerParams = ControllerParams(),
) -> float:
    """Geometric steering toward a look-ahead point on the detected center line.

    The target sits on the line y = lateral_error + tan(heading_error) * x at
    distance L_d = lookahead_base + lookahead_gain * speed from the axle;
    steer = atan(2 * wheelbase * sin(alpha) / L_d), clamped to +-max_steer.
    """
    l_d = params.lookahead_base + params.lookahead_gain * state.speed
    m = math.tan(heading_error)
    c = lateral_error
    disc = (1.0 + m * m) * l_d * l_d - c * c
    if disc <= 0.0:
        # Center line farther than the look-ahead circle: steer hard toward it.
        alpha = math.copysign(math.pi / 2.0, c)
    else:
        x = (-m * c + math.sqrt(disc)) / (1.0 + m * m)
        y = c + m * x
        alpha = math.atan2(y, x)
    steer = math.atan(2.0 * params.wheelbase * math.sin(alpha) / l_d)
    return float(np.clip(steer, -params.max_steer, params.max_steer))


def step_vehicle(
    state: VehicleState, steer: float, dt: float, wheelbase: float = 2.7
) -> VehicleState:
    """Kinematic bicycle, fixed speed; heading accumulates without wrapping."""
    if dt <= 0:
        raise ValidationError("dt must be positive")
    x = state.x + state.speed * math.cos(state.heading) * dt
    y = state.y + state.speed * math.sin(state.heading) * dt
    heading = state.heading + (state.speed / wheelbase) * math.tan(steer) * dt
    return VehicleState(x=x, y=y, heading=heading, speed=state.speed)
