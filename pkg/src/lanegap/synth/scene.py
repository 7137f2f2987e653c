"""Parametric road, camera, style and track specifications plus track geometry.

The track centerline is the center of the ego lane (the middle lane of
three). Lane boundary lines are numbered 1..4 left to right, so the ego
drives between lines 2 and 3. Arclength s runs along the track from its
start; lateral coordinates are positive to the left of travel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import ValidationError


@dataclass(frozen=True)
class SceneSpec:
    road_width: float = 3.5  # one lane, meters
    line_length: float = 4.5
    line_spacing: float = 4.0
    line_width: float = 0.125
    lane_count: int = 3
    texture_sharpness: float = 1.0
    connected_lines: bool = False

    def __post_init__(self):
        if min(self.road_width, self.line_length, self.line_spacing, self.line_width) <= 0:
            raise ValidationError("scene lengths must be positive")
        if not 0.0 <= self.texture_sharpness <= 1.0:
            raise ValidationError("texture_sharpness must be in [0, 1]")
        if self.lane_count != 3:
            raise ValidationError("only 3-lane roads are modeled")

    def line_offsets(self) -> tuple[float, ...]:
        """Lateral offsets of boundary lines 1..4 from the ego-lane center."""
        w = self.road_width
        return (1.5 * w, 0.5 * w, -0.5 * w, -1.5 * w)


@dataclass(frozen=True)
class CameraSpec:
    h_fov_deg: float = 76.0
    width: int = 808
    height: int = 620
    mount_height: float = 1.4
    pitch_deg: float = -4.0  # negative looks down
    gamma: float = 0.8

    def __post_init__(self):
        if not 0.0 < self.h_fov_deg < 180.0:
            raise ValidationError(f"h_fov {self.h_fov_deg} outside (0, 180)")
        if self.width < 8 or self.height < 8:
            raise ValidationError("camera resolution too small")
        if self.mount_height <= 0 or self.gamma <= 0:
            raise ValidationError("mount height and gamma must be positive")

    @property
    def focal_px(self) -> float:
        return (self.width / 2.0) / math.tan(math.radians(self.h_fov_deg) / 2.0)


@dataclass(frozen=True)
class StylePreset:
    """Image degradation stage: blur, contrast compression, sensor noise."""

    name: str
    blur_sigma: float = 0.0
    contrast: float = 1.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.blur_sigma < 0 or self.contrast < 0 or self.noise_sigma < 0:
            raise ValidationError("style parameters must be non-negative")

    @property
    def is_identity(self) -> bool:
        return self.blur_sigma == 0.0 and self.contrast == 1.0 and self.noise_sigma == 0.0


CRISP = StylePreset(name="crisp", blur_sigma=0.0, contrast=1.0, noise_sigma=0.0)
SOFT = StylePreset(name="soft", blur_sigma=1.5, contrast=0.7, noise_sigma=4.0)
STYLE_PRESETS = {p.name: p for p in (CRISP, SOFT)}


@dataclass(frozen=True)
class Straight:
    length: float

    def __post_init__(self):
        if self.length <= 0:
            raise ValidationError("straight length must be positive")


@dataclass(frozen=True)
class Arc:
    """Circular arc; positive angle turns left, negative turns right."""

    radius: float
    angle_deg: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValidationError("arc radius must be positive")
        if self.angle_deg == 0:
            raise ValidationError("arc angle must be nonzero")


Segment = Straight | Arc

CLOSURE_TOL_M = 0.5


@dataclass(frozen=True)
class TrackSpec:
    segments: tuple[Segment, ...]
    closed: bool = False

    def __post_init__(self):
        if not self.segments:
            raise ValidationError("track needs at least one segment")
        object.__setattr__(self, "segments", tuple(self.segments))
        if self.closed:
            geo = TrackGeometry(self)
            end = geo.pose(geo.length)
            gap = math.hypot(end[0], end[1])
            if gap > CLOSURE_TOL_M:
                raise ValidationError(
                    f"closed track endpoint misses start by {gap:.3f} m (> {CLOSURE_TOL_M})"
                )


@dataclass
class _CompiledSegment:
    kind: str  # "straight" | "arc"
    s0: float
    length: float
    start: np.ndarray  # (x, y)
    heading: float
    # arc-only
    center: np.ndarray | None = None
    radius: float = 0.0
    turn: float = 0.0  # +1 left, -1 right


class TrackGeometry:
    """Compiled piecewise straight/arc centerline starting at the origin heading +x."""

    def __init__(self, spec: TrackSpec):
        self.spec = spec
        self.segments: list[_CompiledSegment] = []
        x, y, heading, s = 0.0, 0.0, 0.0, 0.0
        for seg in spec.segments:
            start = np.array([x, y])
            if isinstance(seg, Straight):
                self.segments.append(
                    _CompiledSegment("straight", s, seg.length, start, heading)
                )
                x += seg.length * math.cos(heading)
                y += seg.length * math.sin(heading)
                s += seg.length
            else:
                angle = math.radians(seg.angle_deg)
                turn = 1.0 if angle > 0 else -1.0
                arc_len = seg.radius * abs(angle)
                center = start + seg.radius * np.array(
                    [-math.sin(heading), math.cos(heading)]
                ) * turn
                self.segments.append(
                    _CompiledSegment(
                        "arc", s, arc_len, start, heading,
                        center=center, radius=seg.radius, turn=turn,
                    )
                )
                end_angle = math.atan2(start[1] - center[1], start[0] - center[0]) + angle
                x = center[0] + seg.radius * math.cos(end_angle)
                y = center[1] + seg.radius * math.sin(end_angle)
                heading += angle
                s += arc_len
        self.length = s

    def pose(self, s: float) -> tuple[float, float, float]:
        """(x, y, heading) at arclength s, clamped to the track extent."""
        s = min(max(s, 0.0), self.length)
        seg = self.segments[-1]
        for cand in self.segments:
            if s <= cand.s0 + cand.length:
                seg = cand
                break
        ds = s - seg.s0
        if seg.kind == "straight":
            x = seg.start[0] + ds * math.cos(seg.heading)
            y = seg.start[1] + ds * math.sin(seg.heading)
            return x, y, seg.heading
        swept = seg.turn * ds / seg.radius
        start_angle = math.atan2(seg.start[1] - seg.center[1], seg.start[0] - seg.center[0])
        ang = start_angle + swept
        x = seg.center[0] + seg.radius * math.cos(ang)
        y = seg.center[1] + seg.radius * math.sin(ang)
        return x, y, seg.heading + swept

    def project_xy(
        self, x: np.ndarray, y: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Per-point (arclength s, signed lateral offset), nearest segment wins.

        Works in the dtype of the inputs (float32 in the render hot path).
        Points beyond an open track's ends clamp to the end poses; their
        offset keeps the full point-to-endpoint distance as magnitude.
        """
        dtype = x.dtype
        best_dist = np.full(x.shape, np.inf, dtype=dtype)
        best_s = np.zeros_like(x)
        best_lat = np.zeros_like(x)
        for seg in self.segments:
            if seg.kind == "straight":
                dir_x, dir_y = math.cos(seg.heading), math.sin(seg.heading)
                rel_x = x - dtype.type(seg.start[0])
                rel_y = y - dtype.type(seg.start[1])
                along = rel_x * dtype.type(dir_x) + rel_y * dtype.type(dir_y)
                lat = rel_y * dtype.type(dir_x) - rel_x * dtype.type(dir_y)
                clamped = np.clip(along, 0.0, seg.length)
                over = along - clamped
                dist = np.sqrt(over * over + lat * lat)
                s_cand = dtype.type(seg.s0) + clamped
                lat_cand = np.where(over == 0.0, lat, np.copysign(dist, lat))
            else:
                u_x = x - dtype.type(seg.center[0])
                u_y = y - dtype.type(seg.center[1])
                r = np.sqrt(u_x * u_x + u_y * u_y)
                start_angle = math.atan2(
                    seg.start[1] - seg.center[1], seg.start[0] - seg.center[0]
                )
                ang = np.arctan2(u_y, u_x)
                two_pi = dtype.type(2.0 * math.pi)
                delta = np.mod(dtype.type(seg.turn) * (ang - dtype.type(start_angle)), two_pi)
                sweep = seg.length / seg.radius
                in_range = delta <= dtype.type(sweep)
                lat_circ = dtype.type(seg.turn) * (dtype.type(seg.radius) - r)
                s_cand = dtype.type(seg.s0) + np.minimum(delta, dtype.type(sweep)) * dtype.type(
                    seg.radius
                )
                dist = np.abs(lat_circ)
                if not in_range.all():
                    # Out-of-range points compare by distance to the nearer endpoint.
                    e0 = self.pose(seg.s0)[:2]
                    e1 = self.pose(seg.s0 + seg.length)[:2]
                    d_start = np.hypot(x - dtype.type(e0[0]), y - dtype.type(e0[1]))
                    d_end = np.hypot(x - dtype.type(e1[0]), y - dtype.type(e1[1]))
                    d_clamp = np.minimum(d_start, d_end)
                    s_clamp = np.where(
                        d_start <= d_end, dtype.type(seg.s0), dtype.type(seg.s0 + seg.length)
                    )
                    dist = np.where(in_range, dist, d_clamp)
                    s_cand = np.where(in_range, s_cand, s_clamp)
                    lat_cand = np.where(in_range, lat_circ, np.copysign(d_clamp, lat_circ))
                else:
                    lat_cand = lat_circ
            better = dist < best_dist
            best_dist[better] = dist[better]
            best_s[better] = s_cand[better]
            best_lat[better] = lat_cand[better]
        return best_s, best_lat

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """project_xy over an (n, 2) array in float64."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return self.project_xy(pts[:, 0].copy(), pts[:, 1].copy())

    def centerline_polyline(self, step: float = 1.0) -> np.ndarray:
        """Sampled (n, 2) polyline along the track at roughly `step` spacing."""
        if step <= 0:
            raise ValidationError("step must be positive")
        n = max(2, int(math.ceil(self.length / step)) + 1)
        ss = np.linspace(0.0, self.length, n)
        return np.array([self.pose(s)[:2] for s in ss])


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    heading: float  # radians, continuous (not wrapped)
    speed: float  # m/s

    def __post_init__(self):
        if self.speed < 0:
            raise ValidationError("speed must be >= 0")


@dataclass(frozen=True)
class ControllerParams:
    wheelbase: float = 2.7
    lookahead_base: float = 4.0
    lookahead_gain: float = 0.5  # seconds: L_d = base + gain * speed
    dt: float = 0.05
    max_steer: float = 0.6

    def __post_init__(self):
        if min(self.wheelbase, self.lookahead_base, self.lookahead_gain, self.dt, self.max_steer) <= 0:
            raise ValidationError("controller parameters must be positive")
        if self.dt > 0.1:
            raise ValidationError("dt must be <= 0.1 s")
