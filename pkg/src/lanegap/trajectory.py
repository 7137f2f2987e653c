"""Trajectory fidelity against a reference centerline in UTM coordinates.

Provides the WGS84 -> UTM forward projection (Transverse Mercator series,
Snyder 1987, k0 = 0.9996), nearest-point matching onto a centerline
polyline, per-section easting/northing RMSE, and verdicts for returning to
the lane center after a forced displacement.

Easting/northing values are accepted as arbitrary planar meters: recorded
datasets sometimes carry scaled or locally offset coordinates, and every
operation here is translation-invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ValidationError

# WGS84 ellipsoid.
_A = 6378137.0
_F = 1.0 / 298.257223563
_E2 = _F * (2.0 - _F)
_EP2 = _E2 / (1.0 - _E2)

UTM_SCALE = 0.9996
FALSE_EASTING = 500000.0
FALSE_NORTHING_SOUTH = 10000000.0

MAX_SAMPLE_GAP_M = 10.0


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if abs(self.lat) > 84.0:
            raise ValidationError(f"latitude {self.lat} outside UTM domain (|lat| <= 84)")
        if not -180.0 <= self.lon <= 180.0:
            raise ValidationError(f"longitude {self.lon} out of range")


@dataclass(frozen=True)
class UtmPoint:
    easting: float
    northing: float
    zone: int
    hemisphere: str = "N"

    def __post_init__(self):
        if not 1 <= self.zone <= 60:
            raise ValidationError(f"UTM zone {self.zone} outside [1, 60]")
        if self.hemisphere not in ("N", "S"):
            raise ValidationError(f"hemisphere must be 'N' or 'S', got {self.hemisphere!r}")


def utm_zone_for(lon: float) -> int:
    return int(((lon + 180.0) % 360.0) // 6.0) + 1


def latlon_to_utm(p: GeoPoint, force_zone: int | None = None) -> UtmPoint:
    """Forward Transverse Mercator on the WGS84 ellipsoid.

    Series form per Snyder, "Map Projections: A Working Manual" (1987),
    eqs. 8-9..8-15; sub-millimeter within a zone.
    """
    zone = force_zone if force_zone is not None else utm_zone_for(p.lon)
    if not 1 <= zone <= 60:
        raise ValidationError(f"forced zone {zone} outside [1, 60]")
    lon0 = math.radians(-183.0 + 6.0 * zone)
    lat = math.radians(p.lat)
    lon = math.radians(p.lon)

    sin_lat, cos_lat = math.sin(lat), math.cos(lat)
    n_rad = _A / math.sqrt(1.0 - _E2 * sin_lat * sin_lat)
    t = math.tan(lat) ** 2
    c = _EP2 * cos_lat * cos_lat
    a_coef = cos_lat * (lon - lon0)

    e4, e6 = _E2 * _E2, _E2 * _E2 * _E2
    m = _A * (
        (1.0 - _E2 / 4.0 - 3.0 * e4 / 64.0 - 5.0 * e6 / 256.0) * lat
        - (3.0 * _E2 / 8.0 + 3.0 * e4 / 32.0 + 45.0 * e6 / 1024.0) * math.sin(2.0 * lat)
        + (15.0 * e4 / 256.0 + 45.0 * e6 / 1024.0) * math.sin(4.0 * lat)
        - (35.0 * e6 / 3072.0) * math.sin(6.0 * lat)
    )

    easting = (
        UTM_SCALE
        * n_rad
        * (
            a_coef
            + (1.0 - t + c) * a_coef**3 / 6.0
            + (5.0 - 18.0 * t + t * t + 72.0 * c - 58.0 * _EP2) * a_coef**5 / 120.0
        )
        + FALSE_EASTING
    )
    northing = UTM_SCALE * (
        m
        + n_rad
        * math.tan(lat)
        * (
            a_coef**2 / 2.0
            + (5.0 - t + 9.0 * c + 4.0 * c * c) * a_coef**4 / 24.0
            + (61.0 - 58.0 * t + t * t + 600.0 * c - 330.0 * _EP2) * a_coef**6 / 720.0
        )
    )
    hemisphere = "N" if p.lat >= 0 else "S"
    if hemisphere == "S":
        northing += FALSE_NORTHING_SOUTH
    return UtmPoint(easting=easting, northing=northing, zone=zone, hemisphere=hemisphere)


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered planar samples; arrays t (n,) seconds and xy (n, 2) meters."""

    t: np.ndarray
    xy: np.ndarray
    zone: int
    hemisphere: str = "N"
    label: str = ""

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        xy = np.asarray(self.xy, dtype=np.float64)
        if t.ndim != 1 or xy.shape != (t.size, 2):
            raise ValidationError(f"bad trajectory shapes t{t.shape}, xy{xy.shape}")
        if t.size < 1:
            raise ValidationError("empty trajectory")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValidationError("timestamps must be strictly increasing")
        gaps = np.hypot(*np.diff(xy, axis=0).T) if t.size > 1 else np.array([])
        if gaps.size and float(gaps.max()) >= MAX_SAMPLE_GAP_M:
            raise ValidationError(
                f"spatial discontinuity {float(gaps.max()):.2f} m >= {MAX_SAMPLE_GAP_M} m"
            )
        t.setflags(write=False)
        xy.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "xy", xy)

    def __len__(self) -> int:
        return int(self.t.size)


@dataclass(frozen=True)
class Centerline:
    """Reference polyline; vertices (n, 2) meters, with cumulative arclength."""

    xy: np.ndarray
    zone: int
    hemisphere: str = "N"
    arclength: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        xy = np.asarray(self.xy, dtype=np.float64)
        if xy.ndim != 2 or xy.shape[1] != 2 or xy.shape[0] < 2:
            raise ValidationError(f"centerline needs >= 2 planar points, got shape {xy.shape}")
        seg = np.hypot(*np.diff(xy, axis=0).T)
        if float(seg.min()) <= 0.0:
            raise ValidationError("centerline contains a zero-length segment")
        arclength = np.concatenate([[0.0], np.cumsum(seg)])
        xy.setflags(write=False)
        arclength.setflags(write=False)
        object.__setattr__(self, "xy", xy)
        object.__setattr__(self, "arclength", arclength)

    @property
    def length(self) -> float:
        return float(self.arclength[-1])


@dataclass(frozen=True)
class SectionSpec:
    """Arclength window [start_s, end_s] along the centerline."""

    name: str
    start_s: float
    end_s: float

    def __post_init__(self):
        if not 0.0 <= self.start_s < self.end_s:
            raise ValidationError(f"bad section bounds [{self.start_s}, {self.end_s}]")


@dataclass(frozen=True)
class RestoreSpec:
    return_band: float = 0.2
    t_max: float = 120.0
    stable_window: float = 10.0
    stable_band: float = 0.3

    def __post_init__(self):
        if min(self.return_band, self.t_max, self.stable_window, self.stable_band) <= 0:
            raise ValidationError("restore spec values must be positive")


@dataclass(frozen=True)
class RestoreVerdict:
    success: bool
    return_time: float | None
    reason: str


def _project_many(points: np.ndarray, c: Centerline) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized nearest-point projection; returns (foot (n,2), s (n,), offset (n,))."""
    p = np.atleast_2d(points)
    a = c.xy[:-1]
    d = np.diff(c.xy, axis=0)
    seg_len2 = np.einsum("ij,ij->i", d, d)

    rel = p[:, None, :] - a[None, :, :]  # (n, m, 2)
    tt = np.clip(np.einsum("nmj,mj->nm", rel, d) / seg_len2[None, :], 0.0, 1.0)
    foot = a[None, :, :] + tt[:, :, None] * d[None, :, :]
    diff = p[:, None, :] - foot
    dist2 = np.einsum("nmj,nmj->nm", diff, diff)

    # First minimum = smallest segment index = smallest arclength on ties.
    best = np.argmin(dist2, axis=1)
    idx = np.arange(p.shape[0])
    foot_best = foot[idx, best]
    t_best = tt[idx, best]
    s = c.arclength[best] + t_best * np.sqrt(seg_len2[best])
    delta = p - foot_best
    cross = d[best, 0] * delta[:, 1] - d[best, 1] * delta[:, 0]
    # Left of travel direction is positive; magnitude is the true distance
    # even when the projection clamps to a vertex.
    sign = np.where(cross >= 0.0, 1.0, -1.0)
    offset = sign * np.sqrt(dist2[idx, best])
    return foot_best, s, offset


def nearest_on_polyline(p: UtmPoint, c: Centerline) -> tuple[UtmPoint, float, float]:
    """Foot point, arclength and signed lateral offset (left of travel positive)."""
    if p.zone != c.zone or p.hemisphere != c.hemisphere:
        raise ValidationError("point and centerline are in different UTM zones")
    foot, s, offset = _project_many(np.array([[p.easting, p.northing]]), c)
    foot_pt = UtmPoint(
        easting=float(foot[0, 0]), northing=float(foot[0, 1]), zone=c.zone, hemisphere=c.hemisphere
    )
    return foot_pt, float(s[0]), float(offset[0])


def lateral_offsets(traj: Trajectory, c: Centerline) -> list[tuple[float, float, float]]:
    """Per-sample (t, matched arclength, signed lateral offset), preserving time order."""
    if traj.zone != c.zone or traj.hemisphere != c.hemisphere:
        raise ValidationError("trajectory and centerline are in different UTM zones")
    _, s, offset = _project_many(traj.xy, c)
    return [(float(t), float(si), float(oi)) for t, si, oi in zip(traj.t, s, offset)]


def section_rmse(
    traj: Trajectory, c: Centerline, sec: SectionSpec
) -> tuple[float, float, int]:
    """Easting and northing RMSE against the matched foot points inside a section."""
    if sec.end_s > c.length:
        raise ValidationError(f"section {sec.name!r} ends beyond centerline length {c.length:.1f}")
    if traj.zone != c.zone or traj.hemisphere != c.hemisphere:
        raise ValidationError("trajectory and centerline are in different UTM zones")
    foot, s, _ = _project_many(traj.xy, c)
    mask = (s >= sec.start_s) & (s <= sec.end_s)
    if not mask.any():
        raise ValidationError(f"no trajectory samples inside section {sec.name!r}")
    err = traj.xy[mask] - foot[mask]
    rmse_x = float(np.sqrt(np.mean(err[:, 0] ** 2)))
    rmse_y = float(np.sqrt(np.mean(err[:, 1] ** 2)))
    return rmse_x, rmse_y, int(mask.sum())


def restoring_verdict(
    offsets: list[tuple[float, float, float]], spec: RestoreSpec = RestoreSpec()
) -> RestoreVerdict:
    """Return-to-center verdict over (t, s, offset) samples.

    Success requires a sample time t* <= t_max with |offset| <= return_band
    whose following stable_window stays within stable_band; return_time is
    the earliest such t*.
    """
    if not offsets:
        raise ValidationError("empty offset series")
    t = np.array([o[0] for o in offsets], dtype=np.float64)
    off = np.array([o[-1] for o in offsets], dtype=np.float64)
    if t.size > 1 and not np.all(np.diff(t) > 0):
        raise ValidationError("offset series must be time-ordered")
    end_t = float(t[-1])

    truncated = False
    for i in np.flatnonzero((np.abs(off) <= spec.return_band) & (t <= spec.t_max)):
        t_star = float(t[i])
        if end_t < t_star + spec.stable_window:
            truncated = True
            continue
        window = (t >= t_star) & (t <= t_star + spec.stable_window)
        if np.all(np.abs(off[window]) <= spec.stable_band):
            return RestoreVerdict(success=True, return_time=t_star, reason="returned")
    if truncated:
        return RestoreVerdict(success=False, return_time=None, reason="insufficient data")
    return RestoreVerdict(success=False, return_time=None, reason="never within band")


def success_rate(outcomes: list[bool]) -> float:
    """Percentage of successes, reported to 0.1."""
    if not outcomes:
        raise ValidationError("no outcomes")
    return round(100.0 * sum(bool(o) for o in outcomes) / len(outcomes), 1)


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    """Planar form: header 't,x,y', one sample per line, LF endings."""
    lines = ["t,x,y"]
    for t, (x, y) in zip(traj.t, traj.xy):
        lines.append(f"{float(t)!r},{float(x)!r},{float(y)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_trajectory_csv(
    path: str | Path, zone: int = 52, hemisphere: str = "N", label: str | None = None
) -> Trajectory:
    """Read 't,lat,lon' (WGS84 degrees) or 't,x,y' (planar meters) samples.

    Geographic input is projected into the zone of the first sample so one
    file never straddles zones; planar input takes zone/hemisphere from the
    arguments (sidecar config).
    """
    rows, header = _read_csv_rows(path)
    if header == ["t", "lat", "lon"]:
        first = GeoPoint(lat=rows[0][1], lon=rows[0][2])
        zone = utm_zone_for(first.lon)
        hemisphere = "N" if first.lat >= 0 else "S"
        pts = [latlon_to_utm(GeoPoint(lat=r[1], lon=r[2]), force_zone=zone) for r in rows]
        xy = np.array([[p.easting, p.northing] for p in pts])
    elif header == ["t", "x", "y"]:
        xy = np.array([[r[1], r[2]] for r in rows])
    else:
        raise ValidationError(f"{path}: header must be 't,lat,lon' or 't,x,y', got {header}")
    return Trajectory(
        t=np.array([r[0] for r in rows]),
        xy=xy,
        zone=zone,
        hemisphere=hemisphere,
        label=label if label is not None else Path(path).stem,
    )


def write_centerline_csv(c: Centerline, path: str | Path) -> None:
    lines = ["x,y"]
    for x, y in c.xy:
        lines.append(f"{float(x)!r},{float(y)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_centerline_csv(path: str | Path, zone: int = 52, hemisphere: str = "N") -> Centerline:
    """Read 'lat,lon' or 'x,y' centerline vertices (same conventions as trajectories)."""
    rows, header = _read_csv_rows(path)
    if header == ["lat", "lon"]:
        first = GeoPoint(lat=rows[0][0], lon=rows[0][1])
        zone = utm_zone_for(first.lon)
        hemisphere = "N" if first.lat >= 0 else "S"
        pts = [latlon_to_utm(GeoPoint(lat=r[0], lon=r[1]), force_zone=zone) for r in rows]
        xy = np.array([[p.easting, p.northing] for p in pts])
    elif header == ["x", "y"]:
        xy = np.array(rows)
    else:
        raise ValidationError(f"{path}: header must be 'lat,lon' or 'x,y', got {header}")
    return Centerline(xy=xy, zone=zone, hemisphere=hemisphere)


def _read_csv_rows(path: str | Path) -> tuple[list[list[float]], list[str]]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.split("\n") if ln.strip()]
    if len(lines) < 2:
        raise ValidationError(f"{path}: need a header and at least one sample")
    header = [h.strip() for h in lines[0].split(",")]
    rows = []
    for i, ln in enumerate(lines[1:], 2):
        parts = ln.split(",")
        if len(parts) != len(header):
            raise ValidationError(f"{path}:{i}: expected {len(header)} fields, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as e:
            raise ValidationError(f"{path}:{i}: {e}")
    return rows, header
