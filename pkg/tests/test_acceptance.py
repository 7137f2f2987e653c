"""Acceptance criteria, one test per criterion, each at its stated tolerance.

Paper-scale reference numbers are not reproducible at desk scale; these
tests check identities, independent oracles, and the ordering/monotonicity
trends on self-generated fixtures. Run with `pytest tests/test_acceptance.py -v`
for the per-criterion pass/fail lines.
"""

import math
import time

import numpy as np
import pytest

from lanegap.cli import EXIT_OK, dispatch
from lanegap.core import ImageSet
from lanegap.fid import GaussianStats, fid_between_sets, fid_matrix, frechet_distance, sqrtm_psd
from lanegap.fsim import LambdaCandidate, fsim_score, select_lambda
from lanegap.lane_eval import (
    ABSENT,
    LaneFrame,
    extract_ground_truth,
    row_runs,
    tusimple_accuracy,
)
from lanegap.core import RegionOfInterest, crop
from lanegap.synth import (
    CRISP,
    SOFT,
    Arc,
    CameraSpec,
    SceneSpec,
    Straight,
    StylePreset,
    TrackSpec,
    VehicleState,
    render_frame,
    render_segmentation,
    run_episode,
    track_centerline,
)
from lanegap.synth.render import MAX_RENDER_DIST_M, _geometry
from lanegap.trajectory import (
    Centerline,
    GeoPoint,
    RestoreSpec,
    SectionSpec,
    Trajectory,
    latlon_to_utm,
    restoring_verdict,
    section_rmse,
    success_rate,
)

FAST_CAM = CameraSpec(width=404, height=310)
FID_TRACK = TrackSpec(segments=(Straight(60.0), Arc(150.0, 40.0), Straight(60.0)))
LOOP_TRACK = TrackSpec(segments=(Straight(20.0), Arc(150.0, 45.0), Straight(40.0)))


def render_series_set(label: str, n: int = 200, cam: CameraSpec = FAST_CAM, **scene_kw) -> ImageSet:
    geo = _geometry(FID_TRACK)
    scene = SceneSpec(**scene_kw)
    images = []
    for s in np.linspace(0.0, geo.length - 25.0, n):
        x, y, heading = geo.pose(float(s))
        images.append(render_frame(scene, cam, VehicleState(x=x, y=y, heading=heading, speed=0.0), FID_TRACK))
    return ImageSet(label=label, images=tuple(images))


@pytest.fixture(scope="module")
def base_set_200():
    return render_series_set("base", n=200, line_length=10.0, line_spacing=10.0)


def test_fid_identity_under_1e3(base_set_200):
    """Any generated set against itself: FID < 1e-3, under 10 s for 200 images."""
    t0 = time.monotonic()
    report = fid_between_sets(base_set_200, base_set_200, d=64, seed=0)
    elapsed = time.monotonic() - t0
    assert report.value < 1e-3
    assert elapsed < 10.0, f"identity FID took {elapsed:.1f}s"


def test_fid_1d_closed_form_oracle():
    """1000 random 1-D Gaussian pairs match the scalar closed form to 1e-9 relative."""
    rng = np.random.default_rng(123)
    t0 = time.monotonic()
    for _ in range(1000):
        mu = rng.uniform(-5.0, 5.0, 2)
        var = rng.uniform(0.05, 9.0, 2)
        a = GaussianStats(mean=np.array([mu[0]]), cov=np.array([[var[0]]]))
        b = GaussianStats(mean=np.array([mu[1]]), cov=np.array([[var[1]]]))
        want = (mu[0] - mu[1]) ** 2 + var[0] + var[1] - 2.0 * math.sqrt(var[0] * var[1])
        got = frechet_distance(a, b)
        assert abs(got - want) <= 1e-9 * max(1.0, abs(want))
    elapsed = time.monotonic() - t0
    assert elapsed < 1.0, f"1-D oracle took {elapsed:.2f}s"


def test_matrix_sqrt_multiply_back_oracle():
    """100 random PSD matrices (d<=64, cond<=1e8): ||R^2-A||_F/||A||_F < 1e-6."""
    rng = np.random.default_rng(7)
    t0 = time.monotonic()
    for i in range(100):
        d = int(rng.integers(2, 65))
        cond = 10.0 ** rng.uniform(0.0, 8.0)
        q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        lam = np.exp(np.linspace(math.log(1.0 / cond), 0.0, d))
        a = (q * lam) @ q.T
        a = (a + a.T) / 2.0
        r = sqrtm_psd(a)
        rel = np.linalg.norm(r @ r - a) / np.linalg.norm(a)
        assert rel < 1e-6, f"case {i}: d={d} cond={cond:.1e} rel={rel:.2e}"
    elapsed = time.monotonic() - t0
    assert elapsed < 5.0, f"sqrt oracle took {elapsed:.1f}s"


def test_fid_monotone_in_lane_characteristics():
    """FID grows with parametric distance: line thickness, texture, dash spacing."""
    t0 = time.monotonic()
    seed = 0

    def fid_of(a, b):
        return fid_between_sets(a, b, d=64, seed=seed).value

    base_kw = dict(line_length=10.0, line_spacing=10.0)
    thickness_sets = [
        render_series_set(f"th{t}", line_width=t, **base_kw)
        for t in (0.125, 0.15, 0.175, 0.2)
    ]
    table = fid_matrix(thickness_sets, d=64, seed=seed)
    th_values = [float(table.values[0, j]) for j in (1, 2, 3)]
    assert th_values[0] < th_values[1] < th_values[2], f"thickness series {th_values}"
    assert float(table.values[0, 0]) == 0.0

    texture = {
        ts: render_series_set(f"tex{ts}", line_width=0.125, texture_sharpness=ts, **base_kw)
        for ts in (1.0, 0.6, 0.3)
    }
    tex_values = [fid_of(texture[1.0], texture[ts]) for ts in (0.6, 0.3)]
    assert tex_values[0] < tex_values[1], f"texture series {tex_values}"

    spacing = {
        sp: render_series_set(f"sp{sp}", line_width=0.125, line_length=sp, line_spacing=sp)
        for sp in (10.0, 5.0, 3.0)
    }
    sp_values = [fid_of(spacing[10.0], spacing[sp]) for sp in (5.0, 3.0)]
    assert sp_values[0] < sp_values[1], f"spacing series {sp_values}"

    elapsed = time.monotonic() - t0
    assert elapsed < 180.0, f"monotonicity suite took {elapsed:.0f}s"


def test_fsim_identity_symmetry_blur_monotone(rendered_frames):
    """FSIM: identity 1 +- 1e-9, exact symmetry, strictly decreasing under blur."""
    from lanegap.synth import apply_style

    t0 = time.monotonic()
    band = RegionOfInterest(0, 150, FAST_CAM.width, 160)
    frames = [crop(img, band) for img in rendered_frames.images]

    for img in frames[:3]:
        assert fsim_score(img, img) == pytest.approx(1.0, abs=1e-9)

    for a, b in zip(frames[:3], frames[3:6]):
        assert fsim_score(a, b) == fsim_score(b, a)

    sigmas = (0.5, 1.0, 2.0, 4.0)
    for i, img in enumerate(frames):
        scores = [
            fsim_score(img, apply_style(img, StylePreset(f"b{s}", blur_sigma=s)))
            for s in sigmas
        ]
        assert all(x > y for x, y in zip(scores, scores[1:])), f"frame {i}: {scores}"

    elapsed = time.monotonic() - t0
    assert elapsed < 60.0, f"FSIM criterion took {elapsed:.0f}s"


def test_select_lambda_reference_and_affine_invariance():
    """Reference score table selects id 3; any positive affine rescale agrees."""
    t0 = time.monotonic()
    scores = {"1": 0.439, "2": 0.423, "3": 0.451, "4": 0.403}

    def pick(mapping):
        return select_lambda(
            [LambdaCandidate(lambda_id=k, mean_fsim=v) for k, v in mapping.items()]
        )

    assert pick(scores) == "3"
    rng = np.random.default_rng(11)
    for _ in range(100):
        a = float(rng.uniform(0.01, 100.0))
        b = float(rng.uniform(-10.0, 10.0))
        assert pick({k: a * v + b for k, v in scores.items()}) == "3"
    elapsed = time.monotonic() - t0
    assert elapsed < 1.0


# ---------------------------------------------------------- Algorithm 1 oracle


def _row_ground_x(cam: CameraSpec, v: int) -> tuple[float, float] | None:
    """Forward ground distance X and camera depth z_c for image row v, or None."""
    f = cam.focal_px
    cy = (cam.height - 1) / 2.0
    phi = math.radians(cam.pitch_deg)
    denom = (v - cy) * math.cos(phi) - f * math.sin(phi)
    if denom <= 1e-9:
        return None
    x = cam.mount_height * (f * math.cos(phi) + (v - cy) * math.sin(phi)) / denom
    z_c = x * math.cos(phi) - cam.mount_height * math.sin(phi)
    return x, z_c


def _line_pixel(cam: CameraSpec, y_vehicle: float, z_c: float) -> float:
    cx = (cam.width - 1) / 2.0
    return cx - cam.focal_px * y_vehicle / z_c


class _OracleLine:
    VISIBLE, INVISIBLE, UNCERTAIN = "visible", "invisible", "uncertain"


def _oracle_straight(cam, scene, offset, v):
    """Per-line (status, expected u) for the straight-track fixture at row v."""
    rg = _row_ground_x(cam, v)
    out = {}
    if rg is None:
        return {k: (_OracleLine.INVISIBLE, None) for k in (1, 2, 3, 4)}
    x_v, z_c = rg
    if x_v > MAX_RENDER_DIST_M - 10.0:
        return {k: (_OracleLine.UNCERTAIN, None) for k in (1, 2, 3, 4)}
    for k, d in zip((1, 2, 3, 4), scene.line_offsets()):
        y = d - offset
        u = _line_pixel(cam, y, z_c)
        half_px = (scene.line_width / 2.0) / (z_c / cam.focal_px) + 4.0
        if half_px <= u <= cam.width - 1 - half_px:
            out[k] = (_OracleLine.VISIBLE, u)
        elif u < -half_px or u > cam.width - 1 + half_px:
            out[k] = (_OracleLine.INVISIBLE, None)
        else:
            out[k] = (_OracleLine.UNCERTAIN, None)
    return out


def _oracle_circle(cam, scene, radius, center_vehicle, v):
    """Per-line (status, expected u) for the closed-circle fixture at row v."""
    rg = _row_ground_x(cam, v)
    if rg is None:
        return {k: (_OracleLine.INVISIBLE, None) for k in (1, 2, 3, 4)}
    x_v, z_c = rg
    if x_v > MAX_RENDER_DIST_M - 10.0:
        return {k: (_OracleLine.UNCERTAIN, None) for k in (1, 2, 3, 4)}
    cx_v, cy_v = center_vehicle
    out = {}
    for k, d in zip((1, 2, 3, 4), scene.line_offsets()):
        rho = radius - d
        disc = rho * rho - (x_v - cx_v) ** 2
        if disc < 0.0:
            out[k] = (_OracleLine.INVISIBLE, None)
            continue
        if disc < 25.0:  # near-tangent rows smear laterally; not comparable
            out[k] = (_OracleLine.UNCERTAIN, None)
            continue
        y_near = cy_v - math.sqrt(disc)
        y_far = cy_v + math.sqrt(disc)
        u = _line_pixel(cam, y_near, z_c)
        u_far = _line_pixel(cam, y_far, z_c)
        if -50.0 <= u_far <= cam.width + 50.0:
            out[k] = (_OracleLine.UNCERTAIN, None)
            continue
        half_px = (scene.line_width / 2.0) / (z_c / cam.focal_px) + 4.0
        if half_px <= u <= cam.width - 1 - half_px:
            out[k] = (_OracleLine.VISIBLE, u)
        elif u < -half_px or u > cam.width - 1 + half_px:
            out[k] = (_OracleLine.INVISIBLE, None)
        else:
            out[k] = (_OracleLine.UNCERTAIN, None)
    return out


def test_ground_truth_extraction_matches_analytic_projection():
    """50 rasters, straight + circular: every extracted point within 1 px of
    the analytic projection at every default h_sample; 2/3/4-run rows all occur."""
    t0 = time.monotonic()
    cam = CameraSpec()  # stock 808x620, default h_samples apply
    scene = SceneSpec(connected_lines=True)
    straight = TrackSpec(segments=(Straight(500.0),))
    circle_r = 150.0
    circle = TrackSpec(segments=(Arc(circle_r, 360.0),), closed=True)
    geo_circle = _geometry(circle)

    offsets = np.linspace(-1.2, 1.2, 25)
    run_count_seen = {2: 0, 3: 0, 4: 0}
    compared = 0
    presence_checked = 0

    def check(raster, oracle_rows):
        nonlocal compared, presence_checked
        frame = extract_ground_truth(raster)
        for i, v in enumerate(frame.h_samples):
            oracle = oracle_rows(v)
            n_runs = len(row_runs(raster, v))
            if n_runs in run_count_seen:
                run_count_seen[n_runs] += 1
            statuses = [oracle[k][0] for k in (1, 2, 3, 4)]
            determinate = all(s != _OracleLine.UNCERTAIN for s in statuses)
            for k in (1, 2, 3, 4):
                status, u = oracle[k]
                x = frame.lanes[k - 1][i]
                if status == _OracleLine.VISIBLE and x != ABSENT:
                    assert abs(x - u) <= 1.0, f"row {v} line {k}: {x} vs {u:.2f}"
                    compared += 1
            if determinate:
                visible = {k for k in (1, 2, 3, 4) if oracle[k][0] == _OracleLine.VISIBLE}
                if len(visible) in (2, 3, 4):
                    for k in visible:
                        assert frame.lanes[k - 1][i] != ABSENT, f"row {v} line {k} missing"
                        presence_checked += 1

    for offset in offsets:
        state = VehicleState(x=30.0, y=float(offset), heading=0.0, speed=0.0)
        raster = render_segmentation(scene, cam, state, straight)
        check(raster, lambda v, o=float(offset): _oracle_straight(cam, scene, o, v))

    for j, offset in enumerate(offsets):
        s_pos = 20.0 + j * 7.0
        x, y, heading = geo_circle.pose(s_pos)
        pos = np.array([x - offset * math.sin(heading), y + offset * math.cos(heading)])
        state = VehicleState(x=float(pos[0]), y=float(pos[1]), heading=heading, speed=0.0)
        raster = render_segmentation(scene, cam, state, circle)
        center_world = np.array([0.0, circle_r])
        rel = center_world - pos
        cos_h, sin_h = math.cos(heading), math.sin(heading)
        center_vehicle = (
            cos_h * rel[0] + sin_h * rel[1],
            -sin_h * rel[0] + cos_h * rel[1],
        )
        check(raster, lambda v, c=center_vehicle: _oracle_circle(cam, scene, circle_r, c, v))

    assert compared > 1000, f"only {compared} point comparisons"
    assert presence_checked > 500
    assert all(n > 0 for n in run_count_seen.values()), f"branch coverage {run_count_seen}"
    elapsed = time.monotonic() - t0
    assert elapsed < 30.0, f"extraction oracle took {elapsed:.0f}s"


def test_tusimple_accuracy_criterion():
    """Perfect = 1.0; hand 3-of-4 = 0.75 exactly; monotone in threshold."""
    t0 = time.monotonic()
    gt = LaneFrame(
        h_samples=(10, 20),
        lanes=((100, 110), (200, 210), (ABSENT, ABSENT), (ABSENT, ABSENT)),
        frame_id="f",
    )
    assert tusimple_accuracy([gt], [gt]).accuracy == 1.0

    pred = LaneFrame(
        h_samples=(10, 20),
        lanes=((100, 110), (200, 231), (ABSENT, ABSENT), (ABSENT, ABSENT)),
        frame_id="f",
    )
    assert tusimple_accuracy([pred], [gt], threshold=20).accuracy == 0.75

    rng = np.random.default_rng(3)
    hs = tuple(range(250, 611, 10))
    gt_lanes = tuple(tuple(int(x) for x in rng.integers(0, 808, len(hs))) for _ in range(4))
    pred_lanes = tuple(
        tuple(max(0, x + int(e)) for x, e in zip(lane, rng.integers(-45, 46, len(hs))))
        for lane in gt_lanes
    )
    gts = [LaneFrame(h_samples=hs, lanes=gt_lanes, frame_id="r")]
    preds = [LaneFrame(h_samples=hs, lanes=pred_lanes, frame_id="r")]
    accs = [tusimple_accuracy(preds, gts, threshold=t).accuracy for t in (5, 10, 20, 40)]
    assert all(a <= b for a, b in zip(accs, accs[1:])), accs
    elapsed = time.monotonic() - t0
    assert elapsed < 5.0


def test_trajectory_criterion():
    """Zero RMSE on itself, exact constant offset, UTM central meridian,
    restoring truth table."""
    t0 = time.monotonic()
    xs = np.arange(0.0, 210.0, 10.0)
    center = Centerline(xy=np.column_stack([xs, np.zeros_like(xs)]), zone=52)
    t = np.arange(0.0, 30.0)
    on_line = Trajectory(t=t, xy=np.column_stack([t * 5.0, np.zeros_like(t)]), zone=52)
    sec = SectionSpec(name="s", start_s=10.0, end_s=140.0)
    assert section_rmse(on_line, center, sec)[:2] == (0.0, 0.0)

    ys = np.arange(0.0, 210.0, 10.0)
    center_north = Centerline(xy=np.column_stack([np.zeros_like(ys), ys]), zone=52)
    shifted = Trajectory(t=t, xy=np.column_stack([np.ones_like(t), t * 5.0]), zone=52)
    rx, ry, _ = section_rmse(shifted, center_north, sec)
    assert rx == pytest.approx(1.0, abs=1e-12)
    assert ry == pytest.approx(0.0, abs=1e-12)

    p = latlon_to_utm(GeoPoint(lat=0.0, lon=129.0))
    assert p.easting == pytest.approx(500000.0, abs=0.01)
    assert p.northing == pytest.approx(0.0, abs=0.01)

    def verdict(pairs):
        return restoring_verdict([(float(a), 0.0, float(b)) for a, b in pairs])

    immediate = verdict((tt, 0.0) for tt in np.arange(0.0, 20.0, 0.5))
    assert immediate.success and immediate.return_time == 0.0
    never = verdict((tt, 0.7) for tt in np.arange(0.0, 130.0, 1.0))
    assert not never.success
    late = verdict(
        [(tt, 0.5) for tt in np.arange(0.0, 100.0, 1.0)]
        + [(tt, 0.1) for tt in np.arange(100.0, 125.0, 1.0)]
    )
    assert late.success and late.return_time == pytest.approx(100.0)
    elapsed = time.monotonic() - t0
    assert elapsed < 5.0


def curved_section_rmse(log) -> float:
    traj = log.trajectory()
    center = track_centerline(LOOP_TRACK)
    rx, ry, _ = section_rmse(traj, center, SectionSpec(name="arc", start_s=30.0, end_s=130.0))
    return math.hypot(rx, ry)


def test_closed_loop_style_gap():
    """10 seeded episodes per style on a 150 m-radius arc: soft drives worse,
    crisp restores from +0.9 m, and crisp's success rate is not lower."""
    t0 = time.monotonic()
    results = {}
    for style in (CRISP, SOFT):
        rmses, verdicts = [], []
        for seed in range(10):
            log = run_episode(
                LOOP_TRACK, SceneSpec(), style,
                init_lateral_offset=0.9, duration=20.0, seed=seed, cam=FAST_CAM,
            )
            rmses.append(curved_section_rmse(log))
            verdicts.append(restoring_verdict(log.offsets_series(), RestoreSpec()).success)
        results[style.name] = (rmses, verdicts)

    crisp_rmse = float(np.mean(results["crisp"][0]))
    soft_rmse = float(np.mean(results["soft"][0]))
    assert soft_rmse > crisp_rmse, f"soft {soft_rmse:.4f} <= crisp {crisp_rmse:.4f}"

    crisp_successes = sum(results["crisp"][1])
    assert crisp_successes >= 9, f"crisp restored only {crisp_successes}/10"

    assert success_rate(results["crisp"][1]) >= success_rate(results["soft"][1])
    elapsed = time.monotonic() - t0
    assert elapsed < 300.0, f"closed-loop criterion took {elapsed:.0f}s"


def test_cli_determinism(tmp_path, capsys):
    """`simulate` and `fid` invoked twice with identical config emit identical bytes."""
    rng = np.random.default_rng(0)
    img_dir = tmp_path / "imgs"
    img_dir.mkdir()
    from lanegap.core import save_image
    from conftest import make_image

    for i in range(6):
        save_image(make_image(rng.integers(0, 256, (40, 64, 3))), img_dir / f"{i:02d}.png")

    fid_argv = ["fid", "--a", str(img_dir), "--b", str(img_dir), "--d", "16", "--seed", "2"]
    assert dispatch(fid_argv) == EXIT_OK
    out1 = capsys.readouterr().out
    assert dispatch(fid_argv) == EXIT_OK
    out2 = capsys.readouterr().out
    assert out1 == out2

    sim_argv = [
        "simulate", "--track", "straight:150", "--episodes", "1", "--duration", "2",
        "--style", "soft", "--seed", "3", "--out-dir", str(tmp_path / "sim"),
        "--cam-width", "404", "--cam-height", "310",
    ]
    assert dispatch(sim_argv) == EXIT_OK
    sim_out1 = capsys.readouterr().out
    files1 = {
        p.name: p.read_bytes() for p in (tmp_path / "sim" / "ep000").iterdir()
    }
    assert dispatch(sim_argv) == EXIT_OK
    sim_out2 = capsys.readouterr().out
    files2 = {
        p.name: p.read_bytes() for p in (tmp_path / "sim" / "ep000").iterdir()
    }
    assert sim_out1 == sim_out2
    assert files1 == files2
