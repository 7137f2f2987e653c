import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lanegap.core import ValidationError
from lanegap.lane_eval import (
    ABSENT,
    LaneFrame,
    SegmentationRaster,
    extract_ground_truth,
    read_lane_frames,
    row_runs,
    tusimple_accuracy,
    write_lane_frames,
)

from conftest import make_image

GREEN = (0, 255, 0)


def raster_with_runs(rows_to_runs, width=808, height=620, run_width=5):
    """Paint `run_width`-wide runs centered on the given columns."""
    img = np.zeros((height, width, 3), dtype=np.uint8)
    half = run_width // 2
    for row, centers in rows_to_runs.items():
        for c in centers:
            img[row, max(0, c - half) : c + half + 1] = GREEN
    return SegmentationRaster(image=make_image(img), lane_color=GREEN)


class TestRowRuns:
    def test_two_runs_hand_layout(self):
        img = np.zeros((4, 200, 3), dtype=np.uint8)
        img[1, 10:15] = GREEN  # columns 10..14 -> center 12
        img[1, 100:105] = GREEN  # columns 100..104 -> center 102
        raster = SegmentationRaster(image=make_image(img), lane_color=GREEN)
        assert row_runs(raster, 1) == [12, 102]

    def test_empty_row(self):
        raster = raster_with_runs({}, width=50, height=5)
        assert row_runs(raster, 2) == []

    def test_single_pixel(self):
        img = np.zeros((3, 20, 3), dtype=np.uint8)
        img[0, 7] = GREEN
        raster = SegmentationRaster(image=make_image(img), lane_color=GREEN)
        assert row_runs(raster, 0) == [7]

    def test_left_to_right_order(self):
        raster = raster_with_runs({5: [300, 100, 500]}, width=600, height=10)
        assert row_runs(raster, 5) == [100, 300, 500]

    def test_row_out_of_range(self):
        raster = raster_with_runs({}, width=10, height=5)
        with pytest.raises(ValidationError):
            row_runs(raster, 5)


class TestExtractGroundTruth:
    def test_two_runs_are_lines_2_3(self):
        raster = raster_with_runs({300: [300, 500]})
        frame = extract_ground_truth(raster, h_samples=(300,))
        assert frame.lanes[0][0] == ABSENT
        assert frame.lanes[1][0] == 300
        assert frame.lanes[2][0] == 500
        assert frame.lanes[3][0] == ABSENT

    def test_three_runs_second_left_of_center(self):
        # second run at 300 < 404: pseudocode rule assigns lines (1, 2, 3)
        raster = raster_with_runs({300: [100, 300, 500]})
        frame = extract_ground_truth(raster, h_samples=(300,))
        assert [lane[0] for lane in frame.lanes] == [100, 300, 500, ABSENT]

    def test_three_runs_second_right_of_center(self):
        raster = raster_with_runs({300: [300, 500, 700]})
        frame = extract_ground_truth(raster, h_samples=(300,))
        assert [lane[0] for lane in frame.lanes] == [ABSENT, 300, 500, 700]

    def test_prose_rule_inverts(self):
        raster = raster_with_runs({300: [100, 300, 500]})
        frame = extract_ground_truth(raster, h_samples=(300,), three_run_rule="prose")
        assert [lane[0] for lane in frame.lanes] == [ABSENT, 100, 300, 500]

    def test_four_runs(self):
        raster = raster_with_runs({300: [100, 300, 500, 700]})
        frame = extract_ground_truth(raster, h_samples=(300,))
        assert [lane[0] for lane in frame.lanes] == [100, 300, 500, 700]

    @pytest.mark.parametrize("centers", [[], [404], [100, 200, 300, 400, 500]])
    def test_invalid_run_counts_absent(self, centers):
        raster = raster_with_runs({300: centers})
        frame = extract_ground_truth(raster, h_samples=(300,))
        assert all(lane[0] == ABSENT for lane in frame.lanes)

    def test_assigned_ids_increase_left_to_right(self):
        raster = raster_with_runs({250: [50, 250], 300: [100, 300, 500], 350: [10, 200, 600, 790]})
        frame = extract_ground_truth(raster, h_samples=(250, 300, 350))
        for i in range(len(frame.h_samples)):
            xs = [lane[i] for lane in frame.lanes if lane[i] != ABSENT]
            assert xs == sorted(xs)
            assert len(xs) == len(set(xs))

    def test_rows_outside_image_absent(self):
        raster = raster_with_runs({10: [100, 200]}, width=300, height=20)
        frame = extract_ground_truth(raster, h_samples=(10, 50))
        assert frame.lanes[1][0] == 100
        assert all(lane[1] == ABSENT for lane in frame.lanes)

    def test_bad_rule_rejected(self):
        raster = raster_with_runs({})
        with pytest.raises(ValidationError):
            extract_ground_truth(raster, h_samples=(300,), three_run_rule="guess")


def frame(frame_id, h_samples, lanes):
    return LaneFrame(h_samples=h_samples, lanes=lanes, frame_id=frame_id)


class TestTusimpleAccuracy:
    def test_perfect(self):
        gt = frame("f0", (10, 20), ((100, 110), (200, 210), (300, 310), (ABSENT, ABSENT)))
        report = tusimple_accuracy([gt], [gt], threshold=20)
        assert report.accuracy == 1.0
        assert report.total_gt == 6

    def test_all_absent_predictions(self):
        gt = frame("f0", (10,), ((100,), (200,), (300,), (400,)))
        pred = frame("f0", (10,), ((ABSENT,), (ABSENT,), (ABSENT,), (ABSENT,)))
        report = tusimple_accuracy([pred], [gt])
        assert report.accuracy == 0.0

    def test_three_of_four(self):
        # 4 GT points; one prediction off by threshold+1
        gt = frame("f0", (10, 20), ((100, 110), (200, 210), (ABSENT, ABSENT), (ABSENT, ABSENT)))
        pred = frame("f0", (10, 20), ((100, 110), (200, 210 + 21), (ABSENT, ABSENT), (ABSENT, ABSENT)))
        report = tusimple_accuracy([pred], [gt], threshold=20)
        assert report.accuracy == 0.75
        assert (report.matched, report.total_gt) == (3, 4)

    def test_exactly_at_threshold_matches(self):
        gt = frame("f0", (10,), ((100,), (ABSENT,), (ABSENT,), (ABSENT,)))
        pred = frame("f0", (10,), ((120,), (ABSENT,), (ABSENT,), (ABSENT,)))
        assert tusimple_accuracy([pred], [gt], threshold=20).accuracy == 1.0

    def test_unmatched_frame_id(self):
        gt = frame("f0", (10,), ((100,), (ABSENT,), (ABSENT,), (ABSENT,)))
        pred = frame("other", (10,), ((100,), (ABSENT,), (ABSENT,), (ABSENT,)))
        with pytest.raises(ValidationError, match="no prediction"):
            tusimple_accuracy([pred], [gt])

    def test_h_samples_mismatch(self):
        gt = frame("f0", (10,), ((100,), (ABSENT,), (ABSENT,), (ABSENT,)))
        pred = frame("f0", (20,), ((100,), (ABSENT,), (ABSENT,), (ABSENT,)))
        with pytest.raises(ValidationError, match="h_samples"):
            tusimple_accuracy([pred], [gt])

    @given(st.integers(0, 10**6))
    @settings(max_examples=20, deadline=None)
    def test_threshold_monotone(self, seed):
        rng = np.random.default_rng(seed)
        hs = tuple(range(10, 110, 10))
        gt_lanes = tuple(
            tuple(int(x) for x in rng.integers(0, 800, len(hs))) for _ in range(4)
        )
        noise = rng.integers(-40, 41, (4, len(hs)))
        pred_lanes = tuple(
            tuple(max(0, gt_lanes[i][j] + int(noise[i, j])) for j in range(len(hs)))
            for i in range(4)
        )
        gt = [frame("f", hs, gt_lanes)]
        pred = [frame("f", hs, pred_lanes)]
        accs = [tusimple_accuracy(pred, gt, threshold=t).accuracy for t in (5, 10, 20, 40)]
        assert all(a <= b for a, b in zip(accs, accs[1:]))


class TestLaneFrameFile:
    def test_round_trip(self, tmp_path):
        frames = [
            frame("a.png", (10, 20), ((1, 2), (3, 4), (ABSENT, 5), (ABSENT, ABSENT))),
            frame("b.png", (10, 20), ((9, 8), (7, 6), (5, 4), (3, 2))),
        ]
        path = tmp_path / "frames.jsonl"
        write_lane_frames(frames, path)
        back = read_lane_frames(path)
        assert back == frames

    def test_tusimple_field_layout(self, tmp_path):
        import json

        path = tmp_path / "frames.jsonl"
        write_lane_frames([frame("x.png", (5,), ((1,), (2,), (3,), (4,)))], path)
        obj = json.loads(path.read_text().splitlines()[0])
        assert set(obj) == {"raw_file", "h_samples", "lanes"}
        assert obj["raw_file"] == "x.png"

    def test_bad_record(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"nope": 1}\n')
        with pytest.raises(ValidationError, match="bad lane frame"):
            read_lane_frames(path)
