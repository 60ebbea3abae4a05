import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gazekit.errors import PipelineError
from gazekit.gazemap import (
    GazeMappingConfig,
    GazeTargetSample,
    align_gaze_to_frames,
    assign_target,
    circle_ratios,
    load_trajectory_csv,
    map_trajectory,
    smooth_targets,
    write_trajectory_csv,
)
from gazekit.maskmetrics import FrameAssignment
from gazekit.model import GazeSample, GazeTrack, ObjectRegistry, TimestampTrack
from gazekit.demo import _demo_archive, _demo_gaze, demo_frame_track


def circle_oracle(frame: FrameAssignment, cx, cy, radius):
    """Scan every pixel of the image; the reference for circle_ratios."""
    counts = np.zeros(frame.n_objects, dtype=np.int64)
    n_circle = 0
    n_background = 0
    for y in range(frame.height):
        for x in range(frame.width):
            if (x + 0.5 - cx) ** 2 + (y + 0.5 - cy) ** 2 <= radius**2:
                n_circle += 1
                column = frame.masks[:, y * frame.width + x]
                counts += column
                if not column.any():
                    n_background += 1
    if n_circle == 0:
        return np.zeros(frame.n_objects), 0.0
    return counts / n_circle, n_background / n_circle


def _random_frame(rng, width=16, height=16, n_objects=3, density=0.4):
    masks = rng.random((n_objects, width * height)) < density
    return FrameAssignment(width=width, height=height, masks=masks)


class TestAlignGazeToFrames:
    def _frames(self, n=10, step=33_333_333):
        return TimestampTrack(tuple((i, i * step) for i in range(n)))

    def test_exact_hit(self):
        frames = self._frames()
        gaze = GazeTrack((GazeSample(2 * 33_333_333, 0.0, 0.0),))
        [(_, frame)] = align_gaze_to_frames(gaze, frames)
        assert frame == 2

    def test_midpoint_goes_to_earlier_frame(self):
        frames = TimestampTrack(((0, 0), (1, 100)))
        gaze = GazeTrack((GazeSample(50, 0.0, 0.0),))
        [(_, frame)] = align_gaze_to_frames(gaze, frames)
        assert frame == 0

    def test_200hz_against_30hz_density(self):
        # ~6.67 gaze samples per frame on average.
        frames = self._frames(n=30)
        gaze = GazeTrack(tuple(GazeSample(i * 5_000_000, 0.0, 0.0) for i in range(200)))
        assigned = [f for _, f in align_gaze_to_frames(gaze, frames) if f is not None]
        per_frame = len(assigned) / 30
        assert 6.0 <= per_frame <= 7.0

    def test_far_samples_get_none(self):
        frames = self._frames(n=3)
        far_ts = 3 * 33_333_333 + 200_000_000
        gaze = GazeTrack((GazeSample(far_ts, 0.0, 0.0),))
        [(_, frame)] = align_gaze_to_frames(gaze, frames)
        assert frame is None

    def test_empty_frame_track_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            align_gaze_to_frames(GazeTrack(()), TimestampTrack(()))


class TestCircleRatios:
    def test_circle_inside_single_object(self):
        masks = np.zeros((2, 64), dtype=bool)
        masks[0] = True
        frame = FrameAssignment(width=8, height=8, masks=masks)
        ratios, bg = circle_ratios(frame, 4.0, 4.0, 2.0)
        assert ratios[0] == 1.0 and ratios[1] == 0.0 and bg == 0.0

    def test_circle_in_unassigned_region(self):
        frame = FrameAssignment(width=8, height=8, masks=np.zeros((1, 64), dtype=bool))
        ratios, bg = circle_ratios(frame, 4.0, 4.0, 2.0)
        assert ratios[0] == 0.0 and bg == 1.0

    def test_half_covered_matches_oracle(self):
        # Object covers the left half; the circle straddles the boundary.
        masks = np.zeros((1, 64), dtype=bool)
        grid = np.zeros((8, 8), dtype=bool)
        grid[:, :4] = True
        masks[0] = grid.ravel()
        frame = FrameAssignment(width=8, height=8, masks=masks)
        ratios, bg = circle_ratios(frame, 4.0, 4.0, 2.0)
        exp_ratios, exp_bg = circle_oracle(frame, 4.0, 4.0, 2.0)
        assert np.array_equal(ratios, exp_ratios)
        assert bg == exp_bg

    def test_center_far_off_frame_is_empty(self):
        frame = _random_frame(np.random.default_rng(0))
        ratios, bg = circle_ratios(frame, -100.0, -100.0, 3.0)
        assert not ratios.any() and bg == 0.0

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_matches_full_image_oracle(self, seed):
        rng = np.random.default_rng(seed)
        frame = _random_frame(rng, n_objects=int(rng.integers(1, 4)))
        cx = float(rng.uniform(-4, 20))
        cy = float(rng.uniform(-4, 20))
        radius = float(rng.uniform(0.3, 16.0))
        ratios, bg = circle_ratios(frame, cx, cy, radius)
        exp_ratios, exp_bg = circle_oracle(frame, cx, cy, radius)
        assert np.array_equal(ratios, exp_ratios)
        assert bg == exp_bg

    def test_disjoint_masks_ratios_sum_to_one(self):
        rng = np.random.default_rng(8)
        # Carve the image into disjoint object regions.
        owner = rng.integers(0, 3, 256)
        masks = np.stack([(owner == o) for o in range(2)])  # object 2's area stays background
        frame = FrameAssignment(width=16, height=16, masks=masks)
        ratios, bg = circle_ratios(frame, 8.0, 8.0, 5.0)
        assert float(ratios.sum()) + bg == 1.0


class TestAssignTarget:
    def test_strict_argmax(self):
        registry = ObjectRegistry.from_names(["elephant", "ball"])
        assert assign_target({"elephant": 0.6, "ball": 0.1}, 0.3, registry) == "elephant"

    def test_all_zero_is_background(self):
        registry = ObjectRegistry.from_names(["elephant", "ball"])
        assert assign_target({"elephant": 0.0, "ball": 0.0}, 1.0, registry) == "background"

    def test_tie_breaks_to_lowest_object_id(self):
        registry = ObjectRegistry.from_names(["a", "b", "c"])
        assert assign_target({"c": 0.4, "a": 0.4, "b": 0.1}, 0.1, registry) == "a"

    def test_iteration_order_irrelevant(self):
        registry = ObjectRegistry.from_names(["a", "b"])
        r1 = {"a": 0.5, "b": 0.5}
        r2 = {"b": 0.5, "a": 0.5}
        assert assign_target(r1, 0.0, registry) == assign_target(r2, 0.0, registry) == "a"


class TestMapTrajectory:
    def test_empty_gaze_track(self):
        archive = _demo_archive()
        frames = demo_frame_track()
        out = map_trajectory(GazeTrack(()), frames, archive, GazeMappingConfig(radius_px=3.0))
        assert out == []

    def test_constructed_scene_sequence(self):
        # The demo gaze rests on the elephant, then the ball, then background.
        archive = _demo_archive()
        frames = demo_frame_track()
        out = map_trajectory(_demo_gaze(), frames, archive, GazeMappingConfig(radius_px=3.0))
        assert len(out) == 60
        assert [s.target for s in out[:20]] == ["elephant"] * 20
        assert [s.target for s in out[20:40]] == ["ball"] * 20
        assert [s.target for s in out[40:]] == ["background"] * 20
        assert out[0].ratios["elephant"] == 1.0

    def test_off_frame_label(self):
        archive = _demo_archive()
        frames = TimestampTrack(((0, 0),))
        gaze = GazeTrack((GazeSample(0, -50.0, -50.0),))
        out = map_trajectory(gaze, frames, archive, GazeMappingConfig(radius_px=3.0))
        assert out[0].target == "off_frame"
        assert all(v == 0.0 for v in out[0].ratios.values())

    def test_archive_must_cover_frame_track(self):
        archive = _demo_archive()
        frames = TimestampTrack(tuple((i, i * 33_333_333) for i in range(11)))
        with pytest.raises(PipelineError, match="10 frames"):
            map_trajectory(_demo_gaze(), frames, archive, GazeMappingConfig(radius_px=3.0))

    def test_order_and_length_preserved(self):
        archive = _demo_archive()
        frames = demo_frame_track()
        gaze = _demo_gaze()
        out = map_trajectory(gaze, frames, archive, GazeMappingConfig(radius_px=3.0))
        assert [s.timestamp_ns for s in out] == [s.timestamp_ns for s in gaze.samples]


def vote_oracle(labels, window, originals):
    out = []
    half = window // 2
    for i in range(len(labels)):
        chunk = labels[max(0, i - half) : i + half + 1]
        best = None
        best_count = 0
        tie = False
        for lab in set(chunk):
            c = chunk.count(lab)
            if c > best_count:
                best, best_count, tie = lab, c, False
            elif c == best_count:
                tie = True
        out.append(originals[i] if tie else best)
    return out


def _traj(labels):
    return [
        GazeTargetSample(timestamp_ns=i, frame_index=0, target=t, ratios={}, background_ratio=0.0)
        for i, t in enumerate(labels)
    ]


class TestSmoothTargets:
    def test_constant_is_unchanged(self):
        traj = _traj(["A"] * 5)
        assert [s.target for s in smooth_targets(traj, 3)] == ["A"] * 5

    def test_isolated_flip_removed(self):
        traj = _traj(["A", "A", "B", "A", "A"])
        assert [s.target for s in smooth_targets(traj, 3)] == ["A"] * 5

    def test_even_window_rejected(self):
        with pytest.raises(ValueError, match="odd"):
            smooth_targets(_traj(["A"]), 4)

    def test_matches_vote_oracle(self):
        rng = np.random.default_rng(13)
        for _ in range(40):
            labels = [str(x) for x in rng.integers(0, 3, int(rng.integers(1, 30)))]
            window = int(rng.choice([3, 5, 7]))
            smoothed = [s.target for s in smooth_targets(_traj(labels), window)]
            assert smoothed == vote_oracle(labels, window, labels)

    def test_never_introduces_absent_label(self):
        rng = np.random.default_rng(14)
        labels = [str(x) for x in rng.integers(0, 4, 50)]
        smoothed = smooth_targets(_traj(labels), 5)
        for i, s in enumerate(smoothed):
            window = labels[max(0, i - 2) : i + 3]
            assert s.target in window


class TestTrajectoryCsv:
    def test_round_trip(self, tmp_path):
        archive = _demo_archive()
        frames = demo_frame_track()
        traj = map_trajectory(_demo_gaze(), frames, archive, GazeMappingConfig(radius_px=3.0))
        path = tmp_path / "trajectory.csv"
        write_trajectory_csv(traj, archive.registry, path)
        names, loaded = load_trajectory_csv(path)
        assert names == ["elephant", "ball"]
        assert loaded == traj
