import numpy as np
import pytest

from skelstat.core import (
    DataError,
    FeatureType,
    Keypoint,
    Label,
    PoseDetection,
    Split,
    Tracklet,
    WindowingConfig,
)
from skelstat.features import (
    CenterPolicy,
    build_pose_windows,
    build_social_windows,
    build_trajectory_windows,
    build_windows,
    center_window,
    label_window,
    parse_windows,
    person_center,
    serialize_windows,
    window_starts,
)
from skelstat.ingest import DatasetBundle, VideoMeta

CFG = WindowingConfig(T=24, stride=6, k=17, frame_width=100, frame_height=100)


def detection(frame, coords, video="v1", track="t1", k=None):
    """coords: (k, 2) array or a single (x, y) used for every joint."""
    coords = np.asarray(coords, dtype=float)
    if coords.ndim == 1:
        k = k or 17
        coords = np.tile(coords, (k, 1))
    return PoseDetection(
        video, frame, track, tuple(Keypoint(x, y, 0.9) for x, y in coords)
    )


def tracklet_from_frames(frames, rng=None, video="v1", track="t1", k=17):
    rng = rng or np.random.default_rng(0)
    return Tracklet(
        video,
        track,
        tuple(detection(f, rng.uniform(0, 100, size=(k, 2)), video, track) for f in frames),
    )


def normal_labels(frames, video="v1"):
    return {(video, f): Label.NORMAL for f in frames}


class TestPersonCenter:
    def test_midpoint(self):
        coords = np.zeros((17, 2))
        coords[11] = (10, 20)
        coords[12] = (30, 40)
        assert person_center(detection(0, coords)) == (20, 30)

    def test_coincident_hips(self):
        coords = np.full((17, 2), 5.0)
        assert person_center(detection(0, coords)) == (5, 5)

    def test_matches_independent_recomputation(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            coords = rng.uniform(-10, 500, size=(17, 2))
            det = detection(0, coords)
            expected = ((coords[11][0] + coords[12][0]) / 2, (coords[11][1] + coords[12][1]) / 2)
            assert person_center(det) == pytest.approx(expected, abs=0)

    def test_bad_layout(self):
        with pytest.raises(DataError, match="hip indices"):
            person_center(detection(0, np.zeros((5, 2)), k=5), hip_indices=(11, 12))


class TestPoseWindows:
    def test_exact_length_run_one_window(self):
        t = tracklet_from_frames(range(24))
        windows = build_pose_windows(t, CFG, normal_labels(range(24)), CenterPolicy.NONE)
        assert len(windows) == 1
        assert windows[0].start_frame == 0

    def test_36_frames_three_windows(self):
        t = tracklet_from_frames(range(36))
        windows = build_pose_windows(t, CFG, normal_labels(range(36)), CenterPolicy.NONE)
        assert [w.start_frame for w in windows] == [0, 6, 12]

    def test_gap_splits_runs(self):
        frames = [f for f in range(30) if f != 10]
        t = tracklet_from_frames(frames)
        windows = build_pose_windows(t, CFG, normal_labels(frames), CenterPolicy.NONE)
        assert windows == []  # runs of 10 and 19 are both shorter than T=24

    def test_window_count_law_against_enumeration(self):
        rng = np.random.default_rng(5)
        cfg_small = WindowingConfig(T=5, stride=2, k=2, frame_width=100, frame_height=100, hip_indices=(0, 1))
        for _ in range(50):
            L = int(rng.integers(1, 40))
            t = tracklet_from_frames(range(L), rng, k=2)
            windows = build_pose_windows(t, cfg_small, normal_labels(range(L)), CenterPolicy.NONE)
            expected = [s for s in range(0, max(L - 5 + 1, 0), 2)]
            assert [w.start_frame for w in windows] == expected

    def test_coords_match_source(self):
        rng = np.random.default_rng(6)
        t = tracklet_from_frames(range(24), rng)
        (w,) = build_pose_windows(t, CFG, normal_labels(range(24)), CenterPolicy.NONE)
        src = np.array([[(kp.x, kp.y) for kp in d.keypoints] for d in t.detections])
        assert np.array_equal(w.coords, src)

    def test_split_assignment(self):
        labels = normal_labels(range(24))
        labels[("v1", 3)] = Label.ANOMALOUS
        t = tracklet_from_frames(range(24))
        (w,) = build_pose_windows(t, CFG, labels, CenterPolicy.NONE, video_split="val")
        assert w.split is Split.VAL_ANOMALOUS and w.label is Label.ANOMALOUS
        (w_train,) = build_pose_windows(t, CFG, {}, CenterPolicy.NONE, video_split="train")
        assert w_train.split is Split.TRAIN


class TestCenterWindow:
    def window(self, rng=None):
        rng = rng or np.random.default_rng(1)
        return rng.uniform(0, 100, size=(24, 17, 2))

    def hip_mid(self, frame):
        return (frame[11] + frame[12]) / 2.0

    def test_already_centered_is_identity(self):
        coords = self.window()
        shift = np.array(CFG.frame_center) - self.hip_mid(coords[0])
        coords = coords + shift
        out = center_window(coords, CFG, CenterPolicy.FIRST_POSE_TO_FRAME_CENTER)
        assert np.allclose(out, coords, atol=1e-9)

    def test_constant_preshift_cancels(self):
        coords = self.window()
        out_a = center_window(coords, CFG, CenterPolicy.FIRST_POSE_TO_FRAME_CENTER)
        out_b = center_window(coords + np.array([123.4, -56.7]), CFG, CenterPolicy.FIRST_POSE_TO_FRAME_CENTER)
        assert np.allclose(out_a, out_b, atol=1e-9)

    def test_anchor_lands_on_frame_center_and_displacements_kept(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            coords = self.window(rng)
            out = center_window(coords, CFG, CenterPolicy.FIRST_POSE_TO_FRAME_CENTER)
            assert self.hip_mid(out[0]) == pytest.approx(CFG.frame_center, abs=1e-9)
            assert np.allclose(np.diff(out, axis=0), np.diff(coords, axis=0), atol=1e-9)

    def test_none_policy_is_identity(self):
        coords = self.window()
        assert np.array_equal(center_window(coords, CFG, CenterPolicy.NONE), coords)


class TestTrajectoryWindows:
    def test_count_matches_pose_windows(self):
        t = tracklet_from_frames(range(40))
        labels = normal_labels(range(40))
        pose = build_pose_windows(t, CFG, labels, CenterPolicy.NONE)
        traj = build_trajectory_windows(t, CFG, labels, CenterPolicy.NONE)
        assert len(traj) == len(pose)
        assert all(w.shape == (24, 1) for w in traj)

    def test_trajectory_is_hip_midpoint_of_pose(self):
        rng = np.random.default_rng(8)
        t = tracklet_from_frames(range(24), rng)
        labels = normal_labels(range(24))
        (pose,) = build_pose_windows(t, CFG, labels, CenterPolicy.NONE)
        (traj,) = build_trajectory_windows(t, CFG, labels, CenterPolicy.NONE)
        expected = (pose.coords[:, 11, :] + pose.coords[:, 12, :]) / 2.0
        assert np.allclose(traj.coords[:, 0, :], expected, atol=0)

    def test_constant_position_centered_to_frame_center(self):
        t = Tracklet("v1", "t1", tuple(detection(f, (30.0, 40.0)) for f in range(24)))
        (w,) = build_trajectory_windows(t, CFG, normal_labels(range(24)))
        assert np.allclose(w.coords, np.tile(CFG.frame_center, (24, 1, 1)), atol=1e-9)


class TestLabelWindow:
    def test_all_normal(self):
        labels = normal_labels(range(24))
        assert label_window(labels, "v1", 0, 24, "val") is Label.NORMAL

    def test_any_anomalous(self):
        labels = normal_labels(range(24))
        labels[("v1", 23)] = Label.ANOMALOUS
        assert label_window(labels, "v1", 0, 24, "val") is Label.ANOMALOUS

    def test_unlabeled_val_frame_errors(self):
        labels = normal_labels(range(23))
        with pytest.raises(DataError, match="unlabeled"):
            label_window(labels, "v1", 0, 24, "val")

    def test_train_implicitly_normal(self):
        assert label_window({}, "v1", 0, 24, "train") is Label.NORMAL

    def test_matches_any_oracle(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            flags = rng.random(24) < 0.2
            labels = {
                ("v1", f): (Label.ANOMALOUS if flag else Label.NORMAL)
                for f, flag in enumerate(flags)
            }
            expected = Label.ANOMALOUS if any(flags) else Label.NORMAL
            assert label_window(labels, "v1", 0, 24, "val") is expected


def social_bundle(detections, n_videos=("v1",), cfg=None, labels=()):
    cfg = cfg or WindowingConfig(T=4, stride=2, k=2, N=3, frame_width=100, frame_height=100, hip_indices=(0, 1))
    by_track = {}
    for det in detections:
        by_track.setdefault((det.video_id, det.track_id), []).append(det)
    tracklets = [
        Tracklet(v, t, tuple(sorted(dets, key=lambda d: d.frame_index)))
        for (v, t), dets in sorted(by_track.items())
    ]
    return DatasetBundle(
        tracklets=tracklets,
        labels=list(labels),
        videos={v: VideoMeta("train", 100, 100) for v in n_videos},
        config=cfg,
    )


class TestSocialWindows:
    def det(self, frame, track, xy, video="v1"):
        return detection(frame, np.tile(xy, (2, 1)), video, track, k=2)

    def test_two_tracks_padded(self):
        dets = [self.det(f, t, (float(f), 1.0 if t == "a" else 2.0)) for f in range(4) for t in ("a", "b")]
        (w,) = build_social_windows(social_bundle(dets))
        assert w.shape == (4, 3)
        assert w.mask[:, :2].all() and not w.mask[:, 2].any()
        assert np.array_equal(w.coords[:, 2], np.zeros((4, 2)))
        assert w.track_ids == ("a", "b")

    def test_partial_presence_zero_filled(self):
        dets = [self.det(f, "a", (1.0, 1.0)) for f in range(4)]
        dets += [self.det(f, "b", (2.0, 2.0)) for f in range(2)]  # leaves at frame 2
        (w,) = build_social_windows(social_bundle(dets))
        assert w.mask[:2, 1].all() and not w.mask[2:, 1].any()
        assert np.array_equal(w.coords[2:, 1], np.zeros((2, 2)))

    def test_capacity_exceeded(self):
        dets = [self.det(f, f"t{t}", (float(t), 0.0)) for f in range(4) for t in range(4)]
        with pytest.raises(DataError, match="capacity"):
            build_social_windows(social_bundle(dets))
        windows = build_social_windows(social_bundle(dets), truncate=True)
        assert windows[0].track_ids == ("t0", "t1", "t2")

    def test_tracklet_order_does_not_matter(self):
        rng = np.random.default_rng(12)
        dets = [self.det(f, t, tuple(rng.uniform(0, 50, 2))) for f in range(6) for t in ("a", "b", "c")]
        bundle_fwd = social_bundle(dets)
        bundle_rev = social_bundle(dets)
        bundle_rev.tracklets.reverse()
        for wa, wb in zip(build_social_windows(bundle_fwd), build_social_windows(bundle_rev)):
            assert np.array_equal(wa.coords, wb.coords)
            assert wa.track_ids == wb.track_ids

    def test_occupied_coords_come_from_source(self):
        rng = np.random.default_rng(13)
        points = {(f, t): tuple(rng.uniform(0, 50, 2)) for f in range(6) for t in ("a", "b")}
        dets = [self.det(f, t, xy) for (f, t), xy in points.items()]
        for w in build_social_windows(social_bundle(dets)):
            for ti, track in enumerate(w.track_ids):
                for t in range(w.shape[0]):
                    if w.mask[t, ti]:
                        assert tuple(w.coords[t, ti]) == points[(w.start_frame + t, track)]

    def test_empty_frame_range_window(self):
        # labels define the frame range, no tracks at all
        from skelstat.core import FrameLabel

        labels = [FrameLabel("v1", f, Label.NORMAL) for f in range(4)]
        cfg = WindowingConfig(T=4, stride=2, k=2, N=3, frame_width=100, frame_height=100, hip_indices=(0, 1))
        bundle = DatasetBundle(
            tracklets=[], labels=labels, videos={"v1": VideoMeta("val", 100, 100)}, config=cfg
        )
        (w,) = build_social_windows(bundle)
        assert not w.mask.any() and not w.coords.any()


class TestWindowStartsHelper:
    def test_matches_formula(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            L = int(rng.integers(1, 100))
            T = int(rng.integers(2, 30))
            stride = int(rng.integers(1, 10))
            starts = list(window_starts(L, T, stride))
            expected = (L - T) // stride + 1 if L >= T else 0
            assert len(starts) == expected


class TestWindowSerialization:
    def test_bit_exact_round_trip(self):
        rng = np.random.default_rng(21)
        t = tracklet_from_frames(range(30), rng)
        windows = build_pose_windows(t, CFG, normal_labels(range(30)))
        parsed = parse_windows(serialize_windows(windows))
        assert len(parsed) == len(windows)
        for a, b in zip(windows, parsed):
            assert np.array_equal(a.coords, b.coords)
            assert np.array_equal(a.mask, b.mask)
            assert (a.video_id, a.start_frame, a.track_ids, a.label, a.split) == (
                b.video_id,
                b.start_frame,
                b.track_ids,
                b.label,
                b.split,
            )


def test_build_windows_uses_manifest_resolution():
    t = Tracklet("v1", "t1", tuple(detection(f, (10.0, 10.0)) for f in range(24)))
    bundle = DatasetBundle(
        tracklets=[t],
        labels=[],
        videos={"v1": VideoMeta("train", 200, 50)},
        config=WindowingConfig(frame_width=999, frame_height=999),
    )
    (w,) = build_windows(bundle, FeatureType.ABSOLUTE_TRAJECTORY)
    assert np.allclose(w.coords[0, 0], (100.0, 25.0), atol=1e-9)
