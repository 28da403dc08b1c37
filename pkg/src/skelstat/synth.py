"""Seeded synthetic skeleton datasets with controllable anomaly separation.

The motion model is deliberately simple (linear drift plus Gaussian
jitter): the generator exists to give the analysis and metrics pipeline a
ground truth with tunable separation, not to look like real footage.
Randomness comes from numpy's PCG64 via one SeedSequence child per video,
so identical specs serialize byte-identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .analysis import distances_to_mean, mean_tensor
from .core import (
    DataError,
    FeatureType,
    FrameLabel,
    Keypoint,
    Label,
    PoseDetection,
    Split,
    Tracklet,
    WindowingConfig,
)
from .features import CenterPolicy, build_windows
from .ingest import DatasetBundle, VideoMeta
from .metrics import windows_to_frame_scores


@dataclass(frozen=True)
class TrajectoryShift:
    """Displace every joint by delta pixels in x during anomalous frames."""

    delta: float

    def __post_init__(self):
        if self.delta < 0:
            raise DataError(f"shift delta must be >= 0, got {self.delta}")


@dataclass(frozen=True)
class PoseDeform:
    """Scale the skeleton's joint offsets by (1 + amplitude) during anomalies."""

    amplitude: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise DataError(f"deform amplitude must be >= 0, got {self.amplitude}")


@dataclass(frozen=True)
class GroupConverge:
    """Pull everyone toward the group centroid at the given rate."""

    rate: float

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise DataError(f"converge rate must be in [0, 1], got {self.rate}")


AnomalyMode = Union[TrajectoryShift, PoseDeform, GroupConverge]


@dataclass(frozen=True)
class SynthSpec:
    n_train_videos: int = 3
    n_val_videos: int = 3
    frames_per_video: int = 240
    persons_per_video: int = 3
    k: int = 17
    frame_width: float = 856.0
    frame_height: float = 480.0
    drift_speed: float = 1.0  # max |velocity| per axis, px/frame
    jitter_std: float = 1.0  # per-joint Gaussian noise, px
    spawn_radius: Optional[float] = None  # None: spawn anywhere inside the frame
    anomaly_modes: Tuple[AnomalyMode, ...] = ()
    anomaly_fraction: float = 0.0
    seed: int = 0
    T: int = 24
    stride: int = 6
    N: int = 35

    def __post_init__(self):
        object.__setattr__(self, "anomaly_modes", tuple(self.anomaly_modes))
        if min(self.n_train_videos, self.n_val_videos) < 1:
            raise DataError("need at least one train and one val video")
        if self.frames_per_video < self.T:
            raise DataError("frames_per_video must be >= T")
        if self.persons_per_video < 1:
            raise DataError("persons_per_video must be >= 1")
        if self.k < 2:
            raise DataError("k must be >= 2 (two hip joints)")
        if not 0.0 <= self.anomaly_fraction <= 1.0:
            raise DataError(f"anomaly_fraction must be in [0, 1], got {self.anomaly_fraction}")
        if self.anomaly_fraction > 0 and not self.anomaly_modes:
            raise DataError("anomaly_fraction > 0 requires at least one anomaly mode")
        if self.drift_speed < 0 or self.jitter_std < 0:
            raise DataError("motion parameters must be non-negative")

    @property
    def hip_indices(self) -> Tuple[int, int]:
        return (11, 12) if self.k >= 13 else (0, 1)

    def config(self) -> WindowingConfig:
        return WindowingConfig(
            T=self.T,
            stride=self.stride,
            k=self.k,
            N=max(self.N, self.persons_per_video),
            frame_width=self.frame_width,
            frame_height=self.frame_height,
            hip_indices=self.hip_indices,
        )

    def to_dict(self) -> dict:
        modes = []
        for mode in self.anomaly_modes:
            if isinstance(mode, TrajectoryShift):
                modes.append({"kind": "trajectory_shift", "delta": mode.delta})
            elif isinstance(mode, PoseDeform):
                modes.append({"kind": "pose_deform", "amplitude": mode.amplitude})
            else:
                modes.append({"kind": "group_converge", "rate": mode.rate})
        return {
            "n_train_videos": self.n_train_videos,
            "n_val_videos": self.n_val_videos,
            "frames_per_video": self.frames_per_video,
            "persons_per_video": self.persons_per_video,
            "k": self.k,
            "frame_width": self.frame_width,
            "frame_height": self.frame_height,
            "drift_speed": self.drift_speed,
            "jitter_std": self.jitter_std,
            "spawn_radius": self.spawn_radius,
            "anomaly_modes": modes,
            "anomaly_fraction": self.anomaly_fraction,
            "seed": self.seed,
            "T": self.T,
            "stride": self.stride,
            "N": self.N,
            "rng": "numpy PCG64, one SeedSequence child per video",
        }


def _skeleton_template(k: int, hip_indices: Tuple[int, int]) -> np.ndarray:
    """Fixed per-joint offsets around the person center; the two hips sit
    symmetrically so their midpoint is exactly the center path."""
    template = np.zeros((k, 2), dtype=np.float64)
    for i in range(k):
        angle = 2.0 * math.pi * i / k
        template[i] = (8.0 * math.cos(angle), 12.0 * math.sin(angle))
    left, right = hip_indices
    template[left] = (-6.0, 0.0)
    template[right] = (6.0, 0.0)
    return template


def _anomaly_segment(spec: SynthSpec, rng: np.random.Generator) -> Optional[Tuple[int, int]]:
    seg_len = round(spec.anomaly_fraction * spec.frames_per_video)
    if seg_len == 0:
        return None
    # keep a T-frame normal margin on both sides when the video allows it
    margin = min(spec.T, (spec.frames_per_video - seg_len) // 2)
    start_lo = margin
    start_hi = spec.frames_per_video - seg_len - margin
    start = int(rng.integers(start_lo, start_hi + 1)) if start_hi > start_lo else start_lo
    return (start, start + seg_len)


def generate(spec: SynthSpec) -> DatasetBundle:
    """Deterministic dataset: normal tracklets follow linear drift plus
    jitter, anomalous segments apply the configured modes, labels mark
    exactly the anomalous frames."""
    cfg = spec.config()
    template = _skeleton_template(spec.k, spec.hip_indices)
    F, P = spec.frames_per_video, spec.persons_per_video
    t = np.arange(F, dtype=np.float64)

    video_ids = [f"train{i:03d}" for i in range(spec.n_train_videos)]
    video_ids += [f"val{i:03d}" for i in range(spec.n_val_videos)]
    children = np.random.SeedSequence(spec.seed).spawn(len(video_ids))

    tracklets: List[Tracklet] = []
    labels: List[FrameLabel] = []
    videos: Dict[str, VideoMeta] = {}
    for video_id, child in zip(video_ids, children):
        is_val = video_id.startswith("val")
        rng = np.random.default_rng(child)
        videos[video_id] = VideoMeta("val" if is_val else "train", spec.frame_width, spec.frame_height)
        segment = _anomaly_segment(spec, rng) if is_val else None

        if spec.spawn_radius is None:
            lo = np.array([0.1 * spec.frame_width, 0.1 * spec.frame_height])
            hi = np.array([0.9 * spec.frame_width, 0.9 * spec.frame_height])
            starts = rng.uniform(lo, hi, size=(P, 2))
        else:
            center = np.array([spec.frame_width / 2.0, spec.frame_height / 2.0])
            starts = center + rng.uniform(-spec.spawn_radius, spec.spawn_radius, size=(P, 2))
        velocities = rng.uniform(-spec.drift_speed, spec.drift_speed, size=(P, 2))
        centers = starts[:, None, :] + velocities[:, None, :] * t[None, :, None]  # (P, F, 2)

        if segment is not None:
            seg = slice(*segment)
            seg_len = segment[1] - segment[0]
            for mode in spec.anomaly_modes:
                if isinstance(mode, GroupConverge):
                    centroid = centers[:, seg, :].mean(axis=0)
                    progress = np.linspace(0.0, 1.0, seg_len)[None, :, None]
                    centers[:, seg, :] += mode.rate * progress * (centroid[None] - centers[:, seg, :])

        joints = centers[:, :, None, :] + template[None, None, :, :]
        joints += rng.normal(0.0, spec.jitter_std, size=joints.shape)
        confidences = rng.uniform(0.5, 1.0, size=(P, F, spec.k))

        if segment is not None:
            seg = slice(*segment)
            for mode in spec.anomaly_modes:
                if isinstance(mode, TrajectoryShift):
                    joints[:, seg, :, 0] += mode.delta
                elif isinstance(mode, PoseDeform):
                    joints[:, seg, :, :] += mode.amplitude * template[None, None, :, :]

        for p in range(P):
            track_id = f"p{p:02d}"
            detections = tuple(
                PoseDetection(
                    video_id,
                    frame,
                    track_id,
                    tuple(
                        Keypoint(joints[p, frame, j, 0], joints[p, frame, j, 1], confidences[p, frame, j])
                        for j in range(spec.k)
                    ),
                )
                for frame in range(F)
            )
            tracklets.append(Tracklet(video_id, track_id, detections))

        if is_val:
            for frame in range(F):
                anomalous = segment is not None and segment[0] <= frame < segment[1]
                labels.append(
                    FrameLabel(video_id, frame, Label.ANOMALOUS if anomalous else Label.NORMAL)
                )

    return DatasetBundle(tracklets=tracklets, labels=labels, videos=videos, config=cfg)


ORACLE_MODES = ("perfect", "random", "distance")


def oracle_scores(
    bundle: DatasetBundle,
    mode: str,
    seed: int = 0,
) -> List[Tuple[str, int, float]]:
    """Anomaly-polarity scores for every labeled frame.

    ``perfect`` separates the classes exactly, ``random`` draws seeded
    uniform scores, ``distance`` scores each frame by the maximum
    uncentered-trajectory-window distance to the training mean (the
    implicit nearest-mean baseline detector).
    """
    if mode not in ORACLE_MODES:
        raise DataError(f"unknown oracle mode {mode!r}; expected one of {ORACLE_MODES}")
    labels = sorted(bundle.labels, key=lambda l: (l.video_id, l.frame_index))
    if mode == "perfect":
        return [
            (l.video_id, l.frame_index, 1.0 if l.label is Label.ANOMALOUS else 0.0)
            for l in labels
        ]
    if mode == "random":
        rng = np.random.default_rng(seed)
        return [(l.video_id, l.frame_index, float(rng.random())) for l in labels]

    # distance mode: uncentered trajectories keep absolute displacement, so
    # shifted segments stand out against the training mean
    windows = build_windows(bundle, FeatureType.ABSOLUTE_TRAJECTORY, CenterPolicy.NONE)
    train = [w for w in windows if w.split is Split.TRAIN]
    val = [w for w in windows if w.split is not Split.TRAIN]
    if not train or not val:
        raise DataError("distance oracle needs both training and validation windows")
    mu_tn = mean_tensor(train)
    series = distances_to_mean(val, mu_tn)
    frames, _ = windows_to_frame_scores(list(zip(val, series.values.tolist())), labels)
    return [(f.video_id, f.frame_index, f.score) for f in frames]
